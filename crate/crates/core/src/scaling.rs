//! Log–log slope fits for scaling laws `y ≈ C·x^a·|log x|^ℓ` with `ℓ` fixed.

use crate::error::{invalid, Result};

/// Least-squares slope with a leave-one-out band.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Extremes of the slope over all leave-one-out refits (equal to
    /// `slope` with fewer than three points).
    pub loo_min: f64,
    pub loo_max: f64,
    /// Root-mean-square residual in log space.
    pub rms: f64,
    pub points: usize,
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit `log y = a·log x + b + ℓ·log|log x|` for `a`, `b` with `ℓ` held fixed.
pub fn fit_power_law(xs: &[f64], ys: &[f64], log_power: f64) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("slope fits need at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("slope fits need positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| if log_power == 0.0 { y.ln() } else { y.ln() - log_power * x.ln().abs().ln() })
        .collect();
    if lx.iter().all(|v| (v - lx[0]).abs() < 1e-14) {
        return Err(invalid("slope fits need distinct abscissae"));
    }
    let (slope, intercept) = ols(&lx, &ly);
    let rms = (lx.iter().zip(&ly).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / lx.len() as f64).sqrt();
    let (mut loo_min, mut loo_max) = (slope, slope);
    if lx.len() >= 3 {
        for skip in 0..lx.len() {
            let x: Vec<f64> = lx.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
            let y: Vec<f64> = ly.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect();
            let (s, _) = ols(&x, &y);
            loo_min = loo_min.min(s);
            loo_max = loo_max.max(s);
        }
    }
    Ok(SlopeFit { slope, intercept, loo_min, loo_max, rms, points: lx.len() })
}

/// `log(max/min)` of a set of positive values.
pub fn log_range(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    (hi / lo).ln()
}
