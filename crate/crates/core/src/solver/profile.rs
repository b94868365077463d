//! Radial profile `𝒟ₙ` with `−Δ𝒟ₙ = λaₙ[(1+|z|²)^{−(n−2)/2} − |z|^{−(n−2)}]`
//! on `ℝⁿ` and decay at infinity.

use crate::bubbles::dimensional_constant;
use crate::domain::{graded_faces, Focus};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Outer radius of the computational interval.
pub const PROFILE_RADIUS: f64 = 1e3;
const CELLS: usize = 4000;

/// Samples of `𝒟ₙ` at cell centers of a graded mesh on `[0, R_max]`, with
/// the far-field asymptote beyond.
#[derive(Clone, Debug)]
pub struct DnProfile {
    n: usize,
    lambda: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// Coefficients of `I(r) ≈ α log r + β` for the tail.
    alpha: f64,
    beta: f64,
}

/// Right-hand side `λaₙ[(1+r²)^{−m} − r^{−2m}]`, stable for large `r`.
fn source(n: usize, lambda: f64, r: f64) -> f64 {
    let m = (n as f64 - 2.0) / 2.0;
    let a = dimensional_constant(n);
    let bracket = if r > 1.0 {
        r.powf(-2.0 * m) * (-m * (1.0 / (r * r)).ln_1p()).exp_m1()
    } else {
        (1.0 + r * r).powf(-m) - r.powf(-2.0 * m)
    };
    lambda * a * bracket
}

impl DnProfile {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Sample radii and values.
    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.values)
    }

    /// Leading singular behavior at the origin, carried analytically.
    fn near_field(&self, r: f64) -> f64 {
        let c = 0.5 * self.lambda * dimensional_constant(self.n);
        match self.n {
            3 => c * r,
            4 => c * r.ln(),
            _ => -c / r,
        }
    }

    fn tail(&self, r: f64) -> f64 {
        let k = self.n as f64 - 2.0;
        (self.alpha * (r.ln() / k + 1.0 / (k * k)) + self.beta / k) * r.powf(-k)
    }

    /// `𝒟ₙ(|z| = r)`; singular at `r = 0` for `n ≥ 4`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= PROFILE_RADIUS {
            return self.tail(r);
        }
        let xs = &self.nodes;
        let reg = |i: usize| self.values[i] - self.near_field(xs[i]);
        if r <= xs[0] {
            // Regular part is even at the origin.
            let b = (reg(1) - reg(0)) / (xs[1] * xs[1] - xs[0] * xs[0]);
            let at0 = reg(0) + b * (r * r - xs[0] * xs[0]);
            return if r == 0.0 && self.n > 3 { f64::INFINITY.copysign(self.near_field(1e-300)) } else { at0 + self.near_field(r) };
        }
        let last = xs.len() - 1;
        if r >= xs[last] {
            let w = (r - xs[last]) / (PROFILE_RADIUS - xs[last]);
            return (1.0 - w) * self.values[last] + w * self.tail(PROFILE_RADIUS);
        }
        // Quadratic through three neighbours on the regular part.
        let k = xs.partition_point(|v| *v <= r).clamp(1, last - 1);
        let (i0, i1, i2) = (k - 1, k, k + 1);
        let (x0, x1, x2) = (xs[i0], xs[i1], xs[i2]);
        let l0 = (r - x1) * (r - x2) / ((x0 - x1) * (x0 - x2));
        let l1 = (r - x0) * (r - x2) / ((x1 - x0) * (x1 - x2));
        let l2 = (r - x0) * (r - x1) / ((x2 - x0) * (x2 - x1));
        l0 * reg(i0) + l1 * reg(i1) + l2 * reg(i2) + self.near_field(r)
    }
}

/// Finite-volume solve of the radial problem on `[0, R_max]` with a Robin
/// condition at `R_max` matched to the `r^{2−n} log r` decay.
pub fn solve_dn_profile(n: usize, lambda: f64) -> Result<DnProfile> {
    if !(3..=5).contains(&n) {
        return Err(Error::Unsupported(format!("profile for n = {n}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("λ must be positive, got {lambda}")));
    }
    let nf = n as f64;
    let big = PROFILE_RADIUS;
    let faces = graded_faces(0.0, big, &[Focus::new(0.0, 1e-4)], big / 20.0, CELLS);
    let nodes: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_intervals: 200 };
    let weighted = |r: f64| if r == 0.0 { 0.0 } else { r.powf(nf - 1.0) * source(n, lambda, r) };
    let mut load = Vec::with_capacity(CELLS);
    for w in faces.windows(2) {
        load.push(integrate(weighted, w[0], w[1], opts).map_err(|e| Error::Quadrature(e.to_string()))?.value);
    }
    let total: f64 = crate::quadrature::kahan_sum(load.iter().copied());
    let alpha = big.powf(nf) * source(n, lambda, big);
    let beta = total - alpha * big.ln();
    let k = nf - 2.0;
    let d_tail = (alpha * (big.ln() / k + 1.0 / (k * k)) + beta / k) * big.powf(-k);
    let slope = -total * big.powf(1.0 - nf);
    let gamma = slope / d_tail;
    if !(gamma < 0.0) {
        return Err(Error::Solver(format!("far-field matching produced a non-decaying ratio {gamma:.3e}")));
    }

    // Tridiagonal system.
    let m = nodes.len();
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m - 1];
    for i in 0..m - 1 {
        let c = faces[i + 1].powf(nf - 1.0) / (nodes[i + 1] - nodes[i]);
        diag[i] += c;
        diag[i + 1] += c;
        off[i] = -c;
    }
    let gap = big - nodes[m - 1];
    diag[m - 1] += -big.powf(nf - 1.0) * gamma / (1.0 - gamma * gap);
    let values = thomas(&diag, &off, &load);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("profile solve produced non-finite values".into()));
    }
    Ok(DnProfile { n, lambda, nodes, values, alpha, beta })
}

/// Symmetric tridiagonal solve.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = if m > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - off[i - 1] * c[i - 1];
        if i < m - 1 {
            c[i] = off[i] / den;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / den;
    }
    let mut x = d;
    for i in (0..m - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_tail, log_breaks};

    /// Independent evaluation: `𝒟(r) = [r^{2−n} I(r) + ∫_r^∞ s F(s) ds]/(n−2)`.
    fn reference(n: usize, lambda: f64, r: f64) -> f64 {
        let nf = n as f64;
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 2000 };
        let mut breaks = vec![0.0];
        breaks.extend(log_breaks(1e-6_f64.min(r / 2.0), r).into_iter().filter(|b| *b < r));
        breaks.push(r);
        let inner: f64 = breaks
            .windows(2)
            .map(|w| integrate(|s| if s == 0.0 { 0.0 } else { s.powf(nf - 1.0) * source(n, lambda, s) }, w[0], w[1], opts).unwrap().value)
            .sum();
        let outer = integrate_tail(|s| s * source(n, lambda, s), r, r.max(1.0), opts).unwrap().value;
        (r.powf(2.0 - nf) * inner + outer) / (nf - 2.0)
    }

    #[test]
    fn matches_independent_quadrature() {
        for n in [3usize, 4, 5] {
            let p = solve_dn_profile(n, 2.0).unwrap();
            for r in [0.05, 0.3, 1.0, 3.0, 20.0, 300.0] {
                let (got, want) = (p.eval(r), reference(n, 2.0, r));
                assert!((got - want).abs() <= 2e-4 * want.abs().max(1e-3 * p.eval(1.0).abs()), "n={n} r={r}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn near_and_far_field() {
        let p3 = solve_dn_profile(3, 1.0).unwrap();
        let d0 = p3.eval(0.0);
        let s1 = (p3.eval(1e-3) - d0) / 1e-3;
        let s2 = (p3.eval(2e-3) - d0) / 2e-3;
        assert!((s1 / s2 - 1.0).abs() < 0.05);
        let p4 = solve_dn_profile(4, 1.0).unwrap();
        let ratio = p4.eval(1e-4) / p4.eval(1e-2);
        assert!(ratio > 1.5 && ratio < 2.5, "{ratio}");
        let p5 = solve_dn_profile(5, 1.0).unwrap();
        let scaled: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|r: &f64| r.powi(3) * p5.eval(*r) / r.ln()).collect();
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v.abs()), b.max(v.abs())));
        assert!(hi / lo < 2.0, "{scaled:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_dn_profile(6, 1.0).is_err());
        assert!(solve_dn_profile(3, 0.0).is_err());
    }
}
