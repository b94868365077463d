//! Bubble integrals over a domain or the whole space: `∫U^s`, cross terms
//! `∫Uᵢ^s Uⱼ^t` and Riesz potentials of bubble powers.
//!
//! Integrals that are radial about a common center reduce to one-dimensional
//! quadrature. The rest use Monte Carlo with proposals built from bubble
//! densities `∝ U^{2*}`, whose radial law is `r² = u/(1−u)` with
//! `u ~ Beta(n/2, n/2)` in units of `δ`.

use crate::bubbles::{critical_exponent, sphere_area, BubbleParams};
use crate::domain::{DomainKind, DomainModel};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::quadrature::{integrate, integrate_radial, log_breaks, Estimate, QuadOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

/// Where an integral is taken.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    WholeSpace,
    Domain(&'a DomainModel),
}

impl Region<'_> {
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::WholeSpace => true,
            Region::Domain(d) => d.signed_distance(x) > 0.0,
        }
    }

    /// Radius of a ball region centered at `c`, or infinity for the whole space.
    fn radial_extent(&self, c: &[f64]) -> Option<f64> {
        match self {
            Region::WholeSpace => Some(f64::INFINITY),
            Region::Domain(d) => match d.kind() {
                DomainKind::Ball { radius } if c.iter().all(|v| v.abs() < 1e-15) => Some(*radius),
                _ => None,
            },
        }
    }
}

/// Monte Carlo settings. Samples are drawn in chunks with per-chunk streams,
/// so results depend only on `seed` and `samples`.
#[derive(Clone, Copy, Debug)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    pub chunk: usize,
    /// Reject estimates whose standard error exceeds this fraction of the value.
    pub max_rel_stderr: f64,
    pub exec: Execution,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { samples: 400_000, seed: 7, chunk: 20_000, max_rel_stderr: 0.05, exec: Execution::default() }
    }
}

/// Estimate with a standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_intervals: 4000 }
}

pub(crate) fn quad_err(e: Error) -> Error {
    Error::Quadrature(e.to_string())
}

/// `|S^{n−1}| ∫_0^R f(r) r^{n−1} dr` with breakpoints at the given scales.
pub(crate) fn radial_integral(n: usize, f: impl Fn(f64) -> f64, extent: f64, scales: &[f64]) -> Result<Estimate> {
    radial_integral_with(n, f, extent, scales, quad_opts())
}

pub(crate) fn radial_integral_with(n: usize, f: impl Fn(f64) -> f64, extent: f64, scales: &[f64], opts: QuadOptions) -> Result<Estimate> {
    let nf = n as f64;
    let g = |r: f64| if r == 0.0 { 0.0 } else { f(r) * r.powf(nf - 1.0) };
    let lo = scales.iter().copied().fold(f64::INFINITY, f64::min) * 1e-4;
    let hi = scales.iter().copied().fold(0.0, f64::max) * 1e2;
    let mut breaks: Vec<f64> = log_breaks(lo, hi);
    breaks.extend_from_slice(scales);
    breaks.sort_by(f64::total_cmp);
    let est = if extent.is_infinite() {
        integrate_radial(g, &breaks, opts).map_err(quad_err)?
    } else {
        let mut pts = vec![0.0];
        pts.extend(breaks.into_iter().filter(|b| *b < extent));
        pts.push(extent);
        let mut total = Estimate { value: 0.0, error: 0.0 };
        for w in pts.windows(2) {
            total = total + integrate(g, w[0], w[1], opts).map_err(quad_err)?;
        }
        total
    };
    let s = sphere_area(n);
    Ok(Estimate { value: s * est.value, error: s * est.error })
}

/// Draw from the bubble density `∝ U_{δ,ξ}^{2*}`.
fn sample_bubble(delta: f64, xi: &[f64], beta: &Beta<f64>, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let u: f64 = beta.sample(rng);
    let r = delta * (u / (1.0 - u)).sqrt();
    let mut norm = 0.0;
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
        norm += *v * *v;
    }
    let s = r / norm.sqrt();
    for (v, c) in out.iter_mut().zip(xi) {
        *v = c + *v * s;
    }
}

/// Normalized bubble density at `x`.
fn bubble_density(n: usize, delta: f64, xi: &[f64], x: &[f64]) -> f64 {
    let nf = n as f64;
    let y2: f64 = x.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (delta * delta);
    // ∫_{ℝⁿ}(1+|y|²)^{−n} dy = |S^{n−1}|·B(n/2, n/2)/2.
    let half = crate::bubbles::gamma_half(n);
    let beta = half * half / crate::bubbles::gamma_half(2 * n);
    let norm = sphere_area(n) * beta / 2.0;
    (1.0 + y2).powf(-nf) / (norm * delta.powf(nf))
}

/// Stratified two-component mixture estimator of `∫ f` where the components
/// are bubble densities. Half the samples come from each component and every
/// sample is weighted by the mixture density.
fn mixture_mc(
    n: usize,
    comps: [(f64, &[f64]); 2],
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    mc: &McOptions,
) -> Result<McEstimate> {
    if mc.samples < 4 || mc.chunk == 0 {
        return Err(invalid("Monte Carlo needs at least four samples and a positive chunk size"));
    }
    let beta = Beta::new(n as f64 / 2.0, n as f64 / 2.0).map_err(|e| invalid(e.to_string()))?;
    let per = mc.samples / 2;
    let chunks = per.div_ceil(mc.chunk);
    // Each chunk returns (Σw, Σw²) per stratum.
    let parts = mc.exec.map_range(2 * chunks, |job| {
        let (stratum, c) = (job / chunks, job % chunks);
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(job as u64 + 1);
        let count = mc.chunk.min(per - c * mc.chunk);
        let mut x = vec![0.0; n];
        let (mut s1, mut s2) = (0.0, 0.0);
        let (d, xi) = comps[stratum];
        for _ in 0..count {
            sample_bubble(d, xi, &beta, &mut rng, &mut x);
            let g = 0.5 * bubble_density(n, comps[0].0, comps[0].1, &x) + 0.5 * bubble_density(n, comps[1].0, comps[1].1, &x);
            let w = if g > 0.0 { f(&x) / g } else { 0.0 };
            s1 += w;
            s2 += w * w;
        }
        (stratum, s1, s2)
    });
    let mut sums = [(0.0, 0.0); 2];
    for (k, a, b) in parts {
        sums[k].0 += a;
        sums[k].1 += b;
    }
    let nper = per as f64;
    let mut value = 0.0;
    let mut var = 0.0;
    for (a, b) in sums {
        let mean = a / nper;
        let v = (b / nper - mean * mean).max(0.0) / nper;
        value += 0.5 * mean;
        var += 0.25 * v;
    }
    let est = McEstimate { value, stderr: var.sqrt() };
    if !(est.stderr <= mc.max_rel_stderr * est.value.abs()) {
        return Err(Error::NotConverged(format!(
            "Monte Carlo standard error {:.3e} exceeds {} of the value {:.3e}",
            est.stderr, mc.max_rel_stderr, est.value
        )));
    }
    Ok(est)
}

/// `∫_Ω U_{δ,ξ}^s`.
pub fn bubble_lp_norm(b: &BubbleParams, region: Region<'_>, s: f64) -> Result<f64> {
    Ok(bubble_power_integral(b, region, s, &McOptions::default())?.value)
}

/// [`bubble_lp_norm`] with an error estimate and explicit Monte Carlo settings.
pub fn bubble_power_integral(b: &BubbleParams, region: Region<'_>, s: f64, mc: &McOptions) -> Result<McEstimate> {
    if !(s > 0.0) {
        return Err(invalid(format!("power must be positive, got {s}")));
    }
    let n = b.n();
    if let Region::Domain(d) = region {
        if d.n() != n {
            return Err(Error::DimensionMismatch { expected: d.n(), got: n });
        }
    }
    if let Some(extent) = region.radial_extent(b.xi()) {
        if extent.is_infinite() && s <= n as f64 / (n as f64 - 2.0) {
            return Err(invalid(format!("∫U^s diverges on the whole space for s = {s}")));
        }
        let e = radial_integral(n, |r| b.profile(r * r).powf(s), extent, &[b.delta()])?;
        return Ok(McEstimate { value: e.value, stderr: e.error });
    }
    let f = |x: &[f64]| if region.contains(x) { b.value(x).powf(s) } else { 0.0 };
    mixture_mc(n, [(b.delta(), b.xi()), (b.delta(), b.xi())], &f, mc)
}

/// Scaling law of `∫_Ω U_δ^s` as `δ → 0`: exponent and power of `|log δ|`.
pub fn lp_scaling_law(n: usize, s: f64) -> (f64, f64) {
    let nf = n as f64;
    let crit = nf / (nf - 2.0);
    if (s - crit).abs() < 1e-12 {
        (nf / 2.0, 1.0)
    } else if s < crit {
        ((nf - 2.0) / 2.0 * s, 0.0)
    } else {
        (nf - (nf - 2.0) / 2.0 * s, 0.0)
    }
}

/// `∫ Uᵢ^s Uⱼ^t` with `s + t = 2n/(n−2)`.
pub fn cross_integral(bi: &BubbleParams, bj: &BubbleParams, s: f64, t: f64, region: Region<'_>, mc: &McOptions) -> Result<McEstimate> {
    let n = bi.n();
    if bj.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bj.n() });
    }
    let total = 2.0 * n as f64 / (n as f64 - 2.0);
    if s < 0.0 || t < 0.0 || (s + t - total).abs() > 1e-9 {
        return Err(invalid(format!("powers must be non-negative with s + t = {total}, got {s} + {t}")));
    }
    let same_center = bi.xi().iter().zip(bj.xi()).all(|(a, b)| a == b);
    if same_center {
        if let Some(extent) = region.radial_extent(bi.xi()) {
            let e = radial_integral(
                n,
                |r| bi.profile(r * r).powf(s) * bj.profile(r * r).powf(t),
                extent,
                &[bi.delta(), bj.delta()],
            )?;
            return Ok(McEstimate { value: e.value, stderr: e.error });
        }
    }
    let f = |x: &[f64]| if region.contains(x) { bi.value(x).powf(s) * bj.value(x).powf(t) } else { 0.0 };
    mixture_mc(n, [(bi.delta(), bi.xi()), (bj.delta(), bj.xi())], &f, mc)
}

/// `∫_Ω |x−z|^{2−n} (δ/(δ²+|z−ξ|²))^{α/2} dz` for a ball centered at `ξ`
/// (or the whole space when `α > 2`), by Newton's theorem for radial densities.
pub fn riesz_potential_profile(n: usize, alpha: f64, delta: f64, xi: &[f64], x: &[f64], region: Region<'_>) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("α must be positive, got {alpha}")));
    }
    if xi.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: xi.len().min(x.len()) });
    }
    let extent = region
        .radial_extent(xi)
        .ok_or_else(|| Error::Unsupported("Riesz potentials need a ball centered at ξ or the whole space".into()))?;
    if extent.is_infinite() && alpha <= 2.0 {
        return Err(invalid("the whole-space potential diverges for α ≤ 2"));
    }
    let nf = n as f64;
    let rho = |s: f64| (delta / (delta * delta + s * s)).powf(alpha / 2.0);
    let r: f64 = x.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let opts = quad_opts();
    let seg = |a: f64, b: f64, g: &dyn Fn(f64) -> f64| -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        let mut pts = vec![a];
        pts.extend(log_breaks(delta * 1e-3, 1e3 * delta.max(1.0)).into_iter().filter(|v| *v > a && *v < b));
        pts.push(delta.clamp(a, b));
        pts.push(b);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut acc = 0.0;
        for w in pts.windows(2) {
            acc += integrate(g, w[0], w[1], opts).map_err(quad_err)?.value;
        }
        Ok(acc)
    };
    let inner = seg(0.0, r.min(extent), &|s| rho(s) * s.powf(nf - 1.0))?;
    let outer = if extent.is_infinite() {
        crate::quadrature::integrate_tail(|s| rho(s) * s, r, delta.max(r), opts).map_err(quad_err)?.value
    } else {
        seg(r, extent, &|s| rho(s) * s)?
    };
    let near = if r > 0.0 { r.powf(2.0 - nf) * inner } else { 0.0 };
    Ok(sphere_area(n) * (near + outer))
}

/// Empirical constant of the two-bubble interaction: least-squares fit of
/// `∫[(Uᵢ+Uⱼ)^p − Uᵢ^p − Uⱼ^p] Zⱼ⁰` against `q^{n/(n−2)}(q^{−2/(n−2)} − 2δⱼ/δᵢ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionFit {
    pub constant: f64,
    /// Relative root-mean-square misfit.
    pub misfit: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_interaction_constant(n: usize, configs: &[(BubbleParams, BubbleParams)], mc: &McOptions) -> Result<InteractionFit> {
    if configs.is_empty() {
        return Err(invalid("no configurations to fit"));
    }
    let p = critical_exponent(n);
    let nf = n as f64;
    let mut points = Vec::with_capacity(configs.len());
    for (bi, bj) in configs {
        let q = super::pair_quantities(bi, bj)?.q;
        let model = q.powf(nf / (nf - 2.0)) * (q.powf(-2.0 / (nf - 2.0)) - 2.0 * bj.delta() / bi.delta());
        let f = |x: &[f64]| {
            let (ui, uj) = (bi.value(x), bj.value(x));
            ((ui + uj).powf(p) - ui.powf(p) - uj.powf(p)) * bj.derivative(crate::bubbles::DerivativeIndex::DILATION, x)
        };
        let relaxed = McOptions { max_rel_stderr: f64::INFINITY, ..*mc };
        let m = mixture_mc(n, [(bi.delta(), bi.xi()), (bj.delta(), bj.xi())], &f, &relaxed)?;
        points.push((model, m.value));
    }
    let num: f64 = points.iter().map(|(f, m)| f * m).sum();
    let den: f64 = points.iter().map(|(f, _)| f * f).sum();
    let constant = num / den;
    let scale: f64 = points.iter().map(|(_, m)| m * m).sum::<f64>().sqrt();
    let misfit = points.iter().map(|(f, m)| (m - constant * f).powi(2)).sum::<f64>().sqrt() / scale;
    Ok(InteractionFit { constant, misfit, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::fit_power_law;

    #[test]
    fn critical_norm_is_scale_invariant_and_matches_mc() {
        let n = 5;
        let p1 = 2.0 * n as f64 / (n as f64 - 2.0);
        let whole = bubble_lp_norm(&BubbleParams::centered(n, 1.0).unwrap(), Region::WholeSpace, p1).unwrap();
        let small = bubble_lp_norm(&BubbleParams::centered(n, 0.01).unwrap(), Region::WholeSpace, p1).unwrap();
        assert!((whole / small - 1.0).abs() < 1e-9);
        let b = BubbleParams::centered(n, 0.3).unwrap();
        let o = BubbleParams::new(n, 0.5, vec![0.2, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let mc = McOptions { samples: 200_000, ..Default::default() };
        let est = cross_integral(&b, &o, p1, 0.0, Region::WholeSpace, &mc).unwrap();
        assert!((est.value - whole).abs() <= 4.0 * est.stderr + 1e-3 * whole, "{est:?} vs {whole}");
    }

    #[test]
    fn lp_exponents_in_three_dimensions() {
        let ball = DomainModel::unit_ball(3).unwrap();
        let ds = [0.02, 0.01, 0.005, 0.0025];
        for (s, want) in [(1.0, 0.5), (3.0, 1.5)] {
            let (_, lp) = lp_scaling_law(3, s);
            let ys: Vec<f64> = ds.iter().map(|d| bubble_lp_norm(&BubbleParams::centered(3, *d).unwrap(), Region::Domain(&ball), s).unwrap()).collect();
            let fit = fit_power_law(&ds, &ys, lp).unwrap();
            assert!((fit.slope - want).abs() < 0.05, "s={s}: {}", fit.slope);
        }
    }

    #[test]
    fn riesz_small_power_scales_like_sqrt_delta() {
        let ball = DomainModel::unit_ball(3).unwrap();
        let ds = [0.01, 0.005, 0.0025, 0.00125];
        let ys: Vec<f64> = ds.iter().map(|d| riesz_potential_profile(3, 1.0, *d, &[0.0; 3], &[0.3, 0.0, 0.0], Region::Domain(&ball)).unwrap()).collect();
        let fit = fit_power_law(&ds, &ys, 0.0).unwrap();
        assert!((fit.slope - 0.5).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn mc_is_reproducible_across_policies() {
        let b = BubbleParams::centered(3, 0.2).unwrap();
        let o = BubbleParams::new(3, 0.1, vec![0.3, 0.0, 0.0]).unwrap();
        let seq = McOptions { samples: 20_000, chunk: 3000, exec: Execution::Sequential, ..Default::default() };
        let par = McOptions { exec: Execution::Parallel, ..seq };
        let a = cross_integral(&b, &o, 3.0, 3.0, Region::WholeSpace, &seq).unwrap();
        let c = cross_integral(&b, &o, 3.0, 3.0, Region::WholeSpace, &par).unwrap();
        assert_eq!(a, c);
    }
}
