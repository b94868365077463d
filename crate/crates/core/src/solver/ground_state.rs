//! Radial minimization of `Q_λ(u) = (∫|∇u|² − λu²) / ‖u‖²_{p+1}` on a ball.

use super::{gamma_with, OperatorSpec, ProjectionKind, Projector, Solver};
use crate::bubbles::{critical_exponent, sobolev_energy, BubbleParams};
use crate::domain::{DomainModel, Field, GridSpec, Mesh, Symmetry};
use crate::error::{invalid, Error, Result};
use crate::quadrature::kahan_sum;
use std::sync::Arc;

/// Relative gap below `S₀` that counts as attained.
pub const ATTAINED_GAP: f64 = 1e-4;
const FLOW_ITER: usize = 4000;
const NEWTON_ITER: usize = 50;
/// Half-mass radius (relative to the ball radius) below which the flow is
/// considered to be concentrating.
const CONCENTRATION_RADIUS: f64 = 2e-3;

/// Result of a ground-state computation.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub lambda: f64,
    /// Best value of `Q_λ` found (equals `S₀` up to discretization when not attained).
    pub s_lambda: f64,
    pub s0: f64,
    /// False when minimizing sequences concentrate ("not attained").
    pub attained: bool,
    /// Positive radial solution of `−Δu − λu = u^p` when attained.
    pub u0: Option<Field>,
    /// `Γ(u₀)` after the Newton polish.
    pub gamma: Option<f64>,
    /// Bubble width of the best trial function in the scan.
    pub best_delta: f64,
    /// Eigenvalue of smallest magnitude of the linearization
    /// `−Δ − λ − p u₀^{p−1}` within the grid's symmetry class. A diagnostic
    /// for non-degeneracy, not a certificate.
    pub linearized_gap: Option<f64>,
}

impl GroundState {
    pub fn below_threshold(&self) -> bool {
        self.s_lambda < self.s0 * (1.0 - ATTAINED_GAP)
    }
}

fn default_grid() -> GridSpec {
    GridSpec::Radial { cells: 2000, core: 1e-6, wall: 1e-3 }
}

struct Quotient<'a> {
    solver: &'a Solver,
    mass: &'a [f64],
    p: f64,
}

impl Quotient<'_> {
    fn norm_p1(&self, u: &[f64]) -> f64 {
        kahan_sum(u.iter().zip(self.mass).map(|(v, m)| v.abs().powf(self.p + 1.0) * m)).powf(1.0 / (self.p + 1.0))
    }

    fn value(&self, u: &[f64]) -> f64 {
        self.solver.inner(u, u) / self.norm_p1(u).powi(2)
    }
}

/// Radius containing half of `∫u^{p+1}` for a radial field.
fn half_mass_radius(mesh: &Mesh, u: &[f64], p: f64) -> f64 {
    let w: Vec<f64> = u.iter().zip(mesh.mass()).map(|(v, m)| v.abs().powf(p + 1.0) * m).collect();
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        acc += wi;
        if acc >= 0.5 * total {
            return mesh.node(i)[0];
        }
    }
    mesh.node(u.len() - 1)[0]
}

/// Ground state of `Q_λ` among radial functions on a ball.
///
/// A scan over projected bubbles supplies a starting point and an upper bound;
/// a preconditioned descent (`u ← (−Δ−λ)⁻¹u^p`, renormalized) lowers `Q_λ`
/// until it either converges or concentrates at the center. Converged states
/// are rescaled to solve the equation and polished by Newton's method.
pub fn solve_ground_state(domain: &DomainModel, lambda: f64, grid: Option<GridSpec>) -> Result<GroundState> {
    let n = domain.n();
    let radius = domain.ball_radius().ok_or_else(|| invalid("ground states are computed on balls"))?;
    if !(lambda > 0.0) {
        return Err(invalid(format!("λ must be positive, got {lambda}")));
    }
    let grid = grid.unwrap_or_else(default_grid);
    if grid.symmetry() != Symmetry::Radial {
        return Err(Error::Unsupported("ground states need a radial grid".into()));
    }
    let mesh = Mesh::build(domain, &grid)?;
    let solver = Solver::new(&mesh, OperatorSpec::shifted(lambda)?)?;
    let p = critical_exponent(n);
    let (s0, _) = sobolev_energy(n)?;
    let q = Quotient { solver: &solver, mass: mesh.mass(), p };

    let projector = Projector::new(&mesh, ProjectionKind::Pu2, lambda)?;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let steps = 48;
    for k in 0..=steps {
        let delta = radius * 2.0 * (1e-4f64 / 2.0).powf(k as f64 / steps as f64);
        let pu = projector.bubble(&BubbleParams::centered(n, delta)?)?;
        let val = q.value(pu.values());
        if best.as_ref().map_or(true, |b| val < b.0) {
            best = Some((val, delta, pu.into_values()));
        }
    }
    let (scan_value, best_delta, start) = best.expect("non-empty scan");
    let not_attained = |s: f64| GroundState {
        lambda,
        s_lambda: s,
        s0,
        attained: false,
        u0: None,
        gamma: None,
        best_delta,
        linearized_gap: None,
    };
    if scan_value >= s0 {
        return Ok(not_attained(scan_value));
    }

    // Descent.
    let mut u: Vec<f64> = {
        let s = q.norm_p1(&start);
        start.iter().map(|v| v / s).collect()
    };
    let mut value = q.value(&u);
    let mut converged = false;
    for _ in 0..FLOW_ITER {
        let load: Vec<f64> = u.iter().zip(mesh.mass()).map(|(v, m)| v.max(0.0).powf(p) * m).collect();
        let w = solver.solve_load(&load)?;
        let s = q.norm_p1(&w);
        u = w.iter().map(|v| v / s).collect();
        let next = q.value(&u);
        if half_mass_radius(&mesh, &u, p) < CONCENTRATION_RADIUS * radius {
            return Ok(not_attained(next));
        }
        let change = (value - next).abs() / next;
        value = next;
        if change < 1e-12 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged(format!("ground-state descent at λ = {lambda} after {FLOW_ITER} steps")));
    }

    // Rescale to a solution and polish.
    let ku = solver.apply(&u);
    let num = kahan_sum(u.iter().zip(&ku).map(|(a, b)| a * b));
    let den = kahan_sum(u.iter().zip(mesh.mass()).map(|(v, m)| v.powf(p + 1.0) * m));
    let c = (num / den).powf(1.0 / (p - 1.0));
    let mut u: Vec<f64> = u.iter().map(|v| c * v).collect();
    newton_polish(&mesh, &solver, lambda, p, &mut u)?;
    let field = Field::new(mesh.clone(), u)?;
    if field.min() <= 0.0 {
        return Err(Error::Postcondition("ground state is not positive".into()));
    }
    let gamma = gamma_with(&solver, &field)?.gamma;
    let s_lambda = q.value(field.values());
    let gap = linearized_gap(&mesh, lambda, p, field.values())?;
    Ok(GroundState { lambda, s_lambda, s0, attained: true, u0: Some(field), gamma: Some(gamma), best_delta, linearized_gap: Some(gap) })
}

/// Inverse iteration on `J v = μ M v` with `J` the Newton matrix at `u`;
/// returns the Rayleigh quotient of the dominant mode of `J⁻¹M`.
fn linearized_gap(mesh: &Arc<Mesh>, lambda: f64, p: f64, u: &[f64]) -> Result<f64> {
    let mass = mesh.mass();
    let extra: Vec<f64> = u.iter().zip(mass).map(|(v, m)| -p * m * v.max(0.0).powf(p - 1.0)).collect();
    let jac = Solver::indefinite(mesh, lambda, &extra)?;
    let m_dot = |a: &[f64], b: &[f64]| kahan_sum(a.iter().zip(b).zip(mass).map(|((x, y), m)| x * y * m));
    let mut v: Vec<f64> = (0..u.len()).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let mut mu = f64::NAN;
    for _ in 0..200 {
        let load: Vec<f64> = v.iter().zip(mass).map(|(x, m)| x * m).collect();
        let w = jac.solve_load(&load)?;
        let norm = m_dot(&w, &w).sqrt();
        v = w.iter().map(|x| x / norm).collect();
        let next = m_dot(&v, &jac.apply(&v).iter().zip(mass).map(|(a, m)| a / m).collect::<Vec<_>>());
        if (next - mu).abs() <= 1e-10 * next.abs() {
            return Ok(next);
        }
        mu = next;
    }
    Ok(mu)
}

fn newton_polish(mesh: &Arc<Mesh>, solver: &Solver, lambda: f64, p: f64, u: &mut [f64]) -> Result<()> {
    let residual = |u: &[f64]| -> Vec<f64> {
        let ku = solver.apply(u);
        ku.iter().zip(u).zip(mesh.mass()).map(|((k, v), m)| k - m * v.max(0.0).powf(p)).collect()
    };
    let size = solver.inner(u, u).sqrt();
    let mut r = residual(u);
    let mut norm = solver.dual_norm_sq(&r)?.max(0.0).sqrt();
    for _ in 0..NEWTON_ITER {
        if norm <= 1e-11 * size {
            return Ok(());
        }
        let extra: Vec<f64> = u.iter().zip(mesh.mass()).map(|(v, m)| -p * m * v.max(0.0).powf(p - 1.0)).collect();
        let jac = Solver::indefinite(mesh, lambda, &extra)?;
        let step = jac.solve_load(&r)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let rt = residual(&trial);
            let nt = solver.dual_norm_sq(&rt)?.max(0.0).sqrt();
            if nt < norm || t < 1e-4 {
                u.copy_from_slice(&trial);
                r = rt;
                norm = nt;
                break;
            }
            t *= 0.5;
        }
    }
    if norm <= 1e-8 * size {
        Ok(())
    } else {
        Err(Error::NotConverged(format!("Newton polish stalled with residual {norm:.3e}")))
    }
}

/// Bracket of the threshold `λ_*/λ₁` separating "not attained" from
/// "attained", found by bisection on the classification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdBracket {
    pub lower: f64,
    pub upper: f64,
}

impl ThresholdBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Bisection for `λ_*/λ₁` on `[lower, upper]` (fractions of `lambda1`).
pub fn find_threshold(domain: &DomainModel, lambda1: f64, lower: f64, upper: f64, width: f64) -> Result<ThresholdBracket> {
    let below = |frac: f64| -> Result<bool> { Ok(solve_ground_state(domain, frac * lambda1, None)?.below_threshold()) };
    if below(lower)? || !below(upper)? {
        return Err(Error::Solver(format!("threshold is not bracketed by [{lower}, {upper}]")));
    }
    let (mut lo, mut hi) = (lower, upper);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdBracket { lower: lo, upper: hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn three_dimensional_regimes() {
        let ball = DomainModel::unit_ball(3).unwrap();
        let high = solve_ground_state(&ball, 0.9 * PI * PI, None).unwrap();
        assert!(high.attained && high.below_threshold());
        let u0 = high.u0.as_ref().unwrap();
        assert!(u0.min() > 0.0);
        assert!(high.gamma.unwrap() < 1e-8 * u0.max_abs());
        let gap = high.linearized_gap.unwrap();
        assert!(gap.abs() > 1e-2, "{gap}");
        let low = solve_ground_state(&ball, 0.1 * PI * PI, None).unwrap();
        assert!(!low.attained);
        assert!((low.s_lambda / low.s0 - 1.0).abs() < 1e-3);
    }
}
