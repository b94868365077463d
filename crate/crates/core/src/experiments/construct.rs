//! The two families of near-optimal examples: an orthogonal perturbation of
//! a bubble configuration, and the solution of the remainder equation with
//! Lagrange multipliers along the `PZ` directions.

use crate::bubbles::{critical_exponent, BubbleParams};
use crate::domain::{Field, Mesh, Symmetry};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::fit::{fit, orthogonalize, self_interaction_field, FitContext, FitOptions, Projected};
use crate::interaction::Prediction;
use crate::quadrature::kahan_sum;
use crate::solver::{ProjectionKind, Solver};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// One constructed example and its measured quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub regime: String,
    pub n: usize,
    pub kind: ProjectionKind,
    pub lambda: f64,
    pub deltas: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    /// Smallest distance from a center to the boundary.
    pub dist_boundary: f64,
    /// Largest `δᵢ / d(ξᵢ, ∂Ω)`.
    pub kappa: f64,
    /// Perturbation size of the orthogonal-perturbation example.
    pub epsilon: Option<f64>,
    /// `Γ` of the constructed function.
    pub gamma: f64,
    /// Fitted distance to the configuration manifold.
    pub distance: f64,
    /// Norm of the negative part removed before measuring.
    pub negative_part_norm: f64,
    /// Norm of the constructed remainder.
    pub rho_norm: f64,
    /// Multipliers along `PZ`, in `(bubble, derivative)` order.
    pub multipliers: Vec<f64>,
    /// Largest orthogonality residual of the constructed remainder.
    pub ortho_max: f64,
    pub prediction: Option<Prediction>,
    /// Measured `∫(I₁+I₃)PZ⁰` of the first bubble.
    pub measured_dilation: Option<f64>,
    /// Measured `∫(I₁+I₃)PZᵏ`, `k ≥ 1`, of the first bubble.
    pub measured_translation: Option<Vec<f64>>,
    pub seed: u64,
}

impl ExperimentRecord {
    pub fn nu(&self) -> usize {
        self.deltas.len()
    }

    pub(crate) fn bare(regime: &str, ctx: &FitContext, bubbles: &[BubbleParams], seed: u64) -> Result<Self> {
        let dom = ctx.mesh().domain();
        let mut dist = f64::INFINITY;
        let mut kappa = 0.0f64;
        for b in bubbles {
            let d = dom.distance_to_boundary(b.xi())?;
            dist = dist.min(d);
            kappa = kappa.max(b.delta() / d);
        }
        Ok(ExperimentRecord {
            regime: regime.to_string(),
            n: ctx.mesh().n(),
            kind: ctx.kind(),
            lambda: ctx.lambda(),
            deltas: bubbles.iter().map(|b| b.delta()).collect(),
            centers: bubbles.iter().map(|b| b.xi().to_vec()).collect(),
            dist_boundary: dist,
            kappa,
            epsilon: None,
            gamma: f64::NAN,
            distance: f64::NAN,
            negative_part_norm: 0.0,
            rho_norm: 0.0,
            multipliers: Vec::new(),
            ortho_max: 0.0,
            prediction: None,
            measured_dilation: None,
            measured_translation: None,
            seed,
        })
    }
}

/// Controls shared by the constructions.
#[derive(Clone, Copy, Debug)]
pub struct ExperimentOptions {
    pub fit: FitOptions,
    /// Relative dual-norm target of the Newton residual.
    pub newton_tolerance: f64,
    pub max_newton: usize,
    /// Step halvings allowed per Newton iteration.
    pub max_halvings: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            fit: FitOptions::default(),
            newton_tolerance: 1e-10,
            max_newton: 40,
            max_halvings: 10,
            seed: 7,
            exec: Execution::default(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    kahan_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

fn power(v: f64, p: f64) -> f64 {
    v.abs().powf(p - 1.0) * v
}

/// Weak residual `M·g(u) − K u` of the semilinear equation, measured
/// against the discrete background: the background's own discrete
/// residual is removed so that `u = u₀` gives exactly zero.
fn residual_load(ctx: &FitContext, u: &[f64], u0: Option<&Field>) -> Vec<f64> {
    let mesh = ctx.mesh();
    let p = critical_exponent(mesh.n());
    let ku = ctx.norm_solver().apply(u);
    let mut r: Vec<f64> = u.iter().zip(&ku).zip(mesh.mass()).map(|((v, k), m)| m * power(v.max(0.0), p) - k).collect();
    if let Some(z) = u0 {
        let kz = ctx.norm_solver().apply(z.values());
        for ((ri, (zi, k)), m) in r.iter_mut().zip(z.values().iter().zip(&kz)).zip(mesh.mass()) {
            *ri -= m * power(zi.max(0.0), p) - k;
        }
    }
    r
}

/// `Γ(u)` against the discrete background.
pub fn measured_gamma(ctx: &FitContext, u: &Field, u0: Option<&Field>) -> Result<f64> {
    let load = residual_load(ctx, u.values(), u0);
    Ok(ctx.norm_solver().dual_norm_sq(&load)?.max(0.0).sqrt())
}

/// Perturbation size for the orthogonal-perturbation example, chosen to
/// match the interaction error of the configuration. `kappa` is the
/// boundary ratio `δ/d(ξ,∂Ω)`, which adds `κ^{n−2}` near the boundary.
pub fn case1_epsilon(n: usize, nu: usize, u0_positive: bool, delta: f64, kappa: Option<f64>) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("scale must lie in (0, 1), got {delta}")));
    }
    let base = match (n, u0_positive) {
        (3, false) => delta,
        (4, false) => delta * delta * delta.ln().abs(),
        (3..=5, true) => delta.powf((n as f64 - 2.0) / 2.0),
        (n, _) if n >= 7 && nu == 1 => delta * delta,
        _ => {
            return Err(Error::Regime(format!(
                "the orthogonal-perturbation example gives a linear rate only for n = 3, 4, n = 5 with u₀ > 0, or n ≥ 7 with one bubble (n = {n}, ν = {nu})"
            )))
        }
    };
    Ok(match kappa {
        Some(k) => base + k.powi(n as i32 - 2),
        None => base,
    })
}

/// `∫(I₁+I₃)PZᵏ` of bubble `b` for every derivative the mesh admits:
/// returns the dilation pairing and the translation pairings.
pub fn projection_pairings(
    kind: ProjectionKind,
    lambda: f64,
    b: &BubbleParams,
    pu: &Field,
    pz: &[Field],
    u0: Option<&Field>,
) -> Result<(f64, Vec<f64>)> {
    let p = critical_exponent(b.n());
    let mut src = self_interaction_field(kind, lambda, b, pu);
    if let Some(z) = u0 {
        let i1: Vec<f64> =
            z.values().iter().zip(pu.values()).map(|(a, s)| power(a + s, p) - power(*a, p) - power(*s, p)).collect();
        src = src.add(&Field::new(pu.mesh().clone(), i1)?)?;
    }
    let pairs = pz.iter().map(|z| src.l2_dot(z)).collect::<Result<Vec<_>>>()?;
    let (first, rest) = pairs.split_first().ok_or_else(|| invalid("no derivative fields"))?;
    Ok((*first, rest.to_vec()))
}

/// Largest `|⟨ρ, PZ⟩|/(‖ρ‖‖PZ‖)` over the given directions.
fn ortho_ratio(ctx: &FitContext, rho: &Field, dirs: &[&Field]) -> f64 {
    let rn = ctx.norm_of(rho);
    if rn == 0.0 {
        return 0.0;
    }
    dirs.iter().map(|z| ctx.inner(rho, z).abs() / (rn * ctx.norm_of(z))).fold(0.0, f64::max)
}

fn distance_of(ctx: &FitContext, u: &Field, u0: Option<&Field>, bubbles: &[BubbleParams], opts: &ExperimentOptions) -> Result<f64> {
    let st = fit(ctx, u, u0, bubbles, opts.fit)?;
    if !st.converged {
        return Err(Error::NotConverged(format!("distance fit stopped with orthogonality residual {:.2e}", st.ortho_max())));
    }
    Ok(st.distance)
}

/// Orthogonal-perturbation example: `u = u₀ + σ + ε·φ`, where
/// `φ = σ + Σβ PZ` is orthogonal to every `PZ`. `φ` is not normalized, so
/// `‖u − u₀ − σ‖ = ε‖φ‖ ≈ ε‖σ‖`.
/// Records `Γ(u)` and the fitted distance.
pub fn build_case1_example(
    ctx: &FitContext,
    u0: Option<&Field>,
    bubbles: &[BubbleParams],
    epsilon: f64,
    regime: &str,
    opts: &ExperimentOptions,
) -> Result<(Field, ExperimentRecord)> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("perturbation size must be finite and non-negative, got {epsilon}")));
    }
    let mut rec = ExperimentRecord::bare(regime, ctx, bubbles, opts.seed)?;
    let proj = Projected::compute(ctx, bubbles, opts.exec)?;
    let mesh = ctx.mesh();
    let sigma = proj.sigma(mesh);
    let cols = proj.columns();
    let phi = orthogonalize(ctx, &sigma, &cols)?;
    let rho = phi.scale(epsilon);
    let mut u = sigma.add(&rho)?;
    if let Some(z) = u0 {
        u = u.add(z)?;
    }
    let neg = u.negative_part();
    rec.negative_part_norm = ctx.norm_of(&neg);
    let u = u.positive_part();
    rec.epsilon = Some(epsilon);
    rec.rho_norm = ctx.norm_of(&rho);
    rec.ortho_max = ortho_ratio(ctx, &rho, &cols);
    rec.gamma = measured_gamma(ctx, &u, u0)?;
    rec.distance = distance_of(ctx, &u, u0, bubbles, opts)?;
    if bubbles.len() == 1 {
        let (d, t) = projection_pairings(ctx.kind(), ctx.lambda(), &bubbles[0], &proj.pu[0], &proj.pz[0], u0)?;
        rec.measured_dilation = Some(d);
        rec.measured_translation = Some(t);
    }
    Ok((u, rec))
}

/// Remainder equation solution.
#[derive(Clone, Debug)]
pub struct ProjectedSolution {
    pub rho: Field,
    /// `u₀ + σ + ρ` before clipping.
    pub u_sharp: Field,
    pub multipliers: Vec<f64>,
    pub newton_iterations: usize,
    pub record: ExperimentRecord,
}

/// Solve for `(ρ, c)`:
/// `(−Δ−λ)(u₀+σ+ρ) − |u₀+σ+ρ|^{p−1}(u₀+σ+ρ) = Σ cⱼ(−Δ−λ)PZⱼ` with
/// `⟨ρ, PZⱼ⟩ = 0`, by damped Newton from `ρ = 0` on the bordered system.
/// Then measure `Γ` and the distance of `(u₀+σ+ρ)₊`.
pub fn solve_projected_problem(
    ctx: &FitContext,
    u0: Option<&Field>,
    bubbles: &[BubbleParams],
    regime: &str,
    opts: &ExperimentOptions,
) -> Result<ProjectedSolution> {
    let mesh: &Arc<Mesh> = ctx.mesh();
    if mesh.symmetry() == Symmetry::Full {
        return Err(Error::Unsupported("the remainder equation needs a radial or axisymmetric mesh".into()));
    }
    let mut rec = ExperimentRecord::bare(regime, ctx, bubbles, opts.seed)?;
    let n = mesh.n();
    let p = critical_exponent(n);
    let proj = Projected::compute(ctx, bubbles, opts.exec)?;
    let sigma = proj.sigma(mesh);
    let cols = proj.columns();
    let m = cols.len();
    let b: Vec<Vec<f64>> = cols.iter().map(|z| ctx.norm_solver().apply(z.values())).collect();
    let base: Vec<f64> = match u0 {
        Some(z) => sigma.add(z)?.into_values(),
        None => sigma.values().to_vec(),
    };
    let len = mesh.len();
    let scale = ctx.norm_of(&sigma);
    let solver = ctx.norm_solver();

    // F = K u − M g(u) − Σ c K·PZ, relative to the background.
    let eval = |rho: &[f64], c: &[f64]| -> Vec<f64> {
        let u: Vec<f64> = base.iter().zip(rho).map(|(a, r)| a + r).collect();
        let mut f: Vec<f64> = residual_load_signed(ctx, &u, u0, p);
        for (cj, bj) in c.iter().zip(&b) {
            for (fi, bi) in f.iter_mut().zip(bj) {
                *fi -= cj * bi;
            }
        }
        f
    };
    let merit = |f: &[f64], rho: &[f64]| -> Result<f64> {
        let fdual = solver.dual_norm_sq(f)?.max(0.0).sqrt();
        let g = b.iter().map(|bj| dot(bj, rho).powi(2)).sum::<f64>().sqrt();
        Ok(fdual + g / scale.max(f64::MIN_POSITIVE))
    };

    let mut rho = vec![0.0; len];
    let mut c = vec![0.0; m];
    let mut f = eval(&rho, &c);
    let mut current = merit(&f, &rho)?;
    let target = opts.newton_tolerance * scale;
    let mut iterations = 0;
    while current > target {
        if iterations >= opts.max_newton {
            return Err(Error::NotConverged(format!("Newton stopped at residual {:.3e} after {iterations} steps", current / scale)));
        }
        iterations += 1;
        let u: Vec<f64> = base.iter().zip(&rho).map(|(a, r)| a + r).collect();
        let extra: Vec<f64> = u.iter().zip(mesh.mass()).map(|(v, w)| -p * w * v.abs().powf(p - 1.0)).collect();
        let jac = Solver::indefinite(mesh, ctx.lambda(), &extra).map_err(|e| match e {
            Error::Solver(msg) => Error::Solver(format!("Newton matrix is singular (λ resonance?): {msg}")),
            other => other,
        })?;
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let y = jac.solve_load(&neg_f)?;
        let x = b.iter().map(|bj| jac.solve_load(bj)).collect::<Result<Vec<_>>>()?;
        let schur = DMatrix::from_fn(m, m, |i, j| dot(&b[i], &x[j]));
        let rhs = DVector::from_iterator(m, b.iter().map(|bi| -dot(bi, &rho) - dot(bi, &y)));
        let dc = schur.lu().solve(&rhs).ok_or_else(|| Error::Solver("bordered Newton system is singular".into()))?;
        let mut drho = y;
        for (j, xj) in x.iter().enumerate() {
            for (d, v) in drho.iter_mut().zip(xj) {
                *d += dc[j] * v;
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial_rho: Vec<f64> = rho.iter().zip(&drho).map(|(r, d)| r + t * d).collect();
            let trial_c: Vec<f64> = c.iter().zip(dc.iter()).map(|(a, d)| a + t * d).collect();
            let tf = eval(&trial_rho, &trial_c);
            let tm = merit(&tf, &trial_rho)?;
            if tm < current {
                rho = trial_rho;
                c = trial_c;
                f = tf;
                current = tm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if current <= 1e2 * target {
                // Converged to roundoff.
                break;
            }
            return Err(Error::NotConverged(format!("Newton step rejected after {} halvings at residual {:.3e}", opts.max_halvings, current / scale)));
        }
    }

    let rho = Field::new(mesh.clone(), rho)?;
    let u_sharp = Field::new(mesh.clone(), base.iter().zip(rho.values()).map(|(a, r)| a + r).collect())?;
    let u_star = u_sharp.positive_part();
    rec.negative_part_norm = ctx.norm_of(&u_sharp.negative_part());
    rec.rho_norm = ctx.norm_of(&rho);
    rec.multipliers = c.clone();
    rec.ortho_max = ortho_ratio(ctx, &rho, &cols);
    rec.gamma = measured_gamma(ctx, &u_star, u0)?;
    rec.distance = distance_of(ctx, &u_star, u0, bubbles, opts)?;
    if bubbles.len() == 1 {
        let (d, t) = projection_pairings(ctx.kind(), ctx.lambda(), &bubbles[0], &proj.pu[0], &proj.pz[0], u0)?;
        rec.measured_dilation = Some(d);
        rec.measured_translation = Some(t);
    }
    Ok(ProjectedSolution { rho, u_sharp, multipliers: c, newton_iterations: iterations, record: rec })
}

/// `K u − M g(u)` relative to the discrete background (no clipping of `u`).
fn residual_load_signed(ctx: &FitContext, u: &[f64], u0: Option<&Field>, p: f64) -> Vec<f64> {
    let mesh = ctx.mesh();
    let ku = ctx.norm_solver().apply(u);
    let mut r: Vec<f64> = u.iter().zip(&ku).zip(mesh.mass()).map(|((v, k), w)| k - w * power(*v, p)).collect();
    if let Some(z) = u0 {
        let kz = ctx.norm_solver().apply(z.values());
        for ((ri, (zi, k)), w) in r.iter_mut().zip(z.values().iter().zip(&kz)).zip(mesh.mass()) {
            *ri -= k - w * power(*zi, p);
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DomainModel, GridSpec};
    use crate::solver::lambda1_ball;

    fn ctx(n: usize, kind: ProjectionKind, cells: usize) -> FitContext {
        let mesh = Mesh::build(&DomainModel::unit_ball(n).unwrap(), &GridSpec::radial(cells)).unwrap();
        FitContext::new(&mesh, kind, 0.5 * lambda1_ball(n).unwrap()).unwrap()
    }

    #[test]
    fn zero_perturbation_sits_on_the_manifold() {
        let c = ctx(3, ProjectionKind::Pu2, 800);
        let b = BubbleParams::centered(3, 0.1).unwrap();
        let (_, rec) = build_case1_example(&c, None, &[b], 0.0, "t", &ExperimentOptions::default()).unwrap();
        assert!(rec.distance <= 1e-6, "{}", rec.distance);
        assert_eq!(rec.rho_norm, 0.0);
    }

    #[test]
    fn perturbation_sets_distance_and_residual() {
        let c = ctx(3, ProjectionKind::Pu2, 800);
        let b = BubbleParams::centered(3, 0.05).unwrap();
        let eps = case1_epsilon(3, 1, false, 0.05, None).unwrap();
        let (_, rec) = build_case1_example(&c, None, std::slice::from_ref(&b), eps, "t", &ExperimentOptions::default()).unwrap();
        assert!(rec.ortho_max < 1e-9);
        assert!((rec.distance / rec.rho_norm - 1.0).abs() < 0.2, "{rec:?}");
        assert!((rec.rho_norm / (eps * c.norm_of(&c.projector().bubble(&b).unwrap())) - 1.0).abs() < 0.05);
        assert!(rec.gamma > 0.0 && rec.gamma.is_finite());
    }

    #[test]
    fn remainder_equation_is_solved_with_orthogonality() {
        let c = ctx(5, ProjectionKind::Pu1, 800);
        let b = BubbleParams::centered(5, 0.05).unwrap();
        let sol = solve_projected_problem(&c, None, &[b], "t", &ExperimentOptions::default()).unwrap();
        assert!(sol.record.ortho_max < 1e-6, "{}", sol.record.ortho_max);
        assert_eq!(sol.multipliers.len(), 1);
        assert!(sol.record.gamma > 0.0);
        assert!(sol.record.distance > 0.0);
    }

    #[test]
    fn epsilon_rules() {
        assert_eq!(case1_epsilon(3, 1, false, 0.1, None).unwrap(), 0.1);
        assert!((case1_epsilon(5, 1, true, 0.04, None).unwrap() - 0.008).abs() < 1e-15);
        assert!(matches!(case1_epsilon(5, 1, false, 0.1, None), Err(Error::Regime(_))));
        assert!(matches!(case1_epsilon(7, 2, false, 0.1, None), Err(Error::Regime(_))));
        assert!((case1_epsilon(3, 1, false, 0.1, Some(0.5)).unwrap() - 0.6).abs() < 1e-15);
    }
}
