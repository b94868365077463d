//! δ sweeps: exponent fits of the distance against `Γ`, and projection
//! comparisons along a boundary-approach schedule.

use super::construct::{build_case1_example, case1_epsilon, projection_pairings, solve_projected_problem, ExperimentOptions, ExperimentRecord};
use super::zeta::{BoundaryRegime, ZetaRegime};
use crate::bubbles::BubbleParams;
use crate::domain::{robin_laplace, robin_laplace_gradient, DomainKind, DomainModel, Field, GridSpec, Mesh};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::fit::{FitContext, Projected};
use crate::interaction::{projection_prediction, structural_constants, Prediction, PredictionInput, StructuralConstants};
use crate::scaling::{fit_power_law, SlopeFit};
use crate::solver::{robin_function, ProjectionKind, RobinVariant};
use std::io::Write;

/// Result of an exponent sweep.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub regime: ZetaRegime,
    pub records: Vec<ExperimentRecord>,
    /// Scales whose construction failed, with the reason.
    pub failures: Vec<(f64, String)>,
    /// Fit of `log d = a·log Γ + b` with the regime's log power removed.
    pub fit: SlopeFit,
}

impl SweepReport {
    /// True when the fitted exponent lies within `tol` of the reference.
    /// The leave-one-out band is reported separately.
    pub fn matches_reference(&self, tol: f64) -> bool {
        let a = self.regime.exponent;
        (self.fit.slope - a).abs() <= tol
    }
}

/// Robin function matching a projection kind, with its gradient.
pub fn robin_with_gradient(domain: &DomainModel, x: &[f64], kind: ProjectionKind, lambda: f64) -> Result<(f64, Vec<f64>)> {
    let n = domain.n();
    let unit_ball = matches!(domain.kind(), DomainKind::Ball { radius } if *radius == 1.0);
    if kind == ProjectionKind::Pu1 && unit_ball {
        return Ok((robin_laplace(n, x), robin_laplace_gradient(n, x)));
    }
    let variant = match kind {
        ProjectionKind::Pu1 => RobinVariant::Laplace,
        ProjectionKind::Pu2 => RobinVariant::Helmholtz(lambda),
    };
    let phi = robin_function(domain, x, variant)?;
    let d = domain.distance_to_boundary(x)?;
    let mut grad = vec![0.0; n];
    match domain.kind() {
        DomainKind::Ball { .. } => {
            // Radial symmetry: differentiate along |x| only.
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > 1e-12 {
                let h = (0.05 * d).min(0.5 * r);
                let at = |s: f64| -> Vec<f64> { x.iter().map(|v| v * s / r).collect() };
                let dphi = (robin_function(domain, &at(r + h), variant)? - robin_function(domain, &at(r - h), variant)?) / (2.0 * h);
                for (g, v) in grad.iter_mut().zip(x) {
                    *g = dphi * v / r;
                }
            }
        }
        DomainKind::Box { .. } => {
            let h = 0.05 * d;
            for k in 0..n {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[k] += h;
                b[k] -= h;
                grad[k] = (robin_function(domain, &a, variant)? - robin_function(domain, &b, variant)?) / (2.0 * h);
            }
        }
    }
    Ok((phi, grad))
}

/// Leading-order prediction for a single bubble, or `None` where the
/// expansion is refused.
fn predict(
    domain: &DomainModel,
    b: &BubbleParams,
    kind: ProjectionKind,
    lambda: f64,
    u0_at_center: Option<f64>,
    constants: &StructuralConstants,
) -> Result<Option<Prediction>> {
    let (phi, grad_phi) = robin_with_gradient(domain, b.xi(), kind, lambda)?;
    let inp = PredictionInput { n: b.n(), kind, lambda, delta: b.delta(), nu: 1, u0_at_center, phi, grad_phi };
    match projection_prediction(&inp, constants) {
        Ok(p) => Ok(Some(p)),
        Err(Error::Regime(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Sweep the bubble scale at the domain center and fit the distance
/// against `Γ`. Uses the remainder-equation example for `n = 5`, `u₀ = 0`
/// and the orthogonal-perturbation example otherwise.
pub fn exponent_sweep(
    ctx: &FitContext,
    u0: Option<&Field>,
    regime: &ZetaRegime,
    deltas: &[f64],
    opts: &ExperimentOptions,
) -> Result<SweepReport> {
    let inp = regime.inputs;
    let mesh = ctx.mesh();
    if inp.n != mesh.n() {
        return Err(Error::DimensionMismatch { expected: mesh.n(), got: inp.n });
    }
    if inp.kind != ctx.kind() {
        return Err(invalid(format!("regime uses {} but the context projects with {}", inp.kind, ctx.kind())));
    }
    if inp.u0_positive != u0.is_some() {
        return Err(invalid("the background must be supplied exactly when the regime has u₀ > 0"));
    }
    if inp.boundary != BoundaryRegime::Interior || inp.nu != 1 {
        return Err(Error::Unsupported(format!("{}: exponent sweeps cover single interior bubbles; use the boundary sweep", regime.label())));
    }
    let projected = inp.n == 5 && !inp.u0_positive;
    if !projected && (inp.n == 6 || inp.n >= 7 && inp.nu > 1) {
        return Err(Error::Unsupported(format!("{}: not reproducible at desk scale", regime.label())));
    }
    if deltas.len() < 3 {
        return Err(invalid("an exponent sweep needs at least three scales"));
    }
    let domain = mesh.domain().clone();
    let center = domain.center();
    let constants = structural_constants(inp.n)?;
    let label = regime.label();
    let inner = ExperimentOptions { exec: Execution::Sequential, fit: crate::fit::FitOptions { exec: Execution::Sequential, ..opts.fit }, ..*opts };
    let results = opts.exec.map(deltas, |&delta| -> Result<ExperimentRecord> {
        let b = BubbleParams::new(inp.n, delta, center.clone())?;
        let mut rec = if projected {
            solve_projected_problem(ctx, u0, std::slice::from_ref(&b), &label, &inner)?.record
        } else {
            let eps = case1_epsilon(inp.n, inp.nu, inp.u0_positive, delta, None)?;
            build_case1_example(ctx, u0, std::slice::from_ref(&b), eps, &label, &inner)?.1
        };
        let u0c = match u0 {
            Some(z) => Some(z.value_at(&center)?),
            None => None,
        };
        rec.prediction = predict(&domain, &b, inp.kind, ctx.lambda(), u0c, &constants)?;
        Ok(rec)
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (d, r) in deltas.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e @ (Error::Regime(_) | Error::Unsupported(_) | Error::InvalidParameter(_))) => return Err(e),
            Err(e) => failures.push((*d, e.to_string())),
        }
    }
    if records.len() < 3 {
        return Err(Error::NotConverged(format!("only {} of {} sweep points converged: {failures:?}", records.len(), deltas.len())));
    }
    let gammas: Vec<f64> = records.iter().map(|r| r.gamma).collect();
    let dists: Vec<f64> = records.iter().map(|r| r.distance).collect();
    let fit = fit_power_law(&gammas, &dists, regime.log_power)?;
    Ok(SweepReport { regime: *regime, records, failures, fit })
}

/// Mesh resolution for boundary-sweep points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryGrid {
    pub radial_cells: usize,
    pub angular_cells: usize,
}

impl Default for BoundaryGrid {
    fn default() -> Self {
        BoundaryGrid { radial_cells: 400, angular_cells: 160 }
    }
}

/// Scales paired with boundary distances `d = coef·δ^power`.
pub fn boundary_schedule(deltas: &[f64], coef: f64, power: f64) -> Vec<(f64, f64)> {
    deltas.iter().map(|&d| (d, coef * d.powf(power))).collect()
}

/// Single bubble at `ξ = (R − d, 0, …)` on a ball: measured
/// `∫I₃PZᵏ` against the leading-order prediction at each schedule point.
/// With `with_distance`, also the orthogonal-perturbation example's `Γ` and
/// distance (perturbation `ε = δ + κ^{n−2}` style sizes; `n = 3, 4` only).
pub fn boundary_sweep(
    domain: &DomainModel,
    kind: ProjectionKind,
    lambda: f64,
    schedule: &[(f64, f64)],
    grid: BoundaryGrid,
    with_distance: bool,
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentRecord>> {
    let DomainKind::Ball { radius } = *domain.kind() else {
        return Err(Error::Unsupported("boundary sweeps run on balls".into()));
    };
    let n = domain.n();
    let constants = structural_constants(n)?;
    let label = format!("n{n}-boundary-u0zero-{kind}");
    for &(delta, d) in schedule {
        if !(delta > 0.0 && d > 0.0 && d < radius) {
            return Err(invalid(format!("schedule point (δ = {delta}, d = {d}) is not inside the ball")));
        }
    }
    let inner = ExperimentOptions { exec: Execution::Sequential, fit: crate::fit::FitOptions { exec: Execution::Sequential, ..opts.fit }, ..*opts };
    let results = opts.exec.map(schedule, |&(delta, d)| -> Result<ExperimentRecord> {
        let mut xi = vec![0.0; n];
        xi[0] = radius - d;
        let b = BubbleParams::new(n, delta, xi.clone())?;
        let spec = GridSpec::axisymmetric_around(xi[0], delta, grid.radial_cells, grid.angular_cells);
        let mesh = Mesh::build(domain, &spec)?;
        let ctx = FitContext::new(&mesh, kind, lambda)?;
        let mut rec = if with_distance {
            let kappa = delta / d;
            let eps = case1_epsilon(n, 1, false, delta, Some(kappa))?;
            build_case1_example(&ctx, None, std::slice::from_ref(&b), eps, &label, &inner)?.1
        } else {
            let proj = Projected::compute(&ctx, std::slice::from_ref(&b), Execution::Sequential)?;
            let (dil, tr) = projection_pairings(kind, lambda, &b, &proj.pu[0], &proj.pz[0], None)?;
            let mut rec = ExperimentRecord::bare(&label, &ctx, std::slice::from_ref(&b), opts.seed)?;
            rec.measured_dilation = Some(dil);
            rec.measured_translation = Some(tr);
            rec
        };
        rec.prediction = predict(domain, &b, kind, lambda, None, &constants)?;
        Ok(rec)
    });
    results.into_iter().collect()
}

/// Radial position where the two leading dilation terms of the shifted
/// `n = 5` projection cancel at scale `δ`, by bisection along the x₁ axis.
pub fn balance_point(domain: &DomainModel, lambda: f64, delta: f64, tolerance: f64) -> Result<f64> {
    let DomainKind::Ball { radius } = *domain.kind() else {
        return Err(Error::Unsupported("balance search runs on balls".into()));
    };
    if domain.n() != 5 {
        return Err(Error::Regime(format!("the shifted balance is an n = 5 identity, got n = {}", domain.n())));
    }
    let c = structural_constants(5)?;
    let bbar = c.bbar5.ok_or_else(|| invalid("missing n = 5 constant"))?.value;
    let target = bbar * lambda / (c.c_n.value * delta);
    let gap = |s: f64| -> Result<f64> {
        let mut x = vec![0.0; 5];
        x[0] = s;
        Ok(robin_function(domain, &x, RobinVariant::Helmholtz(lambda))? - target)
    };
    // Keep the bubble well inside: κ ≤ 1/2.
    let (mut lo, mut hi) = (0.0, radius - 2.0 * delta);
    if hi <= 0.0 {
        return Err(invalid(format!("scale {delta} is too large for a balance search")));
    }
    let (glo, ghi) = (gap(lo)?, gap(hi)?);
    if glo >= 0.0 || ghi <= 0.0 {
        return Err(Error::Regime(format!(
            "no balance point for δ = {delta}: Robin gap is {glo:.3e} at the center and {ghi:.3e} at κ = 1/2"
        )));
    }
    while hi - lo > tolerance * radius {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.10e}"),
        _ => String::new(),
    }
}

/// `regime,n,nu,kind,delta,dist_boundary,kappa,gamma,distance,neg_part,pred_dil,meas_dil,pred_tr,meas_tr`.
/// Translation columns hold the x₁ component.
pub fn write_sweep_csv<W: Write>(mut w: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(w, "regime,n,nu,kind,delta,dist_boundary,kappa,gamma,distance,neg_part,pred_dil,meas_dil,pred_tr,meas_tr")?;
    for r in records {
        let pred_tr = r.prediction.as_ref().and_then(|p| p.translation.first().copied());
        let meas_tr = r.measured_translation.as_ref().and_then(|t| t.first().copied());
        writeln!(
            w,
            "{},{},{},{},{:.10e},{:.10e},{:.10e},{},{},{},{},{},{},{}",
            r.regime,
            r.n,
            r.nu(),
            r.kind,
            r.deltas[0],
            r.dist_boundary,
            r.kappa,
            cell(Some(r.gamma)),
            cell(Some(r.distance)),
            cell(Some(r.negative_part_norm)),
            cell(r.prediction.as_ref().map(|p| p.dilation)),
            cell(r.measured_dilation),
            cell(pred_tr),
            cell(meas_tr),
        )?;
    }
    Ok(())
}

/// Gnuplot script plotting a sweep CSV: distance against `Γ` on log axes
/// with the reference slope, and measured against predicted dilation terms.
pub fn plot_script(csv_name: &str, title: &str, reference_exponent: Option<f64>) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key left top\n");
    s.push_str("set logscale xy\n");
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str("set multiplot layout 1,2\n");
    s.push_str("set xlabel 'Gamma'\nset ylabel 'distance'\n");
    let mut plot = format!("plot '{csv_name}' using 8:9 skip 1 with linespoints title 'measured'");
    if let Some(a) = reference_exponent {
        s.push_str("stats '");
        s.push_str(csv_name);
        s.push_str("' using 8:9 skip 1 nooutput\n");
        s.push_str(&format!("c = STATS_max_y / STATS_max_x**{a}\n"));
        plot.push_str(&format!(", c*x**{a} with lines dashtype 2 title 'slope {a}'"));
    }
    s.push_str(&plot);
    s.push('\n');
    s.push_str("set xlabel 'delta'\nset ylabel '|dilation pairing|'\n");
    s.push_str(&format!(
        "plot '{csv_name}' using 5:(abs($12)) skip 1 with points title 'measured', '' using 5:(abs($11)) skip 1 with lines title 'predicted'\n"
    ));
    s.push_str("unset multiplot\n");
    s
}
