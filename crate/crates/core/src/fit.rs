//! Nearest configuration `u₀ + Σ PUᵢ` to a discrete function in the norm
//! `‖v‖² = ∫|∇v|² − λv²`, the remainder `ρ`, and the error fields of the
//! remainder equation.

use crate::bubbles::{critical_exponent, BubbleParams};
use crate::domain::{Field, Mesh, Symmetry};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::solver::{OperatorSpec, ProjectionKind, Projector, Solver};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::sync::Arc;

/// Operators shared by every fit on one mesh.
#[derive(Clone, Debug)]
pub struct FitContext {
    projector: Projector,
    norm: Solver,
    lambda: f64,
}

impl FitContext {
    pub fn new(mesh: &Arc<Mesh>, kind: ProjectionKind, lambda: f64) -> Result<Self> {
        let op = if lambda == 0.0 { OperatorSpec::laplace() } else { OperatorSpec::shifted(lambda)? };
        Ok(FitContext { projector: Projector::new(mesh, kind, lambda)?, norm: Solver::new(mesh, op)?, lambda })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.projector.mesh()
    }

    pub fn kind(&self) -> ProjectionKind {
        self.projector.kind()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    /// Factored `A − λM` used for norms and inner products.
    pub fn norm_solver(&self) -> &Solver {
        &self.norm
    }

    /// `⟨u, v⟩` in the fitting norm.
    pub fn inner(&self, u: &Field, v: &Field) -> f64 {
        self.norm.inner(u.values(), v.values())
    }

    pub fn norm_of(&self, u: &Field) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Number of parameter derivatives the mesh symmetry admits per bubble.
    pub fn active_derivatives(&self) -> usize {
        match self.mesh().symmetry() {
            Symmetry::Radial => 1,
            Symmetry::Axial => 2,
            Symmetry::Full => self.mesh().n() + 1,
        }
    }
}

/// Projected bubbles and derivatives of one configuration.
#[derive(Clone, Debug)]
pub struct Projected {
    pub bubbles: Vec<BubbleParams>,
    pub pu: Vec<Field>,
    /// `pz[i][k]` for the active derivatives of bubble `i`.
    pub pz: Vec<Vec<Field>>,
}

impl Projected {
    pub fn compute(ctx: &FitContext, bubbles: &[BubbleParams], exec: Execution) -> Result<Self> {
        let parts = exec.map(bubbles, |b| ctx.projector.bubble_with_derivatives(b));
        let mut pu = Vec::with_capacity(bubbles.len());
        let mut pz = Vec::with_capacity(bubbles.len());
        for r in parts {
            let (a, b) = r?;
            pu.push(a);
            pz.push(b);
        }
        Ok(Projected { bubbles: bubbles.to_vec(), pu, pz })
    }

    /// `σ = Σ PUᵢ`.
    pub fn sigma(&self, mesh: &Arc<Mesh>) -> Field {
        let mut s = vec![0.0; mesh.len()];
        for f in &self.pu {
            for (a, b) in s.iter_mut().zip(f.values()) {
                *a += b;
            }
        }
        Field::new(mesh.clone(), s).expect("sizes match")
    }

    /// All derivative fields in `(i, k)` order.
    pub fn columns(&self) -> Vec<&Field> {
        self.pz.iter().flatten().collect()
    }
}

/// A fitted decomposition `u = u₀ + σ + ρ`.
#[derive(Clone, Debug)]
pub struct DecompositionState {
    pub u: Field,
    pub u0: Option<Field>,
    pub kind: ProjectionKind,
    pub lambda: f64,
    pub bubbles: Vec<BubbleParams>,
    pub projected: Vec<Field>,
    pub sigma: Field,
    pub rho: Field,
    /// `‖ρ‖`.
    pub distance: f64,
    /// `|⟨ρ, PZᵢᵏ⟩| / (‖ρ‖·‖PZᵢᵏ‖)` per bubble and derivative. Derivatives
    /// excluded by the mesh symmetry vanish identically and are stored as 0.
    pub ortho_residuals: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl DecompositionState {
    pub fn ortho_max(&self) -> f64 {
        self.ortho_residuals.iter().flatten().fold(0.0, |m, v| m.max(*v))
    }
}

/// Fit controls.
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Target for the largest orthogonality residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub exec: Execution,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tolerance: 1e-6, max_iterations: 100, exec: Execution::default() }
    }
}

/// Relative floor on `‖ρ‖` in the orthogonality ratio, so an exact fit is
/// judged against the size of the data rather than roundoff.
const RHO_FLOOR: f64 = 1e-7;

struct Eval {
    proj: Projected,
    rho: Field,
    obj: f64,
}

fn admissible(mesh: &Mesh, b: &BubbleParams) -> std::result::Result<(), String> {
    let d = mesh.domain();
    if d.signed_distance(b.xi()) <= 0.0 {
        return Err(format!("center {:?} left the domain", b.xi()));
    }
    if !mesh.supports_center(b.xi()) {
        return Err(format!("center {:?} is not representable on this grid", b.xi()));
    }
    let floor = 2.0 * mesh.local_spacing(b.xi());
    if b.delta() < floor {
        return Err(format!("scale {:.3e} fell below the grid resolution {floor:.3e}", b.delta()));
    }
    if b.delta() > 2.0 * d.diameter() {
        return Err(format!("scale {:.3e} exceeds the domain size", b.delta()));
    }
    Ok(())
}

fn evaluate(ctx: &FitContext, target: &Field, bubbles: &[BubbleParams], exec: Execution) -> Result<Eval> {
    let proj = Projected::compute(ctx, bubbles, exec)?;
    let sigma = proj.sigma(ctx.mesh());
    let rho = target.sub(&sigma)?;
    let obj = 0.5 * ctx.inner(&rho, &rho);
    Ok(Eval { proj, rho, obj })
}

/// Apply a step `s` in (log δ, ξ/δ) coordinates.
fn step(bubbles: &[BubbleParams], s: &[f64], per: usize) -> Result<Vec<BubbleParams>> {
    bubbles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let s = &s[i * per..(i + 1) * per];
            let delta = b.delta() * s[0].clamp(-2.0, 2.0).exp();
            let mut xi = b.xi().to_vec();
            for k in 1..per {
                xi[k - 1] += b.delta() * s[k];
            }
            BubbleParams::new(b.n(), delta, xi)
        })
        .collect()
}

fn ortho(ctx: &FitContext, ev: &Eval, scale: f64, per: usize) -> Vec<Vec<f64>> {
    let n = ctx.mesh().n();
    let rn = ctx.norm_of(&ev.rho).max(RHO_FLOOR * scale);
    ev.proj
        .pz
        .iter()
        .map(|zs| {
            let mut row = vec![0.0; n + 1];
            for (k, z) in zs.iter().enumerate().take(per) {
                row[k] = ctx.inner(&ev.rho, z).abs() / (rn * ctx.norm_of(z));
            }
            row
        })
        .collect()
}

/// Tie-break permutation-equivalent configurations by `(δ, ξ)`.
fn canonical_order(b: &[BubbleParams]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..b.len()).collect();
    idx.sort_by(|&i, &j| {
        b[i].delta().total_cmp(&b[j].delta()).then_with(|| {
            b[i].xi().iter().zip(b[j].xi()).map(|(a, c)| a.total_cmp(c)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    idx
}

/// Levenberg–Marquardt minimization of `½‖u − u₀ − Σ PUᵢ‖²` from `init`.
pub fn fit(ctx: &FitContext, u: &Field, u0: Option<&Field>, init: &[BubbleParams], opts: FitOptions) -> Result<DecompositionState> {
    if init.is_empty() || init.len() > 3 {
        return Err(invalid(format!("fits support 1 to 3 bubbles, got {}", init.len())));
    }
    let mesh = ctx.mesh().clone();
    if !Arc::ptr_eq(u.mesh(), &mesh) && u.mesh().grid() != mesh.grid() {
        return Err(Error::GridMismatch("input field and fit context use different grids".into()));
    }
    let target = match u0 {
        Some(z) => u.sub(z)?,
        None => u.clone(),
    };
    let scale = ctx.norm_of(&target);
    for b in init {
        admissible(&mesh, b).map_err(|m| invalid(format!("initial guess: {m}")))?;
    }
    let per = ctx.active_derivatives();
    let mut bubbles = init.to_vec();
    let mut ev = evaluate(ctx, &target, &bubbles, opts.exec)?;
    let mut mu = 1e-6;
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < opts.max_iterations {
        let res = ortho(ctx, &ev, scale, per);
        if res.iter().flatten().all(|v| *v <= opts.tolerance) {
            converged = true;
            break;
        }
        let cols = ev.proj.columns();
        let m = cols.len();
        let kcols: Vec<Vec<f64>> = cols.iter().map(|c| ctx.norm.apply(c.values())).collect();
        let dot = |a: &[f64], b: &[f64]| crate::quadrature::kahan_sum(a.iter().zip(b).map(|(x, y)| x * y));
        let g = DVector::from_iterator(m, kcols.iter().map(|kc| dot(ev.rho.values(), kc)));
        let gram = DMatrix::from_fn(m, m, |a, b| dot(cols[a].values(), &kcols[b]));
        iterations += 1;
        let mut accepted = false;
        let mut escape = None;
        while mu <= 1e8 {
            let mut damped = gram.clone();
            for a in 0..m {
                damped[(a, a)] += mu * gram[(a, a)].max(1e-300);
            }
            let Some(s) = damped.lu().solve(&g) else {
                mu *= 10.0;
                continue;
            };
            let trial = step(&bubbles, s.as_slice(), per)?;
            if let Some(msg) = trial.iter().find_map(|b| admissible(&mesh, b).err()) {
                escape = Some(msg);
                mu *= 10.0;
                continue;
            }
            match evaluate(ctx, &target, &trial, opts.exec) {
                Ok(next) if next.obj < ev.obj => {
                    bubbles = trial;
                    ev = next;
                    mu = (mu / 10.0).max(1e-12);
                    accepted = true;
                    break;
                }
                Ok(next) if next.obj <= ev.obj * (1.0 + 1e-14) && ev.obj <= (RHO_FLOOR * scale).powi(2) => {
                    // Objective is flat at roundoff level.
                    bubbles = trial;
                    ev = next;
                    stalled = true;
                    break;
                }
                Ok(_) | Err(Error::Postcondition(_)) => mu *= 10.0,
                Err(e) => return Err(e),
            }
        }
        if stalled {
            let res = ortho(ctx, &ev, scale, per);
            converged = res.iter().flatten().all(|v| *v <= opts.tolerance);
            break;
        }
        if !accepted {
            return Err(match escape {
                Some(m) => Error::NotConverged(format!("fit left the admissible region: {m}")),
                None => Error::NotConverged(format!("no descent step after {iterations} iterations")),
            });
        }
    }
    if !converged {
        let res = ortho(ctx, &ev, scale, per);
        converged = res.iter().flatten().all(|v| *v <= opts.tolerance);
    }
    let res = ortho(ctx, &ev, scale, per);
    let order = canonical_order(&bubbles);
    let sigma = ev.proj.sigma(&mesh);
    let distance = ctx.norm_of(&ev.rho);
    let Eval { proj, rho, .. } = ev;
    Ok(DecompositionState {
        u: u.clone(),
        u0: u0.cloned(),
        kind: ctx.kind(),
        lambda: ctx.lambda,
        bubbles: order.iter().map(|&i| bubbles[i].clone()).collect(),
        projected: order.iter().map(|&i| proj.pu[i].clone()).collect(),
        sigma,
        rho,
        distance,
        ortho_residuals: order.iter().map(|&i| res[i].clone()).collect(),
        converged,
        iterations,
    })
}

/// Error fields of the remainder equation.
#[derive(Clone, Debug)]
pub struct ErrorFields {
    /// `|u₀+σ+ρ|^{p−1}(u₀+σ+ρ) − (u₀+σ)^p − p(u₀+σ)^{p−1}ρ`.
    pub i0: Field,
    /// `(u₀+σ)^p − u₀^p − σ^p`.
    pub i1: Field,
    /// `σ^p − Σ PUᵢ^p`.
    pub i2: Field,
    /// `Σ [ΔPUᵢ + λPUᵢ + PUᵢ^p]`, in algebraic form.
    pub i3: Field,
}

/// `ΔPU + λPU + PU^p` of one projected bubble, using the defining equation.
pub fn self_interaction_field(kind: ProjectionKind, lambda: f64, b: &BubbleParams, pu: &Field) -> Field {
    let mesh = pu.mesh();
    let p = critical_exponent(mesh.n());
    let vals = pu
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let u = b.value(mesh.node(i));
            let shift = if kind == ProjectionKind::Pu1 { lambda * v } else { 0.0 };
            shift + v.max(0.0).powf(p) - u.powf(p)
        })
        .collect();
    Field::new(mesh.clone(), vals).expect("sizes match")
}

pub fn assemble_error_fields(state: &DecompositionState) -> Result<ErrorFields> {
    let mesh = state.u.mesh().clone();
    let p = critical_exponent(mesh.n());
    let len = mesh.len();
    let zero = vec![0.0; len];
    let u0 = state.u0.as_ref().map(|f| f.values()).unwrap_or(&zero);
    if u0.len() != len || state.sigma.len() != len || state.rho.len() != len {
        return Err(Error::GridMismatch("decomposition fields differ in size".into()));
    }
    let pw = |v: f64| v.abs().powf(p - 1.0) * v;
    let s = state.sigma.values();
    let r = state.rho.values();
    let i0 = (0..len).map(|i| {
        let base = u0[i] + s[i];
        pw(base + r[i]) - pw(base) - p * base.abs().powf(p - 1.0) * r[i]
    });
    let i1 = (0..len).map(|i| pw(u0[i] + s[i]) - pw(u0[i]) - pw(s[i]));
    let i2 = (0..len).map(|i| pw(s[i]) - state.projected.iter().map(|f| pw(f.values()[i])).sum::<f64>());
    let mut i3 = vec![0.0; len];
    for (b, pu) in state.bubbles.iter().zip(&state.projected) {
        for (a, v) in i3.iter_mut().zip(self_interaction_field(state.kind, state.lambda, b, pu).values()) {
            *a += v;
        }
    }
    Ok(ErrorFields {
        i0: Field::new(mesh.clone(), i0.collect())?,
        i1: Field::new(mesh.clone(), i1.collect())?,
        i2: Field::new(mesh.clone(), i2.collect())?,
        i3: Field::new(mesh, i3)?,
    })
}

/// One multistart record.
#[derive(Clone, Debug)]
pub struct FitRow {
    pub start: usize,
    pub converged: bool,
    pub distance: f64,
    pub bubbles: Vec<BubbleParams>,
    pub ortho_max: f64,
}

#[derive(Clone, Debug)]
pub struct DistanceReport {
    pub best: DecompositionState,
    pub rows: Vec<FitRow>,
}

/// Deterministic start configurations: scales `{0.05, 0.1, 0.2}` times the
/// domain radius, centers on a coarse interior lattice compatible with the
/// mesh symmetry, shuffled by `seed` and truncated to `count`.
pub fn multistart_grid(mesh: &Mesh, nu: usize, count: usize, seed: u64) -> Result<Vec<Vec<BubbleParams>>> {
    let n = mesh.n();
    let dom = mesh.domain();
    let c = dom.center();
    let half = dom.diameter() / 2.0;
    let offsets = [-0.4, 0.0, 0.4];
    let mut centers: Vec<Vec<f64>> = match mesh.symmetry() {
        Symmetry::Radial => vec![vec![0.0; n]],
        Symmetry::Axial => offsets
            .iter()
            .map(|o| {
                let mut x = vec![0.0; n];
                x[0] = o * half;
                x
            })
            .collect(),
        Symmetry::Full => {
            let mut pts = vec![c.clone()];
            for k in 0..n {
                for o in [-0.4, 0.4] {
                    let mut x = c.clone();
                    x[k] += o * half / (n as f64).sqrt();
                    pts.push(x);
                }
            }
            pts
        }
    };
    centers.retain(|x| dom.signed_distance(x) > 0.2 * half);
    let mut configs = Vec::new();
    for s in [0.05, 0.1, 0.2] {
        let delta = s * half;
        let mut pick = vec![0usize; nu];
        loop {
            let distinct = pick.windows(2).all(|w| w[0] < w[1]);
            if distinct || nu == 1 {
                let cfg = pick.iter().map(|&j| BubbleParams::new(n, delta, centers[j].clone())).collect::<Result<Vec<_>>>()?;
                configs.push(cfg);
            }
            // Next index tuple.
            let mut k = nu;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                pick[k] += 1;
                if pick[k] < centers.len() {
                    break;
                }
                pick[k] = 0;
                if k == 0 {
                    k = usize::MAX;
                    break;
                }
            }
            if k == usize::MAX {
                break;
            }
        }
    }
    if configs.is_empty() {
        return Err(Error::Unsupported(format!("no multistart configuration with ν = {nu} fits this grid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    configs.shuffle(&mut rng);
    configs.truncate(count.max(1));
    Ok(configs)
}

/// `d_*(u)`: the best fit over several starts. Starts run concurrently; the
/// minimum is chosen by `(distance, start index)`.
pub fn distance_functional(
    ctx: &FitContext,
    u: &Field,
    u0: Option<&Field>,
    starts: &[Vec<BubbleParams>],
    opts: FitOptions,
) -> Result<DistanceReport> {
    if starts.is_empty() {
        return Err(invalid("no starting configurations"));
    }
    let inner = FitOptions { exec: Execution::Sequential, ..opts };
    let results = opts.exec.map(starts, |s| fit(ctx, u, u0, s, inner));
    let mut rows = Vec::with_capacity(starts.len());
    let mut best: Option<(f64, usize, DecompositionState)> = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(st) => {
                rows.push(FitRow { start: i, converged: st.converged, distance: st.distance, bubbles: st.bubbles.clone(), ortho_max: st.ortho_max() });
                let better = best.as_ref().map_or(true, |(d, _, _)| st.distance < *d);
                if st.converged && better {
                    best = Some((st.distance, i, st));
                }
            }
            Err(_) => rows.push(FitRow { start: i, converged: false, distance: f64::NAN, bubbles: starts[i].clone(), ortho_max: f64::NAN }),
        }
    }
    match best {
        Some((_, _, best)) => Ok(DistanceReport { best, rows }),
        None => Err(Error::NotConverged(format!("all {} starts failed to converge", starts.len()))),
    }
}

/// `start,converged,distance,delta_i...,xi_i...,ortho_max`.
pub fn write_fit_csv<W: Write>(mut w: W, rows: &[FitRow]) -> Result<()> {
    let Some(first) = rows.first() else {
        return Err(invalid("no fit rows to write"));
    };
    let nu = first.bubbles.len();
    let n = first.bubbles.first().map_or(0, |b| b.n());
    let mut head = vec!["start".to_string(), "converged".into(), "distance".into()];
    head.extend((1..=nu).map(|i| format!("delta_{i}")));
    for i in 1..=nu {
        head.extend((1..=n).map(|k| format!("xi_{i}_{k}")));
    }
    head.push("ortho_max".into());
    writeln!(w, "{}", head.join(","))?;
    for r in rows {
        let mut cells = vec![r.start.to_string(), r.converged.to_string(), format!("{:.12e}", r.distance)];
        cells.extend(r.bubbles.iter().map(|b| format!("{:.12e}", b.delta())));
        for b in &r.bubbles {
            cells.extend(b.xi().iter().map(|x| format!("{x:.12e}")));
        }
        cells.push(format!("{:.3e}", r.ortho_max));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Remove the components of `f` along the given directions in the fitting
/// norm, returning the projected field.
pub fn orthogonalize(ctx: &FitContext, f: &Field, dirs: &[&Field]) -> Result<Field> {
    let m = dirs.len();
    let kd: Vec<Vec<f64>> = dirs.iter().map(|d| ctx.norm.apply(d.values())).collect();
    let dot = |a: &[f64], b: &[f64]| crate::quadrature::kahan_sum(a.iter().zip(b).map(|(x, y)| x * y));
    let gram = DMatrix::from_fn(m, m, |a, b| dot(dirs[a].values(), &kd[b]));
    let rhs = DVector::from_iterator(m, kd.iter().map(|k| dot(f.values(), k)));
    let coef = gram.lu().solve(&rhs).ok_or_else(|| Error::Solver("singular Gram matrix of projection directions".into()))?;
    let mut out = f.clone();
    for (c, d) in coef.iter().zip(dirs) {
        out = out.axpy(-c, d)?;
    }
    Ok(out)
}
