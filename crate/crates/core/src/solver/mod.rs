//! Dirichlet solves for `−Δ − λ` on a mesh, the `λ`-weighted energy norm and
//! its dual, projected bubbles and the related regular parts.

mod eigen;
mod expansion;
mod ground_state;
mod helmholtz;
mod profile;
mod projection;

pub use eigen::{estimate_lambda1, lambda1_ball};
pub use expansion::{center_expansion_defect, CenterExpansion};
pub use ground_state::{find_threshold, solve_ground_state, GroundState, ThresholdBracket};
pub use helmholtz::{robin_function, singular_part, RegularPart, RobinVariant};
pub use profile::{solve_dn_profile, DnProfile};
pub use projection::{project_bubble, project_derivative, ProjectionKind, Projector};

use crate::domain::{Field, Mesh, Symmetry};
use crate::error::{invalid, Error, Result};
use crate::linalg::{pcg, BandLdl};
use crate::quadrature::kahan_sum;
use std::sync::Arc;

/// Relative residual target of the iterative backend.
pub const CG_TOLERANCE: f64 = 1e-12;
/// Residual contract of every Dirichlet solve, relative to the load.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Which operator a solve or norm refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Laplace,
    Shifted,
}

/// `−Δ` or `−Δ − λ`; the shifted form defines `⟨u,v⟩ = ∫∇u·∇v − λuv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorSpec {
    lambda: f64,
}

impl OperatorSpec {
    pub fn laplace() -> Self {
        OperatorSpec { lambda: 0.0 }
    }

    pub fn shifted(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("shift must be finite and non-negative, got {lambda}")));
        }
        Ok(OperatorSpec { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kind(&self) -> OperatorKind {
        if self.lambda == 0.0 {
            OperatorKind::Laplace
        } else {
            OperatorKind::Shifted
        }
    }
}

#[derive(Clone, Debug)]
enum Backend {
    Direct(BandLdl),
    Iterative,
}

/// A factored (or iteratively applied) operator `A − λM + diag(extra)`.
#[derive(Clone, Debug)]
pub struct Solver {
    mesh: Arc<Mesh>,
    lambda: f64,
    shift: Vec<f64>,
    backend: Backend,
}

impl Solver {
    /// Positive definite `A − λM`; fails when `λ` reaches the discrete spectrum.
    pub fn new(mesh: &Arc<Mesh>, op: OperatorSpec) -> Result<Self> {
        let shift: Vec<f64> = mesh.mass().iter().map(|m| -op.lambda * m).collect();
        Self::build(mesh, op.lambda, shift, false)
    }

    /// `A − λM + diag(extra)`, which may be indefinite (Newton matrices).
    pub fn indefinite(mesh: &Arc<Mesh>, lambda: f64, extra: &[f64]) -> Result<Self> {
        let shift: Vec<f64> = mesh.mass().iter().zip(extra).map(|(m, e)| -lambda * m + e).collect();
        Self::build(mesh, lambda, shift, true)
    }

    fn build(mesh: &Arc<Mesh>, lambda: f64, shift: Vec<f64>, allow_indefinite: bool) -> Result<Self> {
        let backend = match mesh.symmetry() {
            Symmetry::Radial | Symmetry::Axial => {
                let f = BandLdl::factor(mesh.stiffness(), Some(&shift))?;
                if !allow_indefinite && f.negative_pivots() > 0 {
                    return Err(Error::Indefinite(format!(
                        "λ = {lambda} is at or above the first discrete eigenvalue ({} negative pivots)",
                        f.negative_pivots()
                    )));
                }
                Backend::Direct(f)
            }
            Symmetry::Full => {
                if allow_indefinite {
                    return Err(Error::Unsupported("indefinite solves need a radial or axisymmetric mesh".into()));
                }
                Backend::Iterative
            }
        };
        Ok(Solver { mesh: mesh.clone(), lambda, shift, backend })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `K x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.mesh.stiffness().apply_shifted(x, Some(&self.shift), &mut out);
        out
    }

    /// Solve `K x = load`.
    pub fn solve_load(&self, load: &[f64]) -> Result<Vec<f64>> {
        if load.len() != self.mesh.len() {
            return Err(Error::GridMismatch(format!("load of length {} on {} nodes", load.len(), self.mesh.len())));
        }
        let x = match &self.backend {
            Backend::Direct(f) => {
                let mut x = f.solve(load);
                // One step of iterative refinement tightens strongly graded meshes.
                let r: Vec<f64> = load.iter().zip(self.apply(&x)).map(|(b, ax)| b - ax).collect();
                let dx = f.solve(&r);
                for (xi, d) in x.iter_mut().zip(dx) {
                    *xi += d;
                }
                x
            }
            Backend::Iterative => {
                let max_iter = 20 * self.mesh.len() + 100;
                match pcg(self.mesh.stiffness(), Some(&self.shift), load, CG_TOLERANCE, max_iter) {
                    Ok((x, _)) => x,
                    Err(Error::Indefinite(m)) => {
                        return Err(Error::Indefinite(format!("λ = {} too close to the spectrum: {m}", self.lambda)))
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        // Componentwise backward error: |b − Kx|ᵢ ≤ tol·(|K||x| + |b|)ᵢ.
        let r: Vec<f64> = load.iter().zip(self.apply(&x)).map(|(b, ax)| b - ax).collect();
        let xa: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let mut scale = vec![0.0; x.len()];
        for (i, s) in scale.iter_mut().enumerate() {
            *s = self.mesh.stiffness().row(i).map(|(j, a)| a.abs() * xa[j]).sum::<f64>()
                + self.shift[i].abs() * xa[i]
                + load[i].abs();
        }
        let worst = r.iter().zip(&scale).map(|(ri, si)| if *si > 0.0 { ri.abs() / si } else { ri.abs() }).fold(0.0, f64::max);
        if !(worst <= SOLVER_TOLERANCE) {
            return Err(Error::NotConverged(format!("relative residual {worst:.3e}")));
        }
        Ok(x)
    }

    /// Solve `(−Δ − λ)w = source` with `w = g` on the boundary.
    pub fn solve_bvp(&self, source: &[f64], g: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        let mut load = self.mesh.boundary_load(g);
        for ((l, s), m) in load.iter_mut().zip(source).zip(self.mesh.mass()) {
            *l += s * m;
        }
        self.solve_load(&load)
    }

    /// `‖b‖²_{K⁻¹}` for a weak load vector `b`.
    pub fn dual_norm_sq(&self, load: &[f64]) -> Result<f64> {
        let w = self.solve_load(load)?;
        Ok(kahan_sum(w.iter().zip(load).map(|(a, b)| a * b)))
    }

    /// `uᵀ K v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let kv = self.apply(v);
        kahan_sum(u.iter().zip(&kv).map(|(a, b)| a * b))
    }
}

fn check_mesh(a: &Field, b: &Arc<Mesh>) -> Result<()> {
    if Arc::ptr_eq(a.mesh(), b) || (a.mesh().domain() == b.domain() && a.mesh().grid() == b.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{} vs {}", a.mesh().grid(), b.grid())))
    }
}

/// `(−Δ − λ)w = rhs`, `w = 0` on the boundary.
pub fn solve_dirichlet(op: OperatorSpec, rhs: &Field) -> Result<Field> {
    let solver = Solver::new(rhs.mesh(), op)?;
    let w = solver.solve_bvp(rhs.values(), |_| 0.0)?;
    Field::new(rhs.mesh().clone(), w)
}

/// `⟨u, v⟩ = ∫∇u·∇v − λuv` with the discrete operator.
pub fn h1_inner(op: OperatorSpec, u: &Field, v: &Field) -> Result<f64> {
    check_mesh(v, u.mesh())?;
    let mesh = u.mesh();
    let mut av = vec![0.0; mesh.len()];
    mesh.stiffness().apply(v.values(), &mut av);
    Ok(kahan_sum(
        u.values().iter().zip(&av).zip(v.values()).zip(mesh.mass()).map(|(((a, kv), vv), m)| a * (kv - op.lambda * m * vv)),
    ))
}

/// `(∫|∇u|² − λu²)^{1/2}`; a negative quadratic form is an error.
pub fn h1_norm(op: OperatorSpec, u: &Field) -> Result<f64> {
    let q = h1_inner(op, u, u)?;
    if q < 0.0 {
        return Err(Error::Indefinite(format!("quadratic form is negative ({q:.3e}) at λ = {}", op.lambda)));
    }
    Ok(q.sqrt())
}

/// `‖f‖_* = (∫ f·w)^{1/2}` with `(−Δ − λ)w = f`.
pub fn dual_norm(op: OperatorSpec, f: &Field) -> Result<f64> {
    let solver = Solver::new(f.mesh(), op)?;
    let load: Vec<f64> = f.values().iter().zip(f.mesh().mass()).map(|(v, m)| v * m).collect();
    Ok(solver.dual_norm_sq(&load)?.max(0.0).sqrt())
}

/// Dual norm of the weak residual of the semilinear equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaResidual {
    pub gamma: f64,
    /// True when `u` had negative nodes and its positive part was used in the power.
    pub clipped: bool,
}

/// `Γ(u) = ‖Δu + λu + u^p‖_*`, with the residual tested against every
/// basis function through the discrete operator.
pub fn gamma_residual(u: &Field, lambda: f64) -> Result<GammaResidual> {
    let solver = Solver::new(u.mesh(), OperatorSpec::shifted(lambda)?)?;
    gamma_with(&solver, u)
}

/// [`gamma_residual`] reusing an existing factorization of `A − λM`.
pub fn gamma_with(solver: &Solver, u: &Field) -> Result<GammaResidual> {
    check_mesh(u, solver.mesh())?;
    let n = u.mesh().n();
    let p = crate::bubbles::critical_exponent(n);
    let clipped = u.min() < 0.0;
    let ku = solver.apply(u.values());
    let load: Vec<f64> = u
        .values()
        .iter()
        .zip(&ku)
        .zip(u.mesh().mass())
        .map(|((v, kv), m)| m * v.max(0.0).powf(p) - kv)
        .collect();
    Ok(GammaResidual { gamma: solver.dual_norm_sq(&load)?.max(0.0).sqrt(), clipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DomainModel, GridSpec};
    use std::f64::consts::PI;

    fn sinc_mode(x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < 1e-12 {
            1.0
        } else {
            (PI * r).sin() / (PI * r)
        }
    }

    #[test]
    fn eigenfunction_identities_on_radial_ball() {
        let mesh = Mesh::build(&DomainModel::unit_ball(3).unwrap(), &GridSpec::radial(800)).unwrap();
        let phi = Field::from_fn(mesh.clone(), sinc_mode).unwrap();
        let w = solve_dirichlet(OperatorSpec::laplace(), &phi).unwrap();
        for (a, b) in w.values().iter().zip(phi.values()) {
            assert!((a - b / (PI * PI)).abs() < 1e-5);
        }
        let w = solve_dirichlet(OperatorSpec::shifted(PI * PI / 2.0).unwrap(), &phi).unwrap();
        for (a, b) in w.values().iter().zip(phi.values()) {
            assert!((a - 2.0 * b / (PI * PI)).abs() < 3e-5, "{a} {b}");
        }
        let unit = phi.scale(1.0 / phi.lp_norm(2.0));
        let d = dual_norm(OperatorSpec::laplace(), &unit).unwrap();
        assert!((d - 1.0 / PI).abs() < 1e-5);
        let h = h1_norm(OperatorSpec::laplace(), &unit).unwrap();
        assert!((h - PI).abs() < 1e-3);
        let h = h1_norm(OperatorSpec::shifted(PI * PI / 2.0).unwrap(), &unit).unwrap();
        assert!((h - PI / 2f64.sqrt()).abs() < 1e-3);
        assert!(Solver::new(&mesh, OperatorSpec::shifted(1.01 * PI * PI).unwrap()).is_err());
    }

    #[test]
    fn separable_mode_on_cube() {
        let mesh = Mesh::build(&DomainModel::unit_cube(3).unwrap(), &GridSpec::tensor(23)).unwrap();
        let f = Field::from_fn(mesh, |x| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()).unwrap();
        let w = solve_dirichlet(OperatorSpec::laplace(), &f).unwrap();
        let err = w.sub(&f.scale(1.0 / (3.0 * PI * PI))).unwrap().max_abs();
        assert!(err < 5e-3 / (3.0 * PI * PI), "{err}");
    }

    #[test]
    fn gamma_of_zero_is_zero() {
        let mesh = Mesh::build(&DomainModel::unit_ball(3).unwrap(), &GridSpec::radial(64)).unwrap();
        let g = gamma_residual(&Field::zeros(mesh), 1.0).unwrap();
        assert_eq!(g.gamma, 0.0);
        assert!(!g.clipped);
    }
}
