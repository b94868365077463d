//! Projected bubbles `PU = U − w` where the correction `w` carries the
//! boundary values of `U`.

use super::{OperatorSpec, Solver};
use crate::bubbles::{BubbleParams, DerivativeIndex};
use crate::domain::{Field, Mesh, Symmetry};
use crate::error::{invalid, Error, Result};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Which operator defines the projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProjectionKind {
    /// `−Δ(PU) = −ΔU`, `PU = 0` on the boundary.
    Pu1,
    /// `(−Δ − λ)(PU) = −ΔU`, `PU = 0` on the boundary.
    Pu2,
}

impl ProjectionKind {
    pub fn name(self) -> &'static str {
        match self {
            ProjectionKind::Pu1 => "pu1",
            ProjectionKind::Pu2 => "pu2",
        }
    }
}

impl fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pu1" => Ok(ProjectionKind::Pu1),
            "pu2" => Ok(ProjectionKind::Pu2),
            _ => Err(Error::Parse(format!("unknown projection '{s}'"))),
        }
    }
}

/// Factored correction operator reused across many projections on one mesh.
#[derive(Clone, Debug)]
pub struct Projector {
    kind: ProjectionKind,
    lambda: f64,
    solver: Solver,
}

impl Projector {
    pub fn new(mesh: &Arc<Mesh>, kind: ProjectionKind, lambda: f64) -> Result<Self> {
        let op = match kind {
            ProjectionKind::Pu1 => OperatorSpec::laplace(),
            ProjectionKind::Pu2 => OperatorSpec::shifted(lambda)?,
        };
        if !(lambda >= 0.0) {
            return Err(invalid(format!("λ must be non-negative, got {lambda}")));
        }
        Ok(Projector { kind, lambda, solver: Solver::new(mesh, op)? })
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.solver.mesh()
    }

    fn check_support(&self, b: &BubbleParams, k: DerivativeIndex) -> Result<()> {
        let mesh = self.mesh();
        if b.n() != mesh.n() {
            return Err(Error::DimensionMismatch { expected: mesh.n(), got: b.n() });
        }
        if !mesh.domain().contains(b.xi()) {
            return Err(Error::OutsideDomain);
        }
        if !mesh.supports_center(b.xi()) {
            return Err(Error::Unsupported(format!("center {:?} on a {} grid", b.xi(), mesh.grid().mode_name())));
        }
        let ok = match mesh.symmetry() {
            Symmetry::Full => true,
            Symmetry::Radial => k.is_dilation(),
            Symmetry::Axial => k.0 <= 1,
        };
        if !ok || k.0 > b.n() {
            return Err(Error::Unsupported(format!("derivative {} on a {} grid", k.0, mesh.grid().mode_name())));
        }
        Ok(())
    }

    /// Project a function `f` with `−Δf = lap` pointwise.
    fn project_fn(&self, f: impl Fn(&[f64]) -> f64 + Copy) -> Result<(Vec<f64>, Vec<f64>)> {
        let mesh = self.mesh();
        let vals = mesh.sample(f);
        let source: Vec<f64> = match self.kind {
            ProjectionKind::Pu1 => vec![0.0; vals.len()],
            ProjectionKind::Pu2 => vals.iter().map(|v| -self.lambda * v).collect(),
        };
        let w = self.solver.solve_bvp(&source, f)?;
        let pu = vals.iter().zip(&w).map(|(a, b)| a - b).collect();
        Ok((pu, vals))
    }

    /// `PU_{δ,ξ}` on the mesh nodes.
    pub fn bubble(&self, b: &BubbleParams) -> Result<Field> {
        self.check_support(b, DerivativeIndex::DILATION)?;
        let (pu, u) = self.project_fn(|x| b.value(x))?;
        let umax = u.iter().fold(0.0f64, |m, v| m.max(*v));
        let tol = 1e-8 * umax;
        // Positivity always holds; the upper bound only for the harmonic projection.
        for (i, (p, v)) in pu.iter().zip(&u).enumerate() {
            let upper_fails = self.kind == ProjectionKind::Pu1 && *p > v + tol;
            if *p < -tol || upper_fails {
                return Err(Error::Postcondition(format!(
                    "{} bubble out of range at node {i}: PU = {p:.6e}, U = {v:.6e}",
                    self.kind
                )));
            }
        }
        Field::new(self.mesh().clone(), pu)
    }

    /// `P(∂U/∂ω_k)` with the same operator as the bubble.
    pub fn derivative(&self, b: &BubbleParams, k: DerivativeIndex) -> Result<Field> {
        self.check_support(b, k)?;
        let (pz, _) = self.project_fn(|x| b.derivative(k, x))?;
        Field::new(self.mesh().clone(), pz)
    }

    /// `PU` and every derivative the mesh symmetry admits.
    pub fn bubble_with_derivatives(&self, b: &BubbleParams) -> Result<(Field, Vec<Field>)> {
        let pu = self.bubble(b)?;
        let count = match self.mesh().symmetry() {
            Symmetry::Radial => 1,
            Symmetry::Axial => 2,
            Symmetry::Full => b.n() + 1,
        };
        let z = (0..count).map(|k| self.derivative(b, DerivativeIndex(k))).collect::<Result<Vec<_>>>()?;
        Ok((pu, z))
    }
}

/// One-shot `PU_{δ,ξ}`.
pub fn project_bubble(kind: ProjectionKind, b: &BubbleParams, mesh: &Arc<Mesh>, lambda: f64) -> Result<Field> {
    Projector::new(mesh, kind, lambda)?.bubble(b)
}

/// One-shot `P Z^k_{δ,ξ}`.
pub fn project_derivative(
    kind: ProjectionKind,
    b: &BubbleParams,
    k: DerivativeIndex,
    mesh: &Arc<Mesh>,
    lambda: f64,
) -> Result<Field> {
    Projector::new(mesh, kind, lambda)?.derivative(b, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbles::dimensional_constant;
    use crate::domain::{DomainModel, GridSpec};

    #[test]
    fn harmonic_projection_at_the_center_of_the_ball() {
        for n in [3usize, 4, 5] {
            let mesh = Mesh::build(&DomainModel::unit_ball(n).unwrap(), &GridSpec::radial(400)).unwrap();
            let proj = Projector::new(&mesh, ProjectionKind::Pu1, 0.0).unwrap();
            for delta in [0.2, 0.1, 0.05] {
                let b = BubbleParams::centered(n, delta).unwrap();
                let pu = proj.bubble(&b).unwrap();
                let m = (n as f64 - 2.0) / 2.0;
                let c = dimensional_constant(n) * (delta / (delta * delta + 1.0)).powf(m);
                for (i, v) in pu.values().iter().enumerate() {
                    let exact = b.value(mesh.node(i)) - c;
                    assert!((v - exact).abs() <= 1e-9 * b.value(&vec![0.0; n]), "n={n} δ={delta}");
                }
            }
        }
    }

    #[test]
    fn derivative_support_follows_symmetry() {
        let mesh = Mesh::build(&DomainModel::unit_ball(3).unwrap(), &GridSpec::radial(64)).unwrap();
        let b = BubbleParams::centered(3, 0.1).unwrap();
        assert!(project_derivative(ProjectionKind::Pu1, &b, DerivativeIndex(1), &mesh, 0.0).is_err());
        let off = BubbleParams::new(3, 0.1, vec![0.2, 0.0, 0.0]).unwrap();
        assert!(project_bubble(ProjectionKind::Pu1, &off, &mesh, 0.0).is_err());
        assert_eq!("pu2".parse::<ProjectionKind>().unwrap(), ProjectionKind::Pu2);
    }

    #[test]
    fn shifted_projection_is_positive() {
        let mesh = Mesh::build(&DomainModel::unit_ball(3).unwrap(), &GridSpec::radial(200)).unwrap();
        let b = BubbleParams::centered(3, 0.1).unwrap();
        let pu = project_bubble(ProjectionKind::Pu2, &b, &mesh, 0.5 * std::f64::consts::PI.powi(2)).unwrap();
        assert!(pu.min() > 0.0);
    }
}
