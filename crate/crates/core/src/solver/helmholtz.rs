//! Regular parts of the Green's function of `−Δ − λ` with a Dirichlet
//! condition, and the Robin function on their diagonal.
//!
//! The regular part `H_λ(·, y)` solves `ΔH + λH = λ|x−y|^{2−n}` with
//! `H = |x−y|^{2−n}` on the boundary. For `λ > 0` it is itself singular at
//! `y` when `n ≥ 3`, so the computed quantity is `H_λ − s_n(|x−y|)` with an
//! explicit singular part `s_n` chosen so that the remainder is continuous.

use super::{OperatorSpec, Solver};
use crate::domain::{ball_harmonic_extension_h, DomainKind, DomainModel, Field, Focus, GridSpec, Mesh, Symmetry};
use crate::error::{invalid, Error, Result};
use std::sync::Arc;

/// Which Robin function to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RobinVariant {
    /// Diagonal of the harmonic regular part.
    Laplace,
    /// Diagonal of the continuous remainder `H_λ − s_n`.
    Helmholtz(f64),
}

/// Explicit singular part `s_n(r)` of the Helmholtz regular part (zero for `λ = 0`).
pub fn singular_part(n: usize, lambda: f64, r: f64) -> Result<f64> {
    Ok(match n {
        3 => 0.5 * lambda * r,
        4 => 0.5 * lambda * r.ln(),
        5 => -0.5 * lambda / r + lambda * lambda / 8.0 * r,
        _ if lambda == 0.0 => 0.0,
        _ => return Err(Error::Unsupported(format!("Helmholtz singular part for n = {n}"))),
    })
}

/// `ΔR + λR` for the remainder `R = H_λ − s_n`.
fn remainder_source(n: usize, lambda: f64, r: f64) -> f64 {
    match n {
        3 => -0.5 * lambda * lambda * r,
        4 => -0.5 * lambda * lambda * r.ln(),
        5 => -lambda.powi(3) / 8.0 * r,
        _ => 0.0,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The continuous remainder `H_λ(·, y) − s_n(|· − y|)` for one pole.
#[derive(Clone, Debug)]
pub struct RegularPart {
    n: usize,
    lambda: f64,
    pole: Vec<f64>,
    field: Field,
}

impl RegularPart {
    /// Default mesh for a pole on a ball: radial when centered, otherwise
    /// axisymmetric around the pole's axis.
    pub fn default_grid(domain: &DomainModel, pole: &[f64]) -> Result<GridSpec> {
        match domain.kind() {
            DomainKind::Ball { radius } => {
                let c = pole[0].abs();
                if pole.iter().all(|v| *v == 0.0) {
                    return Ok(GridSpec::Radial { cells: 1200, core: 1e-5, wall: 1e-3 });
                }
                let d = radius - c;
                let scale = d.min(c);
                let radial_foci = vec![
                    Focus::new(c, 0.02 * scale),
                    Focus::new(*radius, 0.02 * d),
                    Focus::new(0.0, 0.05 * c.min(0.5 * radius)),
                ];
                let angular_foci = vec![Focus::new(0.0, 0.02 * scale / c)];
                Ok(GridSpec::Axisymmetric { radial_cells: 180, angular_cells: 120, radial_foci, angular_foci })
            }
            DomainKind::Box { .. } => Ok(GridSpec::tensor(39)),
        }
    }

    /// Solve for the remainder with pole `y`; on a ball the pole must lie on
    /// the x₁ axis unless the grid is a tensor grid.
    pub fn solve(domain: &DomainModel, lambda: f64, pole: &[f64], grid: Option<GridSpec>) -> Result<Self> {
        let n = domain.n();
        if pole.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: pole.len() });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("λ must be finite and non-negative, got {lambda}")));
        }
        if domain.signed_distance(pole) <= 0.0 {
            return Err(Error::OutsideDomain);
        }
        singular_part(n, lambda, 1.0)?;
        let grid = match grid {
            Some(g) => g,
            None => Self::default_grid(domain, pole)?,
        };
        let mesh = Mesh::build(domain, &grid)?;
        if !mesh.supports_center(pole) {
            return Err(Error::Unsupported(format!("pole {pole:?} on a {} grid", grid.mode_name())));
        }
        let solver = Solver::new(&mesh, OperatorSpec::shifted(lambda)?)?;
        let y = pole.to_vec();
        let source: Vec<f64> = (0..mesh.len()).map(|i| -remainder_source(n, lambda, dist(mesh.node(i), &y))).collect();
        let values = solver.solve_bvp(&source, |p| {
            let r = dist(p, &y);
            r.powf(2.0 - n as f64) - singular_part(n, lambda, r).unwrap_or(0.0)
        })?;
        Ok(RegularPart { n, lambda, pole: y, field: Field::new(mesh, values)? })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.field.mesh()
    }

    pub fn pole(&self) -> &[f64] {
        &self.pole
    }

    /// `H_λ(x, y) − s_n(|x − y|)`.
    pub fn remainder(&self, x: &[f64]) -> Result<f64> {
        let (n, lambda, y) = (self.n, self.lambda, self.pole.clone());
        self.mesh().interpolate(self.field.values(), x, &|p: &[f64]| {
            let r = dist(p, &y);
            r.powf(2.0 - n as f64) - singular_part(n, lambda, r).unwrap_or(0.0)
        })
    }

    /// Full regular part `H_λ(x, y)` for `x ≠ y`.
    pub fn full(&self, x: &[f64]) -> Result<f64> {
        Ok(self.remainder(x)? + singular_part(self.n, self.lambda, dist(x, &self.pole))?)
    }

    /// Robin function value at the pole.
    pub fn diagonal(&self) -> Result<f64> {
        self.remainder(&self.pole)
    }
}

/// Robin function at `x`: closed form for the harmonic variant on a ball,
/// otherwise the diagonal of a computed regular part (rotating `x` onto the
/// x₁ axis on balls).
pub fn robin_function(domain: &DomainModel, x: &[f64], variant: RobinVariant) -> Result<f64> {
    let n = domain.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if domain.signed_distance(x) <= 0.0 {
        return Err(Error::OutsideDomain);
    }
    let lambda = match variant {
        RobinVariant::Laplace => 0.0,
        RobinVariant::Helmholtz(l) => l,
    };
    match domain.kind() {
        DomainKind::Ball { radius } => {
            let scaled: Vec<f64> = x.iter().map(|v| v / radius).collect();
            if lambda == 0.0 {
                return Ok(radius.powf(2.0 - n as f64) * ball_harmonic_extension_h(n, &scaled, &scaled));
            }
            let mut pole = vec![0.0; n];
            pole[0] = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            RegularPart::solve(domain, lambda, &pole, None)?.diagonal()
        }
        DomainKind::Box { .. } => {
            let part = RegularPart::solve(domain, lambda, x, None)?;
            debug_assert_eq!(part.mesh().symmetry(), Symmetry::Full);
            part.diagonal()
        }
    }
}
