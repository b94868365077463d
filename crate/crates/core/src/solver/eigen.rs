//! First Dirichlet eigenvalue of the Laplacian.

use super::{OperatorSpec, Solver};
use crate::domain::{DomainModel, GridSpec, Mesh};
use crate::error::{Error, Result};
use crate::quadrature::kahan_sum;

const MAX_ITER: usize = 500;

/// `λ₁` of the unit ball for `n = 3, 4, 5` from the first Bessel zero.
pub fn lambda1_ball(n: usize) -> Result<f64> {
    let j = match n {
        3 => std::f64::consts::PI,
        4 => 3.831_705_970_207_512,
        5 => 4.493_409_457_909_064,
        _ => return Err(Error::Unsupported(format!("closed-form λ₁ for n = {n}"))),
    };
    Ok(j * j)
}

fn refine(grid: &GridSpec) -> GridSpec {
    match grid.clone() {
        GridSpec::Radial { cells, core, wall } => GridSpec::Radial { cells: 2 * cells, core, wall },
        GridSpec::Axisymmetric { radial_cells, angular_cells, radial_foci, angular_foci } => GridSpec::Axisymmetric {
            radial_cells: 2 * radial_cells,
            angular_cells: 2 * angular_cells,
            radial_foci,
            angular_foci,
        },
        GridSpec::Tensor { points_per_axis } => GridSpec::Tensor { points_per_axis: 2 * points_per_axis + 1 },
    }
}

/// Smallest generalized eigenvalue of `A v = μ M v` by inverse iteration.
fn discrete_lambda1(domain: &DomainModel, grid: &GridSpec) -> Result<f64> {
    let mesh = Mesh::build(domain, grid)?;
    let solver = Solver::new(&mesh, OperatorSpec::laplace())?;
    let mass = mesh.mass();
    let mut v = vec![1.0; mesh.len()];
    let mut mu = f64::NAN;
    for _ in 0..MAX_ITER {
        let load: Vec<f64> = v.iter().zip(mass).map(|(a, m)| a * m).collect();
        let mut w = solver.solve_load(&load)?;
        let aw = solver.apply(&w);
        let num = kahan_sum(w.iter().zip(&aw).map(|(a, b)| a * b));
        let den = kahan_sum(w.iter().zip(mass).map(|(a, m)| a * a * m));
        let next = num / den;
        let scale = 1.0 / den.sqrt();
        w.iter_mut().for_each(|x| *x *= scale);
        v = w;
        if (next - mu).abs() <= 1e-13 * next {
            return Ok(next);
        }
        mu = next;
    }
    Err(Error::NotConverged(format!("inverse iteration for λ₁ stalled at {mu}")))
}

/// `λ₁` from inverse iteration on `grid` and on a twice finer grid,
/// Richardson-extrapolated for a second-order discretization.
pub fn estimate_lambda1(domain: &DomainModel, grid: &GridSpec) -> Result<f64> {
    let coarse = discrete_lambda1(domain, grid)?;
    let fine = discrete_lambda1(domain, &refine(grid))?;
    Ok((4.0 * fine - coarse) / 3.0)
}
