//! Leading-order expansion of `PU` for a bubble at the center of the unit
//! ball, and its max-norm defect against the discrete projection.

use super::profile::solve_dn_profile;
use super::projection::{ProjectionKind, Projector};
use crate::bubbles::{dimensional_constant, BubbleParams};
use crate::domain::{DomainKind, Mesh};
use crate::error::{invalid, Error, Result};
use std::sync::Arc;

/// Expansion of the projected bubble at `ξ = 0` on the unit ball.
///
/// Harmonic kind, any `n`: `U − aₙδ^{(n−2)/2}`, since the regular part of
/// the Laplace Green function at the center is 1.
///
/// Shifted kind, `n = 3`, `k = √λ < π`:
/// `U − a₃δ^{1/2}H_λ + a₃δ^{1/2}(cos(k|x|) − 1)/|x| + δ^{3/2}𝒟₃(x/δ)` with
/// `H_λ(x) = cos k·sin(k|x|)/(|x| sin k)`.
pub struct CenterExpansion {
    kind: ProjectionKind,
    lambda: f64,
    profile: Option<super::DnProfile>,
}

impl CenterExpansion {
    pub fn new(n: usize, kind: ProjectionKind, lambda: f64) -> Result<Self> {
        if n < 3 {
            return Err(invalid(format!("dimension must be at least 3, got {n}")));
        }
        let profile = match kind {
            ProjectionKind::Pu1 => None,
            ProjectionKind::Pu2 if n == 3 => {
                if !(lambda > 0.0 && lambda.sqrt() < std::f64::consts::PI) {
                    return Err(invalid(format!("shifted expansion needs 0 < λ < π², got {lambda}")));
                }
                Some(solve_dn_profile(3, lambda)?)
            }
            ProjectionKind::Pu2 => return Err(Error::Unsupported(format!("shifted center expansion is implemented for n = 3, got n = {n}"))),
        };
        Ok(CenterExpansion { kind, lambda, profile })
    }

    pub fn eval(&self, b: &BubbleParams, x: &[f64]) -> f64 {
        let n = b.n();
        let d = b.delta();
        let amp = dimensional_constant(n) * d.powf((n as f64 - 2.0) / 2.0);
        let u = b.value(x);
        match (self.kind, &self.profile) {
            (ProjectionKind::Pu2, Some(prof)) => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let k = self.lambda.sqrt();
                // Both bracketed ratios tend to finite limits at r = 0.
                let (sinc, cosm) = if k * r < 1e-4 {
                    (k, -0.5 * k * k * r)
                } else {
                    ((k * r).sin() / r, ((k * r).cos() - 1.0) / r)
                };
                let h = k.cos() / k.sin() * sinc;
                u - amp * h + amp * cosm + d.powf(1.5) * prof.eval(r / d)
            }
            _ => u - amp,
        }
    }
}

/// `max |PU − expansion|` over the mesh nodes for a centered bubble.
pub fn center_expansion_defect(mesh: &Arc<Mesh>, kind: ProjectionKind, lambda: f64, delta: f64) -> Result<f64> {
    if !matches!(mesh.domain().kind(), DomainKind::Ball { radius } if *radius == 1.0) {
        return Err(Error::Unsupported("center expansion is defined on the unit ball".into()));
    }
    let n = mesh.n();
    let b = BubbleParams::centered(n, delta)?;
    let expansion = CenterExpansion::new(n, kind, lambda)?;
    let pu = Projector::new(mesh, kind, lambda)?.bubble(&b)?;
    Ok((0..mesh.len()).map(|i| (pu.values()[i] - expansion.eval(&b, mesh.node(i))).abs()).fold(0.0, f64::max))
}
