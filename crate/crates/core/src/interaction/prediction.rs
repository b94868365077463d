//! Leading-order predictions of the projections `∫(I₁ + I₃)·PZᵏ` for a single
//! bubble, with explicit refusal outside the regimes where the leading term
//! dominates the remainder.

use super::constants::StructuralConstants;
use crate::error::{invalid, Error, Result};
use crate::solver::ProjectionKind;

/// Inputs for one prediction. `phi` and `grad_phi` are the Robin function
/// matching the projection kind (Laplace for `pu1`, Helmholtz for `pu2`) and
/// its gradient at the bubble center.
#[derive(Clone, Debug)]
pub struct PredictionInput {
    pub n: usize,
    pub kind: ProjectionKind,
    pub lambda: f64,
    pub delta: f64,
    /// Number of bubbles in the configuration.
    pub nu: usize,
    /// Background value `u₀(ξ)`, or `None` when `u₀ = 0`.
    pub u0_at_center: Option<f64>,
    pub phi: f64,
    pub grad_phi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Leading term of the dilation projection.
    pub dilation: f64,
    /// Leading term of each translation projection.
    pub translation: Vec<f64>,
    /// Short description of the formula used.
    pub formula: String,
}

/// Dilation term of `∫I₃PZ⁰` when it is the leading contribution.
fn self_interaction_term(inp: &PredictionInput, c: &StructuralConstants) -> Result<Option<f64>> {
    let (n, d, l, phi) = (inp.n, inp.delta, inp.lambda, inp.phi);
    let refuse = |why: &str| Err(Error::Regime(format!("no leading-order {} prediction for n = {n}: {why}", inp.kind)));
    Ok(Some(match (inp.kind, n) {
        (ProjectionKind::Pu1, 3) | (ProjectionKind::Pu1, 4) => {
            if inp.u0_at_center.is_some() {
                // Lower order than the background term; dropped.
                return Ok(None);
            }
            return refuse("the remainder is as large as the leading term");
        }
        (ProjectionKind::Pu1, _) => {
            let b = c.b_n.ok_or_else(|| invalid("missing 𝔟ₙ"))?.value;
            l * b * d * d - c.c_n.value * phi * d.powi(n as i32 - 2)
        }
        (ProjectionKind::Pu2, 3) => -c.c_n.value * phi * d,
        (ProjectionKind::Pu2, 4) => {
            let b4 = c.b4.ok_or_else(|| invalid("missing 𝔟₄"))?.value;
            let k4 = c.k4.ok_or_else(|| invalid("missing n = 4 constant"))?.value;
            b4 * l * d * d * d.ln().abs() - c.c_n.value * d * d * phi - k4 * l * d * d
        }
        (ProjectionKind::Pu2, 5) => {
            let bb = c.bbar5.ok_or_else(|| invalid("missing n = 5 constant"))?.value;
            bb * l * d * d - c.c_n.value * d.powi(3) * phi
        }
        (ProjectionKind::Pu2, _) => return refuse("the shifted expansion is only available for n ≤ 5"),
    }))
}

pub fn projection_prediction(inp: &PredictionInput, c: &StructuralConstants) -> Result<Prediction> {
    if c.n != inp.n {
        return Err(Error::DimensionMismatch { expected: c.n, got: inp.n });
    }
    if inp.grad_phi.len() != inp.n {
        return Err(Error::DimensionMismatch { expected: inp.n, got: inp.grad_phi.len() });
    }
    if !(inp.delta > 0.0) || !inp.phi.is_finite() {
        return Err(invalid("prediction needs δ > 0 and a finite Robin value"));
    }
    if inp.nu != 1 {
        return Err(Error::Regime(format!("single-bubble expansion requested for ν = {}", inp.nu)));
    }
    let n = inp.n;
    let m = (n as f64 - 2.0) / 2.0;
    let i3 = self_interaction_term(inp, c)?;
    let (dilation, formula) = match inp.u0_at_center {
        Some(u0) if !(u0 > 0.0) => {
            return Err(Error::Regime(format!("background term needs u₀(ξ) > 0, got {u0}")));
        }
        Some(u0) => {
            let bg = c.a_n.value * u0 * inp.delta.powf(m);
            (bg + i3.unwrap_or(0.0), if i3.is_some() { "background + self-interaction" } else { "background" })
        }
        None => (i3.expect("present without background"), "self-interaction"),
    };
    let scale = -c.e_n.value * inp.delta.powi(n as i32 - 1);
    let translation = inp.grad_phi.iter().map(|g| scale * g).collect();
    Ok(Prediction { dilation, translation, formula: format!("{formula} ({}, n = {n})", inp.kind) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::structural_constants;

    fn input(n: usize, kind: ProjectionKind) -> PredictionInput {
        PredictionInput { n, kind, lambda: 2.0, delta: 0.05, nu: 1, u0_at_center: None, phi: 1.0, grad_phi: vec![0.0; n] }
    }

    #[test]
    fn closed_forms_and_refusals() {
        let c5 = structural_constants(5).unwrap();
        let p = projection_prediction(&input(5, ProjectionKind::Pu1), &c5).unwrap();
        let want = 2.0 * c5.b_n.unwrap().value * 0.05f64.powi(2) - c5.c_n.value * 0.05f64.powi(3);
        assert!((p.dilation - want).abs() < 1e-15);
        assert!(p.translation.iter().all(|t| *t == 0.0));

        let c3 = structural_constants(3).unwrap();
        let p = projection_prediction(&input(3, ProjectionKind::Pu2), &c3).unwrap();
        assert!((p.dilation + c3.c_n.value * 0.05).abs() < 1e-15);
        assert!(matches!(projection_prediction(&input(3, ProjectionKind::Pu1), &c3), Err(Error::Regime(_))));

        let c6 = structural_constants(6).unwrap();
        assert!(matches!(projection_prediction(&input(6, ProjectionKind::Pu2), &c6), Err(Error::Regime(_))));
        let mut two = input(5, ProjectionKind::Pu1);
        two.nu = 2;
        assert!(matches!(projection_prediction(&two, &c5), Err(Error::Regime(_))));
        let mut neg = input(3, ProjectionKind::Pu1);
        neg.u0_at_center = Some(-1.0);
        assert!(matches!(projection_prediction(&neg, &c3), Err(Error::Regime(_))));
        neg.u0_at_center = Some(2.0);
        let p = projection_prediction(&neg, &c3).unwrap();
        assert!((p.dilation - c3.a_n.value * 2.0 * 0.05f64.sqrt()).abs() < 1e-14);
    }
}
