//! Interaction size `q_ij` and separation `ℛ_ij` of two bubbles.

use crate::bubbles::BubbleParams;
use crate::error::{invalid, Error, Result};

/// Which term of `ℛ_ij` dominates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairRegime {
    DistanceDominated,
    /// `√(δᵢ/δⱼ)` is the largest term.
    ScaleDominatedI,
    /// `√(δⱼ/δᵢ)` is the largest term.
    ScaleDominatedJ,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairInteraction {
    pub q: f64,
    pub r: f64,
    pub regime: PairRegime,
}

/// `q = (δᵢ/δⱼ + δⱼ/δᵢ + |ξᵢ−ξⱼ|²/(δᵢδⱼ))^{−(n−2)/2}` and
/// `ℛ = max(√(δᵢ/δⱼ), √(δⱼ/δᵢ), |ξᵢ−ξⱼ|/√(δᵢδⱼ))`.
pub fn pair_quantities(bi: &BubbleParams, bj: &BubbleParams) -> Result<PairInteraction> {
    if bi.n() != bj.n() {
        return Err(Error::DimensionMismatch { expected: bi.n(), got: bj.n() });
    }
    if bi == bj {
        return Err(invalid("pair quantities need two distinct bubbles"));
    }
    let (di, dj) = (bi.delta(), bj.delta());
    let d2: f64 = bi.xi().iter().zip(bj.xi()).map(|(a, b)| (a - b) * (a - b)).sum();
    let m = (bi.n() as f64 - 2.0) / 2.0;
    let q = (di / dj + dj / di + d2 / (di * dj)).powf(-m);
    let terms = [(d2 / (di * dj)).sqrt(), (di / dj).sqrt(), (dj / di).sqrt()];
    let (k, r) = terms.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bk, bv), (k, v)| if *v > bv { (k, *v) } else { (bk, bv) });
    let regime = match k {
        0 => PairRegime::DistanceDominated,
        1 => PairRegime::ScaleDominatedI,
        _ => PairRegime::ScaleDominatedJ,
    };
    Ok(PairInteraction { q, r, regime })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let a = BubbleParams::new(3, 0.1, vec![0.0; 3]).unwrap();
        let b = BubbleParams::new(3, 0.1, vec![0.1, 0.0, 0.0]).unwrap();
        let p = pair_quantities(&a, &b).unwrap();
        assert!((p.q - 3f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(p.regime, PairRegime::DistanceDominated);
        for n in [3usize, 4, 5] {
            let a = BubbleParams::centered(n, 0.3).unwrap();
            let b = BubbleParams::new(n, 0.3, vec![0.0; n]).unwrap().with_xi(vec![0.0; n]).unwrap();
            let c = BubbleParams::centered(n, 0.3 * (1.0 + 1e-12)).unwrap();
            assert!(pair_quantities(&a, &b).is_err());
            let p = pair_quantities(&a, &c).unwrap();
            assert!((p.q - 2f64.powf(-(n as f64 - 2.0) / 2.0)).abs() < 1e-10);
        }
        let a = BubbleParams::centered(5, 1e-2).unwrap();
        let b = BubbleParams::centered(5, 1e-4).unwrap();
        let p = pair_quantities(&a, &b).unwrap();
        assert!((p.q - (0.01f64 + 100.0).powf(-1.5)).abs() < 1e-18);
        assert!((p.q / 1e-3 - 1.0).abs() < 1e-3);
        assert_eq!(p.regime, PairRegime::ScaleDominatedI);
    }
}
