//! Reference stability rates: which power (and log factor) of `Γ` bounds
//! the distance to the bubble manifold in each regime.

use crate::error::{invalid, Error, Result};
use crate::solver::ProjectionKind;
use std::fmt;
use std::str::FromStr;

/// Where the bubble centers sit relative to the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryRegime {
    Interior,
    NearBoundary,
}

impl fmt::Display for BoundaryRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryRegime::Interior => "interior",
            BoundaryRegime::NearBoundary => "boundary",
        })
    }
}

/// The tuple that selects a row of the rate tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegimeInputs {
    pub n: usize,
    pub nu: usize,
    pub u0_positive: bool,
    pub boundary: BoundaryRegime,
    pub kind: ProjectionKind,
}

impl RegimeInputs {
    /// Label such as `n5-interior-u0zero-pu1`; `-nu2` is appended for ν > 1.
    pub fn label(&self) -> String {
        let u0 = if self.u0_positive { "u0pos" } else { "u0zero" };
        let mut s = format!("n{}-{}-{u0}-{}", self.n, self.boundary, self.kind);
        if self.nu != 1 {
            s.push_str(&format!("-nu{}", self.nu));
        }
        s
    }
}

impl fmt::Display for RegimeInputs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for RegimeInputs {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Parse(format!("regime '{s}': {why} (expected e.g. n5-interior-u0zero-pu1[-nu2])"));
        let parts: Vec<&str> = s.split('-').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(bad("wrong number of fields"));
        }
        let n = parts[0].strip_prefix('n').and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad dimension"))?;
        let boundary = match parts[1] {
            "interior" => BoundaryRegime::Interior,
            "boundary" | "near-boundary" => BoundaryRegime::NearBoundary,
            _ => return Err(bad("boundary field must be 'interior' or 'boundary'")),
        };
        let u0_positive = match parts[2] {
            "u0zero" => false,
            "u0pos" => true,
            _ => return Err(bad("background field must be 'u0zero' or 'u0pos'")),
        };
        let kind = parts[3].parse().map_err(|_| bad("projection must be pu1 or pu2"))?;
        let nu = match parts.get(4) {
            Some(p) => p.strip_prefix("nu").and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad bubble count"))?,
            None => 1,
        };
        Ok(RegimeInputs { n, nu, u0_positive, boundary, kind })
    }
}

/// A validated regime with its reference rate `t^a·|log t|^ℓ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaRegime {
    pub inputs: RegimeInputs,
    pub exponent: f64,
    pub log_power: f64,
}

impl ZetaRegime {
    pub fn label(&self) -> String {
        self.inputs.label()
    }

    /// `ζ(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        t.powf(self.exponent) * t.ln().abs().powf(self.log_power)
    }
}

fn refuse(inp: &RegimeInputs, why: String) -> Error {
    Error::Regime(format!("{}: {why}", inp.label()))
}

/// Projection kind the interior table is stated for.
fn interior_kind(n: usize, u0_positive: bool) -> ProjectionKind {
    if n <= 4 && !u0_positive {
        ProjectionKind::Pu2
    } else {
        ProjectionKind::Pu1
    }
}

/// Projection kind the near-boundary table is stated for.
fn boundary_kind(n: usize, u0_positive: bool) -> ProjectionKind {
    if n == 3 || (n <= 5 && !u0_positive) {
        ProjectionKind::Pu2
    } else {
        ProjectionKind::Pu1
    }
}

/// Look up the reference rate. Every input either maps to a row or is
/// refused with the violated hypothesis.
pub fn zeta_reference(inp: &RegimeInputs) -> Result<ZetaRegime> {
    let RegimeInputs { n, nu, u0_positive, boundary, kind } = *inp;
    if n < 3 {
        return Err(invalid(format!("dimension must be at least 3, got {n}")));
    }
    if nu == 0 {
        return Err(invalid("at least one bubble is required"));
    }
    let nf = n as f64;
    let (exponent, log_power) = match boundary {
        BoundaryRegime::Interior => {
            let stated = interior_kind(n, u0_positive);
            if kind != stated {
                // The one documented alternative: n = 5, u₀ = 0 with the shifted projection.
                if n == 5 && !u0_positive && kind == ProjectionKind::Pu2 {
                    return Ok(ZetaRegime { inputs: *inp, exponent: 1.0, log_power: 0.0 });
                }
                return Err(refuse(inp, format!("interior rates for n = {n}, u₀ {} are stated for {stated} only", if u0_positive { "> 0" } else { "= 0" })));
            }
            match n {
                3 | 4 => (1.0, 0.0),
                5 if u0_positive => (1.0, 0.0),
                5 => (0.75, 0.0),
                6 => (1.0, 0.5),
                _ if nu == 1 => (1.0, 0.0),
                _ => ((nf + 2.0) / (2.0 * (nf - 2.0)), 0.0),
            }
        }
        BoundaryRegime::NearBoundary => {
            if nu != 1 {
                return Err(refuse(inp, format!("near-boundary rates are only known for a single bubble, got ν = {nu}")));
            }
            let stated = boundary_kind(n, u0_positive);
            if kind != stated {
                // Shifted projection with a positive background for n = 4, 5 gives a linear rate.
                if (n == 4 || n == 5) && u0_positive && kind == ProjectionKind::Pu2 {
                    return Ok(ZetaRegime { inputs: *inp, exponent: 1.0, log_power: 0.0 });
                }
                return Err(refuse(inp, format!("near-boundary rates for n = {n}, u₀ {} are stated for {stated} only", if u0_positive { "> 0" } else { "= 0" })));
            }
            match n {
                3 => (1.0, 0.0),
                4 if !u0_positive => (1.0, 0.0),
                4 | 5 => ((nf - 2.0) / (nf - 1.0), 0.0),
                6 => (1.0, 0.5),
                _ => ((nf + 2.0) / (2.0 * (nf - 1.0)), 0.0),
            }
        }
    };
    Ok(ZetaRegime { inputs: *inp, exponent, log_power })
}
