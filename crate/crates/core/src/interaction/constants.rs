//! Structural constants of the single-bubble expansions, computed by radial
//! quadrature of the unit bubble `U = U_{1,0}` and `Z⁰ = δ∂_δU|_{δ=1}`.

use super::integrals::{quad_err, radial_integral_with};
use crate::bubbles::{critical_exponent, dimensional_constant, BubbleParams};
use crate::error::{invalid, Error, Result};
use crate::quadrature::QuadOptions;
use std::io::Write;

/// A constant with an error bar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantValue {
    pub value: f64,
    pub stderr: f64,
}

impl ConstantValue {
    fn scale(self, s: f64) -> Self {
        ConstantValue { value: s * self.value, stderr: s.abs() * self.stderr }
    }

    fn plus(self, o: ConstantValue) -> Self {
        ConstantValue { value: self.value + o.value, stderr: self.stderr + o.stderr }
    }

    /// True when the error bar excludes zero on the positive side.
    pub fn is_positive(&self) -> bool {
        self.value > 0.0 && self.value > self.stderr
    }
}

/// Constants for one dimension. Entries that are not defined in a given
/// dimension are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralConstants {
    pub n: usize,
    /// `p∫U^{p−1}Z⁰`.
    pub a_n: ConstantValue,
    /// `aₙ·𝔞ₙ`.
    pub c_n: ConstantValue,
    /// `𝔠₃/2`, only for `n = 3`.
    pub b3: Option<ConstantValue>,
    /// `3√2∫U^{p−1}Z⁰`, only for `n = 4`.
    pub b4: Option<ConstantValue>,
    /// `∫U Z⁰`, for `n ≥ 5`.
    pub b_n: Option<ConstantValue>,
    /// Boundary-layer constant of the shifted projection, only for `n = 5`.
    pub bbar5: Option<ConstantValue>,
    /// Constant part of the `δ²` term for `n = 4`. Not sign-definite.
    pub k4: Option<ConstantValue>,
    /// Translation constant.
    pub e_n: ConstantValue,
}

/// `|S^{n−1}|∫_0^∞ f(r) r^{n−1} dr` at two precisions; the error bar is the
/// larger of their difference and the fine estimate's own error.
fn radial_constant(n: usize, f: impl Fn(f64) -> f64 + Copy) -> Result<ConstantValue> {
    let coarse = radial_integral_with(n, f, f64::INFINITY, &[1.0], QuadOptions { abs_tol: 1e-12, rel_tol: 1e-8, max_intervals: 4000 })?;
    let fine = radial_integral_with(n, f, f64::INFINITY, &[1.0], QuadOptions { abs_tol: 1e-16, rel_tol: 1e-12, max_intervals: 20000 })?;
    if !fine.value.is_finite() {
        return Err(quad_err(invalid("non-finite constant")));
    }
    Ok(ConstantValue { value: fine.value, stderr: (fine.value - coarse.value).abs().max(fine.error) })
}

/// `∫U^{p−1}Z⁰` over `ℝⁿ`.
fn core_integral(n: usize) -> Result<ConstantValue> {
    let u = BubbleParams::centered(n, 1.0)?;
    let p = critical_exponent(n);
    radial_constant(n, |r| u.profile(r * r).powf(p - 1.0) * u.dilation_profile(r * r))
}

/// `∫U Z⁰` for `n ≥ 5`. Rejects `n ≤ 4`, where the integrand is not
/// absolutely integrable.
pub fn bubble_dilation_pairing(n: usize) -> Result<ConstantValue> {
    if n < 5 {
        return Err(Error::Regime(format!("∫U·Z⁰ diverges for n = {n}; use the n = 3 or n = 4 constant")));
    }
    let u = BubbleParams::centered(n, 1.0)?;
    radial_constant(n, |r| u.profile(r * r) * u.dilation_profile(r * r))
}

pub fn structural_constants(n: usize) -> Result<StructuralConstants> {
    if n < 3 {
        return Err(invalid(format!("dimension must be at least 3, got {n}")));
    }
    let nf = n as f64;
    let p = critical_exponent(n);
    let a = dimensional_constant(n);
    let m = (nf - 2.0) / 2.0;
    let u = BubbleParams::centered(n, 1.0)?;
    let core = core_integral(n)?;
    let a_n = core.scale(p);
    let c_n = a_n.scale(a);
    let b3 = (n == 3).then(|| c_n.scale(0.5));
    let b4 = (n == 4).then(|| core.scale(3.0 * 2f64.sqrt()));
    let b_n = if n >= 5 { Some(bubble_dilation_pairing(n)?) } else { None };
    let bbar5 = if n == 5 {
        let weighted = radial_constant(n, |r| u.profile(r * r).powf(p - 1.0) * u.dilation_profile(r * r) / r)?;
        let corr = radial_constant(n, |r| u.dilation_profile(r * r) * ((1.0 + r * r).powf(-1.5) - r.powi(-3)))?;
        Some(weighted.scale(0.5 * a * p).plus(corr.scale(a)))
    } else {
        None
    };
    let k4 = if n == 4 {
        let logw = radial_constant(n, |r| r.ln() * u.profile(r * r).powf(p - 1.0) * u.dilation_profile(r * r))?;
        let corr = radial_constant(n, |r| u.dilation_profile(r * r) * (1.0 / (1.0 + r * r) - 1.0 / (r * r)))?;
        Some(logw.scale(0.5 * a * p).plus(corr.scale(-a)))
    } else {
        None
    };
    let e_n = radial_constant(n, |r| r * r * u.profile(r * r).powf(p) / (1.0 + r * r))?.scale(0.5 * a * p * 2.0 * m / nf);
    let out = StructuralConstants { n, a_n, c_n, b3, b4, b_n, bbar5, k4, e_n };
    for (name, c) in out.signed_entries() {
        if !c.is_positive() {
            return Err(Error::Postcondition(format!("{name} = {:.6e} ± {:.1e} is not positive for n = {n}", c.value, c.stderr)));
        }
    }
    Ok(out)
}

impl StructuralConstants {
    /// Named entries that are defined in this dimension.
    pub fn entries(&self) -> Vec<(&'static str, ConstantValue)> {
        let mut v = vec![("a_n", self.a_n), ("c_n", self.c_n)];
        for (name, c) in [("b3", self.b3), ("b4", self.b4), ("b_n", self.b_n), ("bbar5", self.bbar5), ("k4", self.k4)] {
            if let Some(c) = c {
                v.push((name, c));
            }
        }
        v.push(("e_n", self.e_n));
        v
    }

    /// Entries that must be positive.
    fn signed_entries(&self) -> Vec<(&'static str, ConstantValue)> {
        self.entries().into_iter().filter(|(name, _)| *name != "k4").collect()
    }
}

/// Write `constant,n,value,stderr,method` rows.
pub fn write_constants_csv<W: Write>(mut w: W, tables: &[StructuralConstants]) -> Result<()> {
    writeln!(w, "constant,n,value,stderr,method")?;
    for t in tables {
        for (name, c) in t.entries() {
            writeln!(w, "{name},{},{:.15e},{:.3e},radial-quadrature", t.n, c.value, c.stderr)?;
        }
    }
    Ok(())
}
