//! Closed-form Aubin–Talenti bubbles `U = aₙ (δ/(δ²+|x−ξ|²))^{(n−2)/2}` and
//! their parameter derivatives.
//!
//! Every quantity here is exact up to floating-point roundoff; nothing is
//! discretized. Radial helpers work with `s = δ² + |x−ξ|²` so that the
//! dilation derivative can be written in factored form without cancellation.

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_half_line, QuadOptions};
use std::f64::consts::PI;

/// Ambient dimension `n ≥ 3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid(format!("dimension must be at least 3, got {n}")));
        }
        Ok(Dimension(n))
    }
    pub fn get(self) -> usize {
        self.0
    }
}

/// Which parameter derivative: `0` is the dilation `δ∂_δ`, `k ≥ 1` the
/// translation `δ∂_{ξᵏ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DerivativeIndex(pub usize);

impl DerivativeIndex {
    pub const DILATION: DerivativeIndex = DerivativeIndex(0);
    pub fn translation(k: usize) -> Self {
        DerivativeIndex(k)
    }
    pub fn is_dilation(self) -> bool {
        self.0 == 0
    }
}

/// `p = (n+2)/(n−2)`.
pub fn critical_exponent(n: usize) -> f64 {
    (n as f64 + 2.0) / (n as f64 - 2.0)
}

/// `aₙ = (n(n−2))^{(n−2)/4}`.
pub fn dimensional_constant(n: usize) -> f64 {
    let nf = n as f64;
    (nf * (nf - 2.0)).powf((nf - 2.0) / 4.0)
}

/// `Γ(k/2)` for a positive integer `k`.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k > 0, "gamma_half needs k > 0");
    let mut x = if k % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut j = if k % 2 == 0 { 2 } else { 1 };
    while j < k {
        x *= j as f64 / 2.0;
        j += 2;
    }
    x
}

/// Surface measure of the unit sphere `S^{n−1} ⊂ ℝⁿ`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Scale, center and dimension of one bubble.
#[derive(Clone, Debug, PartialEq)]
pub struct BubbleParams {
    n: usize,
    delta: f64,
    xi: Vec<f64>,
}

impl BubbleParams {
    pub fn new(n: usize, delta: f64, xi: Vec<f64>) -> Result<Self> {
        Dimension::new(n)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!("bubble scale must be positive and finite, got {delta}")));
        }
        if xi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: xi.len() });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(invalid("bubble center must be finite"));
        }
        Ok(BubbleParams { n, delta, xi })
    }

    /// Bubble centered at the origin.
    pub fn centered(n: usize, delta: f64) -> Result<Self> {
        Self::new(n, delta, vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.n, delta, self.xi.clone())
    }
    pub fn with_xi(&self, xi: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.delta, xi)
    }

    fn m(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }

    /// `aₙ δ^{(n−2)/2}`, the prefactor of `s^{−(n−2)/2}`.
    fn amplitude(&self) -> f64 {
        dimensional_constant(self.n) * self.delta.powf(self.m())
    }

    fn offset_sq(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.xi).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    /// `U` as a function of the squared distance to the center.
    pub fn profile(&self, r2: f64) -> f64 {
        let d2 = self.delta * self.delta;
        dimensional_constant(self.n) * (self.delta / (d2 + r2)).powf(self.m())
    }

    /// `Z⁰` as a function of the squared distance to the center.
    pub fn dilation_profile(&self, r2: f64) -> f64 {
        let d2 = self.delta * self.delta;
        self.m() * self.profile(r2) * (r2 - d2) / (d2 + r2)
    }

    /// Unchecked `U(x)`; `x` must have length `n`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.profile(self.offset_sq(x))
    }

    /// Unchecked `Zᵏ(x)`.
    pub fn derivative(&self, k: DerivativeIndex, x: &[f64]) -> f64 {
        let r2 = self.offset_sq(x);
        if k.0 == 0 {
            self.dilation_profile(r2)
        } else {
            let d2 = self.delta * self.delta;
            let y = x[k.0 - 1] - self.xi[k.0 - 1];
            2.0 * self.m() * self.delta * self.profile(r2) * y / (d2 + r2)
        }
    }

    /// Closed-form `ΔU(x)`.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let r2 = self.offset_sq(x);
        let s = self.delta * self.delta + r2;
        let (m, a, n) = (self.m(), self.amplitude(), self.n as f64);
        // U = a s^{-m};  Δ F(s) = 4 r² F'' + 2n F'
        let f1 = -m * a * s.powf(-m - 1.0);
        let f2 = m * (m + 1.0) * a * s.powf(-m - 2.0);
        4.0 * r2 * f2 + 2.0 * n * f1
    }

    /// Closed-form `ΔZᵏ(x)`.
    pub fn derivative_laplacian(&self, k: DerivativeIndex, x: &[f64]) -> f64 {
        let r2 = self.offset_sq(x);
        let d2 = self.delta * self.delta;
        let s = d2 + r2;
        let (m, a, n) = (self.m(), self.amplitude(), self.n as f64);
        if k.0 == 0 {
            // Z⁰ = m a (s^{-m} − 2δ² s^{-m-1})
            let g1 = m * a * (-m * s.powf(-m - 1.0) + 2.0 * d2 * (m + 1.0) * s.powf(-m - 2.0));
            let g2 = m * a * (m * (m + 1.0) * s.powf(-m - 2.0) - 2.0 * d2 * (m + 1.0) * (m + 2.0) * s.powf(-m - 3.0));
            4.0 * r2 * g2 + 2.0 * n * g1
        } else {
            // Zᵏ = yᵏ h(s),  h = 2 m δ a s^{-m-1};  Δ(yᵏ h) = yᵏ (4 r² h'' + (2n+4) h')
            let c = 2.0 * m * self.delta * a;
            let h1 = -c * (m + 1.0) * s.powf(-m - 2.0);
            let h2 = c * (m + 1.0) * (m + 2.0) * s.powf(-m - 3.0);
            let y = x[k.0 - 1] - self.xi[k.0 - 1];
            y * (4.0 * r2 * h2 + (2.0 * n + 4.0) * h1)
        }
    }
}

/// `U_{δ,ξ}(x)`.
pub fn eval_bubble(b: &BubbleParams, x: &[f64]) -> Result<f64> {
    b.check(x)?;
    Ok(b.value(x))
}

/// `Z⁰ = δ∂_δU` for `k = 0`, `Zᵏ = δ∂_{ξᵏ}U` for `k ≥ 1`.
pub fn eval_param_derivative(b: &BubbleParams, k: DerivativeIndex, x: &[f64]) -> Result<f64> {
    b.check(x)?;
    if k.0 > b.n {
        return Err(invalid(format!("derivative index {} exceeds dimension {}", k.0, b.n)));
    }
    Ok(b.derivative(k, x))
}

/// `max |ΔU + U^p|` over the samples, using the closed-form Laplacian.
pub fn bubble_pde_residual(b: &BubbleParams, samples: &[Vec<f64>]) -> Result<f64> {
    let p = critical_exponent(b.n);
    let mut worst: f64 = 0.0;
    for x in samples {
        b.check(x)?;
        worst = worst.max((b.laplacian(x) + b.value(x).powf(p)).abs());
    }
    Ok(worst)
}

/// `max |ΔZᵏ + pU^{p−1}Zᵏ|` over the samples and all `k`.
pub fn linearized_residual(b: &BubbleParams, samples: &[Vec<f64>]) -> Result<f64> {
    let p = critical_exponent(b.n);
    let mut worst: f64 = 0.0;
    for x in samples {
        b.check(x)?;
        let u = b.value(x);
        for k in 0..=b.n {
            let k = DerivativeIndex(k);
            let r = b.derivative_laplacian(k, x) + p * u.powf(p - 1.0) * b.derivative(k, x);
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// Sobolev constant `S₀` and bubble energy `J(U)`, by radial quadrature of
/// `∫|∇U|²` and `∫U^{p+1}` for `U = U_{1,0}`.
pub fn sobolev_energy(n: usize) -> Result<(f64, f64)> {
    Dimension::new(n)?;
    let b = BubbleParams::centered(n, 1.0)?;
    let p = critical_exponent(n);
    let area = sphere_area(n);
    let nf = n as f64;
    let m = (nf - 2.0) / 2.0;
    let a = dimensional_constant(n);
    let opts = QuadOptions::rel(1e-13);
    let grad = integrate_half_line(
        |r| {
            let du = -2.0 * m * r * a * (1.0 + r * r).powf(-m - 1.0);
            du * du * r.powf(nf - 1.0)
        },
        1.0,
        opts,
    )?;
    let pot = integrate_half_line(|r| b.profile(r * r).powf(p + 1.0) * r.powf(nf - 1.0), 1.0, opts)?;
    let k1 = area * grad.value;
    let k2 = area * pot.value;
    let s0 = k1 / k2.powf(2.0 / (p + 1.0));
    let j = 0.5 * k1 - k2 / (p + 1.0);
    let consistency = (j - s0.powf(nf / 2.0) / nf).abs() / j;
    if consistency > 1e-8 {
        return Err(Error::Quadrature(format!("energy identity off by {consistency:.2e}")));
    }
    Ok((s0, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponents_and_constants() {
        assert_eq!(critical_exponent(3), 5.0);
        assert_eq!(critical_exponent(4), 3.0);
        assert_eq!(critical_exponent(6), 2.0);
        assert_relative_eq!(dimensional_constant(3), 1.316074, epsilon = 1e-6);
        assert_relative_eq!(dimensional_constant(4), 2.828427, epsilon = 1e-6);
        assert_relative_eq!(dimensional_constant(6), 24.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn bubble_values() {
        let a3 = dimensional_constant(3);
        let b = BubbleParams::centered(3, 1.0).unwrap();
        assert_relative_eq!(eval_bubble(&b, &[0.0; 3]).unwrap(), a3, max_relative = 1e-15);
        assert_relative_eq!(eval_bubble(&b, &[1.0, 0.0, 0.0]).unwrap(), a3 / 2f64.sqrt(), max_relative = 1e-15);
        let b5 = BubbleParams::centered(5, 0.1).unwrap();
        assert_relative_eq!(
            eval_bubble(&b5, &[0.0; 5]).unwrap(),
            dimensional_constant(5) * 10f64.powf(1.5),
            max_relative = 1e-13
        );
        assert!(eval_bubble(&b, &[0.0; 2]).is_err());
    }

    #[test]
    fn derivative_values() {
        let b = BubbleParams::centered(3, 1.0).unwrap();
        let z0 = eval_param_derivative(&b, DerivativeIndex(0), &[0.0; 3]).unwrap();
        assert_relative_eq!(z0, -dimensional_constant(3) / 2.0, max_relative = 1e-15);
        let b = BubbleParams::new(4, 0.3, vec![0.1, 0.2, -0.1, 0.0]).unwrap();
        let x = [0.4, 0.2, -0.1, 0.0];
        assert!(eval_param_derivative(&b, DerivativeIndex(0), &x).unwrap().abs() < 1e-14);
        for k in 1..=4 {
            assert_eq!(eval_param_derivative(&b, DerivativeIndex(k), b.xi()).unwrap(), 0.0);
        }
    }

    #[test]
    fn pde_residuals() {
        let samples: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                let t = i as f64 * 0.37;
                let r = 5.0 * ((i as f64 + 0.5) / 100.0);
                vec![r * t.cos(), r * t.sin() * 0.6, r * 0.8 * t.sin()]
            })
            .collect();
        let b = BubbleParams::centered(3, 1.0).unwrap();
        assert!(bubble_pde_residual(&b, &samples).unwrap() <= 1e-9);
        assert!(linearized_residual(&b, &samples).unwrap() <= 1e-8);
        let pad = |v: &Vec<f64>, n: usize| {
            let mut w = v.clone();
            w.resize(n, 0.1);
            w
        };
        let s4: Vec<_> = samples.iter().map(|v| pad(v, 4)).collect();
        let b4 = BubbleParams::centered(4, 0.5).unwrap();
        assert!(bubble_pde_residual(&b4, &s4).unwrap() <= 1e-9);
        let s7: Vec<_> = samples.iter().map(|v| pad(v, 7)).collect();
        let b7 = BubbleParams::centered(7, 1.0).unwrap();
        assert!(bubble_pde_residual(&b7, &s7).unwrap() <= 1e-8);
        assert!(linearized_residual(&b7, &s7).unwrap() <= 1e-8);
    }

    #[test]
    fn sobolev_constant_matches_closed_form() {
        for n in 3..=7 {
            let (s0, j) = sobolev_energy(n).unwrap();
            let nf = n as f64;
            // S₀ = π n(n−2) (Γ(n/2)/Γ(n))^{2/n}
            let exact = PI * nf * (nf - 2.0) * (gamma_half(n) / gamma_half(2 * n)).powf(2.0 / nf);
            assert_relative_eq!(s0, exact, max_relative = 1e-10);
            assert_relative_eq!(j, s0.powf(nf / 2.0) / nf, max_relative = 1e-8);
        }
        assert!(sobolev_energy(2).is_err());
    }
}
