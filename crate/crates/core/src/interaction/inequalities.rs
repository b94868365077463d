//! Randomized checks of elementary bounds for `(a+b)^s` expansions.
//!
//! Each check samples `(a, b, s)`, evaluates the ratio of the expansion
//! remainder to the claimed bound and reports the largest ratio seen. Ratios
//! are computed in the scale-free form `a^s·f(b/a)` with a series for small
//! `b/a`, so cancellation does not masquerade as a large constant.

use crate::error::{invalid, Result};
use crate::exec::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest acceptable constant.
pub const INEQUALITY_BOUND: f64 = 1e3;

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub max_constant: f64,
    /// Sample `(a, b, s)` attaining the maximum.
    pub worst: (f64, f64, f64),
    pub samples: usize,
}

impl InequalityCheck {
    pub fn passed(&self) -> bool {
        self.max_constant.is_finite() && self.max_constant <= INEQUALITY_BOUND
    }
}

/// Generalized binomial coefficient `C(s, k)`.
fn binom(s: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (s - j as f64) / (j as f64 + 1.0))
}

/// `(1+t)^s − Σ_{k≤order} C(s,k) t^k` for `t > −1`.
fn remainder(s: f64, t: f64, order: usize) -> f64 {
    if t.abs() < 0.25 {
        let mut acc = 0.0;
        let mut term = binom(s, order + 1) * t.powi(order as i32 + 1);
        let mut k = order + 1;
        while k < order + 80 {
            acc += term;
            term *= (s - k as f64) / (k as f64 + 1.0) * t;
            if term.abs() <= 1e-18 * acc.abs() {
                break;
            }
            k += 1;
        }
        return acc;
    }
    let mut v = (s * t.ln_1p()).exp_m1();
    for k in 1..=order {
        v -= binom(s, k) * t.powi(k as i32);
    }
    v
}

type Case = fn(f64, f64) -> (f64, f64);

/// Each case returns `(|remainder|, bound)` for `a = 1`, `b = t`.
fn sum_power_small(s: f64, t: f64) -> (f64, f64) {
    ((remainder(s, t, 0) - t.powf(s)).abs(), t.min(t.powf(s - 1.0)))
}

fn sum_power_large(s: f64, t: f64) -> (f64, f64) {
    ((remainder(s, t, 0) - t.powf(s)).abs(), t + t.powf(s - 1.0))
}

fn first_difference(s: f64, t: f64) -> (f64, f64) {
    let lead = if s > 1.0 { t } else { 0.0 };
    (remainder(s, t, 0).abs(), lead + t.powf(s))
}

fn first_order(s: f64, t: f64) -> (f64, f64) {
    let lead = if s > 2.0 { t * t } else { 0.0 };
    (remainder(s, t, 1).abs(), lead + t.powf(s))
}

fn second_order(s: f64, t: f64) -> (f64, f64) {
    let lead = if s > 3.0 { t.powi(3) } else { 0.0 };
    (remainder(s, t, 2).abs(), lead + t.powf(s))
}

fn signed_first_order(s: f64, t: f64) -> (f64, f64) {
    (remainder(s, t, 1).abs(), (t * t).min(t.abs().powf(s)))
}

type CaseSpec = (&'static str, (f64, f64), bool, bool, Case);

/// Run every check with `samples` draws each. `|b/a|` is log-uniform over
/// twelve decades; `s` is uniform over each case's range.
pub fn inequality_suite(samples: usize, seed: u64, exec: Execution) -> Result<Vec<InequalityCheck>> {
    if samples == 0 {
        return Err(invalid("inequality suite needs at least one sample"));
    }
    // (name, s range, signed b allowed, symmetric in a and b)
    let cases: [CaseSpec; 6] = [
        ("sum-power-small", (1.0, 2.0), false, true, sum_power_small),
        ("sum-power-large", (2.0, 6.0), false, true, sum_power_large),
        ("first-difference", (0.05, 6.0), false, false, first_difference),
        ("first-order", (1.0, 6.0), false, false, first_order),
        ("second-order", (2.0, 6.0), false, false, second_order),
        ("signed-first-order", (1.0, 2.0), true, false, signed_first_order),
    ];
    let out = exec.map_range(cases.len(), |c| {
        let (name, (lo, hi), signed, symmetric, f) = cases[c];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let mut best = (0.0f64, (1.0, 1.0, lo));
        for _ in 0..samples {
            let s = lo + (hi - lo) * rng.gen::<f64>();
            let a = 10f64.powf(rng.gen_range(-3.0..3.0));
            let mut t = 10f64.powf(rng.gen_range(-6.0..6.0));
            if signed {
                // b ∈ [−a, ∞): negative draws land in (−1, 0).
                if rng.gen::<bool>() {
                    t = -(t / (1.0 + t));
                }
            }
            // Symmetric bounds are checked with the larger argument first.
            let t = if symmetric && t > 1.0 { 1.0 / t } else { t };
            let (lhs, rhs) = f(s, t);
            if rhs <= 0.0 {
                continue;
            }
            let ratio = lhs / rhs;
            if ratio > best.0 || !ratio.is_finite() {
                best = (ratio, (a, a * t, s));
            }
        }
        InequalityCheck { name, max_constant: best.0, worst: best.1, samples }
    });
    Ok(out)
}
