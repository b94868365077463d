//! Closed-form harmonic extension and Robin function of a ball of radius 1.

/// `Q(x, y) = |y|²|x − y/|y|²|² = 1 − 2x·y + |x|²|y|²`, finite as `y → 0`.
fn image_distance_sq(y: &[f64], x: &[f64]) -> f64 {
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let y2: f64 = y.iter().map(|v| v * v).sum();
    1.0 - 2.0 * xy + x2 * y2
}

/// Harmonic function of `x` equal to `|x − y|^{2−n}` on the unit sphere.
pub fn ball_harmonic_extension_h(n: usize, y: &[f64], x: &[f64]) -> f64 {
    image_distance_sq(y, x).powf(-0.5 * (n as f64 - 2.0))
}

/// Gradient of the harmonic extension with respect to the pole `y`.
pub fn harmonic_extension_pole_gradient(n: usize, y: &[f64], x: &[f64]) -> Vec<f64> {
    let nf = n as f64;
    let q = image_distance_sq(y, x);
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let c = (nf - 2.0) * q.powf(-0.5 * nf);
    x.iter().zip(y).map(|(xa, ya)| c * (xa - x2 * ya)).collect()
}

/// Regular part on the diagonal: `φ(x) = (1 − |x|²)^{2−n}`.
pub fn robin_laplace(n: usize, x: &[f64]) -> f64 {
    let x2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 - x2).powf(2.0 - n as f64)
}

/// `∇φ(x) = 2(n−2)·x·(1 − |x|²)^{1−n}`.
pub fn robin_laplace_gradient(n: usize, x: &[f64]) -> Vec<f64> {
    let nf = n as f64;
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let c = 2.0 * (nf - 2.0) * (1.0 - x2).powf(1.0 - nf);
    x.iter().map(|v| c * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_in_ball(rng: &mut ChaCha8Rng, n: usize, rmax: f64) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-rmax..rmax)).collect();
            if v.iter().map(|a| a * a).sum::<f64>() < rmax * rmax {
                return v;
            }
        }
    }

    #[test]
    fn reference_values() {
        assert_eq!(ball_harmonic_extension_h(3, &[0.0; 3], &[0.3, 0.2, 0.1]), 1.0);
        let y = [0.5, 0.0, 0.0];
        assert!((ball_harmonic_extension_h(3, &y, &y) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(robin_laplace(3, &[0.0; 3]), 1.0);
        assert!((robin_laplace(4, &[0.9, 0.0, 0.0, 0.0]) - 27.700831).abs() < 1e-5);
        let x = [0.95, 0.0, 0.0];
        assert!((robin_laplace(3, &x) / 10.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn boundary_condition_symmetry_and_harmonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3, 4, 5] {
            for _ in 0..100 {
                let y = random_in_ball(&mut rng, n, 0.95);
                let x = random_in_ball(&mut rng, n, 0.95);
                let h1 = ball_harmonic_extension_h(n, &y, &x);
                let h2 = ball_harmonic_extension_h(n, &x, &y);
                assert!((h1 - h2).abs() <= 1e-10 * h1);
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let xb: Vec<f64> = x.iter().map(|v| v / norm).collect();
                let d: f64 = xb.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let hb = ball_harmonic_extension_h(n, &y, &xb);
                assert!((hb - d.powf(2.0 - n as f64)).abs() <= 1e-12 * hb);
            }
            for _ in 0..10 {
                let y = random_in_ball(&mut rng, n, 0.6);
                let x = random_in_ball(&mut rng, n, 0.6);
                let h = 1e-3;
                let mut lap = 0.0;
                for a in 0..n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[a] += h;
                    xm[a] -= h;
                    lap += ball_harmonic_extension_h(n, &y, &xp) + ball_harmonic_extension_h(n, &y, &xm)
                        - 2.0 * ball_harmonic_extension_h(n, &y, &x);
                }
                assert!((lap / (h * h)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn gradients_match_differences() {
        let x = [0.3, -0.2, 0.4];
        let g = robin_laplace_gradient(3, &x);
        let y = [0.1, 0.25, -0.3];
        let gy = harmonic_extension_pole_gradient(3, &y, &x);
        let h = 1e-6;
        for a in 0..3 {
            let mut p = x;
            let mut m = x;
            p[a] += h;
            m[a] -= h;
            let fd = (robin_laplace(3, &p) - robin_laplace(3, &m)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-6 * (1.0 + g[a].abs()));
            let mut p = y;
            let mut m = y;
            p[a] += h;
            m[a] -= h;
            let fd = (ball_harmonic_extension_h(3, &p, &x) - ball_harmonic_extension_h(3, &m, &x)) / (2.0 * h);
            assert!((fd - gy[a]).abs() < 1e-6 * (1.0 + gy[a].abs()));
        }
    }
}
