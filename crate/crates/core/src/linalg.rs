//! Sparse symmetric storage, banded LDLᵀ factorization and preconditioned CG.

use crate::error::{Error, Result};

/// Compressed sparse row matrix. Symmetric operators store both triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Csr { n, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|(c, _)| *c == i).map_or(0.0, |e| e.1)).collect()
    }

    /// Largest `|i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|i| self.row(i).map(move |(c, _)| c.abs_diff(i))).max().unwrap_or(0)
    }

    /// `out = (A + diag(shift)) x`.
    pub fn apply_shifted(&self, x: &[f64], shift: Option<&[f64]>, out: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for (c, v) in self.row(i) {
                s += v * x[c];
            }
            if let Some(d) = shift {
                s += d[i] * x[i];
            }
            out[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.apply_shifted(x, None, out)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric banded `LDLᵀ` factorization without pivoting.
///
/// Used both for positive definite shifted Laplacians, where the pivot signs
/// certify definiteness, and for the mildly indefinite Newton matrices of the
/// semilinear problems, where a vanishing pivot is reported as singular.
#[derive(Clone, Debug)]
pub struct BandLdl {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i][i-bw..i]` at offsets `0..bw`.
    lower: Vec<f64>,
    d: Vec<f64>,
}

impl BandLdl {
    /// Factor `A + diag(shift)` where `A` is a symmetric CSR matrix.
    pub fn factor(a: &Csr, shift: Option<&[f64]>) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let w = bw.max(1);
        let mut lower = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c < i {
                    lower[i * w + (c + bw - i)] = v;
                } else if c == i {
                    diag[i] = v;
                }
            }
            if let Some(s) = shift {
                diag[i] += s[i];
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            // Row i: entries L[i][j] for j in lo..i, stored at offset j + bw - i.
            for j in lo..i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = lower[i * w + (j + bw - i)];
                for k in jlo..j {
                    s -= lower[i * w + (k + bw - i)] * d[k] * lower[j * w + (k + bw - j)];
                }
                lower[i * w + (j + bw - i)] = s / d[j];
            }
            let mut di = diag[i];
            for k in lo..i {
                let l = lower[i * w + (k + bw - i)];
                di -= l * l * d[k];
            }
            if !di.is_finite() || di.abs() <= 1e-14 * diag[i].abs() {
                return Err(Error::Solver(format!("singular pivot at row {i} of {n}")));
            }
            d[i] = di;
        }
        Ok(BandLdl { n, bw, lower, d })
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|v| **v < 0.0).count()
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw.max(1);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.lower[i * w + (k + bw - i)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[k] -= self.lower[i * w + (k + bw - i)] * xi;
            }
        }
        x
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned CG for `(A + diag(shift)) x = b`. Fails on a
/// non-positive curvature direction.
pub fn pcg(
    a: &Csr,
    shift: Option<&[f64]>,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = a.dim();
    let mut diag = a.diagonal();
    if let Some(s) = shift {
        for (d, v) in diag.iter_mut().zip(s) {
            *d += v;
        }
    }
    if diag.iter().any(|d| *d <= 0.0) {
        return Err(Error::Indefinite("non-positive diagonal entry".into()));
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        a.apply_shifted(&p, shift, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Indefinite(format!("non-positive curvature at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= rel_tol {
            return Ok((x, CgReport { iterations: it + 1, relative_residual: rel }));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged(format!("CG stalled after {max_iter} iterations")))
}

/// Solve a small dense symmetric system by LU with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    m.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Solver("singular dense system".into()))
}
