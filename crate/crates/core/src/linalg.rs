//! Small dense linear algebra: row-major matrices, Cholesky solves and a
//! one-sided Jacobi SVD.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged matrix rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: b.len(),
        });
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > scale * 1e-13) {
            return Err(Error::Singular(format!(
                "matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Right singular structure of a matrix: singular values in non-increasing
/// order and the matching right singular vectors as columns.
#[derive(Debug, Clone)]
pub struct RightSvd {
    pub singular_values: Vec<f64>,
    /// `cols × r` matrix, `r = min(rows, cols)` (columns completed to an
    /// orthonormal set when the matrix is rank deficient).
    pub right_vectors: Matrix,
}

/// Orthogonalizes the columns of `m` in place with Hestenes (one-sided
/// Jacobi) rotations and returns the accumulated rotation matrix.
fn hestenes(m: &mut Matrix) -> Matrix {
    let (rows, cols) = (m.rows(), m.cols());
    // Column-major working copy keeps the inner loops contiguous.
    let mut colv: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut rot: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();
    const MAX_SWEEPS: usize = 80;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&colv[p], &colv[p]);
                let beta = dot(&colv[q], &colv[q]);
                let gamma = dot(&colv[p], &colv[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = colv.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
                let (lo, hi) = rot.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = colv[j][i];
        }
    }
    let mut v = Matrix::zeros(cols, cols);
    for j in 0..cols {
        for i in 0..cols {
            v[(i, j)] = rot[j][i];
        }
    }
    v
}

/// Completes `vectors` (orthonormal, each of length `dim`) with unit basis
/// directions until `target` vectors are present.
fn complete_basis(vectors: &mut Vec<Vec<f64>>, dim: usize, target: usize) {
    let mut e = 0;
    while vectors.len() < target && e < dim {
        let mut cand = vec![0.0; dim];
        cand[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for v in vectors.iter() {
                let d = dot(&cand, v);
                for (c, x) in cand.iter_mut().zip(v) {
                    *c -= d * x;
                }
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        if norm > 1e-6 {
            cand.iter_mut().for_each(|c| *c /= norm);
            vectors.push(cand);
        }
    }
}

/// Singular values and right singular vectors of `a` without forming `aᵀa`.
pub fn right_svd(a: &Matrix) -> RightSvd {
    let (n, d) = (a.rows(), a.cols());
    let r = n.min(d);
    // (value, vector) pairs, vectors of length d.
    let mut pairs: Vec<(f64, Vec<f64>)> = if n >= d {
        let mut work = a.clone();
        let v = hestenes(&mut work);
        (0..d)
            .map(|j| {
                let sigma = work.column(j).iter().map(|x| x * x).sum::<f64>().sqrt();
                (sigma, v.column(j))
            })
            .collect()
    } else {
        // aᵀ = U Σ Wᵀ after orthogonalizing its n columns; the right singular
        // vectors of a are the normalized columns of the rotated aᵀ.
        let mut work = a.transpose();
        hestenes(&mut work);
        (0..n)
            .map(|j| {
                let col = work.column(j);
                let sigma = dot(&col, &col).sqrt();
                (sigma, col)
            })
            .collect()
    };
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs.truncate(r);

    let sigma_max = pairs.first().map_or(0.0, |p| p.0);
    let tol = sigma_max * (n.max(d) as f64) * f64::EPSILON * 16.0;
    let mut values = Vec::with_capacity(r);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(r);
    for (sigma, mut vec) in pairs {
        values.push(sigma);
        if sigma <= tol || sigma == 0.0 {
            continue;
        }
        if n < d {
            vec.iter_mut().for_each(|x| *x /= sigma);
        }
        vectors.push(vec);
    }
    complete_basis(&mut vectors, d, r);
    let mut right = Matrix::zeros(d, r);
    for (j, v) in vectors.iter().enumerate() {
        for i in 0..d {
            right[(i, j)] = v[i];
        }
    }
    RightSvd {
        singular_values: values,
        right_vectors: right,
    }
}
