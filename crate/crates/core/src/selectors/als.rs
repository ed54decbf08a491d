//! Rank-r matrix factorization of a partially observed matrix by damped
//! alternating least squares.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlsParams {
    pub rank: usize,
    pub max_epochs: usize,
    /// Blend between the previous factors and the exact least-squares
    /// update; 1 is plain ALS.
    pub step: f64,
    pub regularization: f64,
    /// Relative loss change below which the fit counts as converged.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for AlsParams {
    fn default() -> Self {
        AlsParams {
            rank: 3,
            max_epochs: 2000,
            step: 1.0,
            regularization: 1e-3,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    /// `rows × rank`.
    pub row_factors: Vec<Vec<f64>>,
    /// `cols × rank`.
    pub col_factors: Vec<Vec<f64>>,
    pub loss: f64,
    pub epochs: usize,
}

impl Factorization {
    pub fn predict(&self, i: usize, j: usize) -> f64 {
        dot(&self.row_factors[i], &self.col_factors[j])
    }
}

/// Squared error over observed cells plus the ridge penalty.
fn loss(cells: &[(usize, usize, f64)], u: &[Vec<f64>], v: &[Vec<f64>], reg: f64) -> f64 {
    let fit: f64 = cells.iter().map(|&(i, j, y)| (y - dot(&u[i], &v[j])).powi(2)).sum();
    let pen: f64 = u.iter().chain(v).map(|f| dot(f, f)).sum();
    fit + reg * pen
}

/// Solves each row of `target` against the fixed `other` factors.
fn update(
    target: &mut [Vec<f64>],
    other: &[Vec<f64>],
    observed: &[Vec<(usize, f64)>],
    p: &AlsParams,
) -> Result<()> {
    let r = p.rank;
    for (row, obs) in target.iter_mut().zip(observed) {
        let mut a = Matrix::identity(r);
        for d in 0..r {
            a[(d, d)] = p.regularization.max(1e-12);
        }
        let mut b = vec![0.0; r];
        for &(j, y) in obs {
            let f = &other[j];
            for x in 0..r {
                b[x] += f[x] * y;
                for z in 0..r {
                    a[(x, z)] += f[x] * f[z];
                }
            }
        }
        let exact = cholesky_solve(&a, &b)?;
        for (cur, new) in row.iter_mut().zip(exact) {
            *cur = (1.0 - p.step) * *cur + p.step * new;
        }
    }
    Ok(())
}

/// Factors the observed `(row, col, value)` cells of a `rows × cols` matrix.
pub fn als(rows: usize, cols: usize, cells: &[(usize, usize, f64)], p: &AlsParams) -> Result<Factorization> {
    if p.rank == 0 || p.max_epochs == 0 {
        return Err(Error::invalid("als rank and epochs must be >= 1"));
    }
    if !(p.step > 0.0 && p.step <= 1.0) || !(p.regularization >= 0.0) || !(p.tolerance > 0.0) {
        return Err(Error::invalid("als step must be in (0, 1], regularization >= 0, tolerance > 0"));
    }
    if cells.is_empty() {
        return Err(Error::invalid("als needs observed cells"));
    }
    let mut by_row = vec![Vec::new(); rows];
    let mut by_col = vec![Vec::new(); cols];
    for &(i, j, y) in cells {
        if i >= rows || j >= cols || !y.is_finite() {
            return Err(Error::invalid(format!("bad cell ({i}, {j}, {y})")));
        }
        by_row[i].push((j, y));
        by_col[j].push((i, y));
    }
    let mean_abs = cells.iter().map(|c| c.2.abs()).sum::<f64>() / cells.len() as f64;
    let scale = (mean_abs / p.rank as f64).sqrt().max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let normal = Normal::new(0.0, scale).expect("valid normal");
    let mut u: Vec<Vec<f64>> = (0..rows).map(|_| (0..p.rank).map(|_| normal.sample(&mut rng)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..cols).map(|_| (0..p.rank).map(|_| normal.sample(&mut rng)).collect()).collect();

    // Losses far below the data's energy count as converged.
    let floor = 1e-12 * cells.iter().map(|c| c.2 * c.2).sum::<f64>();
    let mut last = loss(cells, &u, &v, p.regularization);
    for epoch in 1..=p.max_epochs {
        update(&mut u, &v, &by_row, p)?;
        update(&mut v, &u, &by_col, p)?;
        let cur = loss(cells, &u, &v, p.regularization);
        if (last - cur).abs() <= p.tolerance * last.max(floor) || cur <= floor {
            return Ok(Factorization {
                row_factors: u,
                col_factors: v,
                loss: cur,
                epochs: epoch,
            });
        }
        last = cur;
    }
    Err(Error::NoConvergence {
        epochs: p.max_epochs,
        last_loss: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_reconstruction() {
        let a = [1.0, 2.0, 0.5, 3.0];
        let b = [2.0, 1.0, 4.0];
        let mut cells = Vec::new();
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if (i + j) % 5 != 3 {
                    cells.push((i, j, x * y));
                }
            }
        }
        let p = AlsParams {
            rank: 1,
            regularization: 1e-9,
            tolerance: 1e-9,
            max_epochs: 20000,
            ..Default::default()
        };
        let f = als(4, 3, &cells, &p).unwrap();
        for &(i, j, y) in &cells {
            assert!((f.predict(i, j) - y).abs() < 1e-3, "{i},{j}");
        }
    }

    #[test]
    fn non_convergence_reports_loss() {
        let cells: Vec<_> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j, ((i * 7 + j * 3) % 5) as f64))).collect();
        let p = AlsParams {
            rank: 1,
            max_epochs: 1,
            tolerance: 1e-15,
            ..Default::default()
        };
        assert!(matches!(als(5, 5, &cells, &p), Err(Error::NoConvergence { epochs: 1, .. })));
    }
}
