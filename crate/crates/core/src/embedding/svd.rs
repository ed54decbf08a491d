//! Truncated SVD over mean-centered raw embeddings.

use serde::{Deserialize, Serialize};

use crate::domain::{EmbeddingVector, EntityKind};
use crate::error::{Error, Result};
use crate::linalg::{dot, right_svd, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdModel {
    pub rank: usize,
    /// `raw_dim × rank`, orthonormal columns.
    pub right_factors: Matrix,
    pub singular_values: Vec<f64>,
    pub mean_vector: Vec<f64>,
}

/// Record of a requested rank that had to be lowered to fit the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankClamp {
    pub kind: EntityKind,
    pub requested: usize,
    pub used: usize,
}

fn check_vectors(vectors: &[EmbeddingVector]) -> Result<usize> {
    if vectors.len() < 2 {
        return Err(Error::invalid(format!("svd needs at least 2 vectors, got {}", vectors.len())));
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: v.dim(),
        });
    }
    Ok(dim)
}

/// Fits a rank-`k` model; `k` must lie in `1..=min(count, raw_dim)`.
pub fn fit_svd(vectors: &[EmbeddingVector], k: usize) -> Result<SvdModel> {
    let dim = check_vectors(vectors)?;
    let max_k = vectors.len().min(dim);
    if k == 0 || k > max_k {
        return Err(Error::invalid(format!("svd rank {k} outside 1..={max_k}")));
    }
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut centered = Matrix::zeros(vectors.len(), dim);
    for (i, v) in vectors.iter().enumerate() {
        for (j, (x, m)) in v.values.iter().zip(&mean).enumerate() {
            centered[(i, j)] = x - m;
        }
    }
    let svd = right_svd(&centered);
    let mut factors = Matrix::zeros(dim, k);
    for j in 0..k {
        for i in 0..dim {
            factors[(i, j)] = svd.right_vectors[(i, j)];
        }
    }
    Ok(SvdModel {
        rank: k,
        right_factors: factors,
        singular_values: svd.singular_values[..k].to_vec(),
        mean_vector: mean,
    })
}

/// Like [`fit_svd`] but lowers an oversized `k` to the largest admissible
/// rank, logging a warning and returning the clamp.
pub fn fit_svd_clamped(vectors: &[EmbeddingVector], k: usize, kind: EntityKind) -> Result<(SvdModel, Option<RankClamp>)> {
    let dim = check_vectors(vectors)?;
    let max_k = vectors.len().min(dim);
    if k == 0 {
        return Err(Error::invalid("svd rank must be >= 1"));
    }
    if k <= max_k {
        return Ok((fit_svd(vectors, k)?, None));
    }
    log::warn!("{kind} embedding rank {k} exceeds {max_k} fitted vectors; clamping to {max_k}");
    let clamp = RankClamp {
        kind,
        requested: k,
        used: max_k,
    };
    Ok((fit_svd(vectors, max_k)?, Some(clamp)))
}

/// Singular values at or below this fraction of the largest count as zero.
pub const NUMERICAL_RANK_RTOL: f64 = 1e-9;

impl SvdModel {
    pub fn raw_dim(&self) -> usize {
        self.mean_vector.len()
    }

    /// Number of singular values above `rtol · σ_max` (0 for constant data).
    pub fn numerical_rank(&self, rtol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|s| **s > rtol * top && **s > 0.0).count()
    }

    /// Keeps only the leading `k` components.
    pub fn truncate(&mut self, k: usize) {
        let k = k.clamp(1, self.rank);
        let dim = self.raw_dim();
        let mut factors = Matrix::zeros(dim, k);
        for j in 0..k {
            for i in 0..dim {
                factors[(i, j)] = self.right_factors[(i, j)];
            }
        }
        self.right_factors = factors;
        self.singular_values.truncate(k);
        self.rank = k;
    }

    /// Projects `(raw − mean)` onto the right factors.
    pub fn reduce_values(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.raw_dim() {
            return Err(Error::Dimension {
                expected: self.raw_dim(),
                found: raw.len(),
            });
        }
        let centered: Vec<f64> = raw.iter().zip(&self.mean_vector).map(|(x, m)| x - m).collect();
        Ok((0..self.rank)
            .map(|j| {
                (0..centered.len())
                    .map(|i| centered[i] * self.right_factors[(i, j)])
                    .sum()
            })
            .collect())
    }

    pub fn reduce(&self, raw: &EmbeddingVector) -> Result<EmbeddingVector> {
        EmbeddingVector::new(self.reduce_values(&raw.values)?, raw.provenance, raw.entity_kind)
    }

    /// Maps reduced coordinates back to raw space (mean included).
    pub fn reconstruct(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.rank {
            return Err(Error::Dimension {
                expected: self.rank,
                found: reduced.len(),
            });
        }
        Ok((0..self.raw_dim())
            .map(|i| {
                let row: Vec<f64> = (0..self.rank).map(|j| self.right_factors[(i, j)]).collect();
                self.mean_vector[i] + dot(&row, reduced)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EmbeddingProvenance;

    fn vecs(rows: &[Vec<f64>]) -> Vec<EmbeddingVector> {
        rows.iter()
            .map(|r| EmbeddingVector::new(r.clone(), EmbeddingProvenance::Fallback, EntityKind::Data).unwrap())
            .collect()
    }

    #[test]
    fn rank_out_of_range() {
        let v = vecs(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(fit_svd(&v, 0).is_err());
        assert!(fit_svd(&v, 3).is_err());
        assert!(fit_svd(&v[..1], 1).is_err());
    }

    #[test]
    fn mean_reduces_to_zero() {
        let v = vecs(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, -1.0], vec![2.0, 2.0, 0.5]]);
        let m = fit_svd(&v, 2).unwrap();
        let z = m.reduce_values(&m.mean_vector.clone()).unwrap();
        assert!(z.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn identical_vectors_have_zero_spectrum() {
        let v = vecs(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]);
        let m = fit_svd(&v, 2).unwrap();
        assert!(m.singular_values.iter().all(|s| *s == 0.0));
        let c0 = m.right_factors.column(0);
        let c1 = m.right_factors.column(1);
        assert!((dot(&c0, &c0) - 1.0).abs() < 1e-12 && dot(&c0, &c1).abs() < 1e-12);
    }

    #[test]
    fn clamp_reports_and_warns() {
        let v = vecs(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]);
        let (m, clamp) = fit_svd_clamped(&v, 64, EntityKind::Model).unwrap();
        assert_eq!(m.rank, 3);
        assert_eq!(
            clamp,
            Some(RankClamp {
                kind: EntityKind::Model,
                requested: 64,
                used: 3
            })
        );
        let (_, none) = fit_svd_clamped(&v, 2, EntityKind::Model).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn numerical_rank_and_truncation() {
        // Three distinct points repeated: centered rank 2.
        let v = vecs(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ]);
        let mut m = fit_svd(&v, 4).unwrap();
        assert_eq!(m.numerical_rank(NUMERICAL_RANK_RTOL), 2);
        let before = m.reduce_values(&v[1].values).unwrap();
        m.truncate(2);
        assert_eq!(m.rank, 2);
        assert_eq!(m.reduce_values(&v[1].values).unwrap(), before[..2].to_vec());
    }

    #[test]
    fn reduce_dimension_mismatch() {
        let v = vecs(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let m = fit_svd(&v, 1).unwrap();
        assert!(matches!(m.reduce_values(&[1.0]), Err(Error::Dimension { .. })));
        assert!(m.reconstruct(&[1.0, 2.0]).is_err());
    }
}
