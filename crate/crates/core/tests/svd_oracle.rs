//! Truncated SVD against an independent dense oracle: the eigenvalues of
//! the centered Gram matrix, computed with nalgebra.

use metainf_core::embedding::fit_svd;
use metainf_core::{EmbeddingProvenance, EmbeddingVector, EntityKind};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vectors(rows: &[Vec<f64>]) -> Vec<EmbeddingVector> {
    rows.iter()
        .map(|r| EmbeddingVector::new(r.clone(), EmbeddingProvenance::Fallback, EntityKind::Data).unwrap())
        .collect()
}

fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// Singular values of the column-centered matrix, descending.
fn oracle_singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mut a = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    for j in 0..d {
        let mean = a.column(j).mean();
        a.column_mut(j).add_scalar_mut(-mean);
    }
    let gram = a.transpose() * &a;
    let mut eig: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

fn squared_error(rows: &[Vec<f64>], k: usize) -> f64 {
    let model = fit_svd(&vectors(rows), k).unwrap();
    rows.iter()
        .map(|r| {
            let back = model.reconstruct(&model.reduce_values(r).unwrap()).unwrap();
            r.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum()
}

#[test]
fn identity_rows() {
    // Centering I_4 leaves three equal singular values and one zero.
    let rows: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let model = fit_svd(&vectors(&rows), 4).unwrap();
    let want = oracle_singular_values(&rows);
    for (s, w) in model.singular_values.iter().zip(&want) {
        assert!((s - w).abs() < 1e-6, "{s} vs {w}");
    }
    assert!((model.singular_values[0] - 1.0).abs() < 1e-9);
    assert!(model.singular_values[3].abs() < 1e-9);
}

#[test]
fn rank_one_data_has_one_direction() {
    let base = [0.3, -1.2, 2.0, 0.5];
    let rows: Vec<Vec<f64>> = [-2.0, -0.5, 1.0, 4.0].iter().map(|t| base.iter().map(|b| b * t).collect()).collect();
    let model = fit_svd(&vectors(&rows), 2).unwrap();
    assert!(model.singular_values[0] > 1.0);
    assert!(model.singular_values[1] <= 1e-8);
    assert!(squared_error(&rows, 1) < 1e-20);
}

#[test]
fn singular_values_match_oracle_on_random_matrices() {
    for (seed, (n, d)) in [(2, 3), (5, 5), (12, 7), (7, 20), (30, 30), (50, 50), (50, 17)].into_iter().enumerate() {
        let rows = random_rows(n, d, seed as u64);
        let k = n.min(d);
        let model = fit_svd(&vectors(&rows), k).unwrap();
        let want = oracle_singular_values(&rows);
        for (i, (s, w)) in model.singular_values.iter().zip(&want).enumerate() {
            assert!((s - w).abs() <= 1e-6, "{n}x{d} σ{i}: {s} vs {w}");
        }
    }
}

#[test]
fn full_rank_reconstruction_is_exact() {
    for (n, d) in [(6, 4), (4, 6), (50, 50)] {
        let rows = random_rows(n, d, 99);
        let model = fit_svd(&vectors(&rows), n.min(d)).unwrap();
        for r in &rows {
            let back = model.reconstruct(&model.reduce_values(r).unwrap()).unwrap();
            for (a, b) in r.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn truncation_error_is_the_discarded_spectrum() {
    let rows = random_rows(20, 8, 4);
    let s = oracle_singular_values(&rows);
    for k in 1..=8 {
        let tail: f64 = s[k..].iter().map(|x| x * x).sum();
        let err = squared_error(&rows, k);
        assert!((err - tail).abs() <= 1e-8 * (1.0 + tail), "k={k}: {err} vs {tail}");
    }
}

#[test]
fn right_factors_are_orthonormal() {
    let rows = random_rows(15, 10, 5);
    let model = fit_svd(&vectors(&rows), 6).unwrap();
    for a in 0..6 {
        for b in 0..6 {
            let dot: f64 = (0..10).map(|i| model.right_factors[(i, a)] * model.right_factors[(i, b)]).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectrum_matches_oracle(n in 2usize..=50, d in 1usize..=50, seed in any::<u64>()) {
        let rows = random_rows(n, d, seed);
        let model = fit_svd(&vectors(&rows), n.min(d)).unwrap();
        let want = oracle_singular_values(&rows);
        for (s, w) in model.singular_values.iter().zip(&want) {
            prop_assert!((s - w).abs() <= 1e-6, "{} vs {}", s, w);
        }
    }

    #[test]
    fn reconstruction_error_non_increasing_in_k(n in 2usize..=20, d in 1usize..=20, seed in any::<u64>()) {
        let rows = random_rows(n, d, seed);
        let mut last = f64::INFINITY;
        for k in 1..=n.min(d) {
            let err = squared_error(&rows, k);
            prop_assert!(err <= last + 1e-9, "k={}: {} > {}", k, err, last);
            last = err;
        }
    }

    #[test]
    fn reduction_preserves_distances_at_full_rank(seed in any::<u64>()) {
        let rows = random_rows(9, 6, seed);
        let model = fit_svd(&vectors(&rows), 6).unwrap();
        let a = model.reduce_values(&rows[0]).unwrap();
        let b = model.reduce_values(&rows[1]).unwrap();
        let raw: f64 = rows[0].iter().zip(&rows[1]).map(|(x, y)| (x - y).powi(2)).sum();
        let red: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        prop_assert!((raw - red).abs() < 1e-10);
    }
}
