//! Ridge regression via a centered Cholesky solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

/// Solves `(XcᵀXc + λI) w = Xcᵀyc` on centered data; the intercept restores
/// the means so it is never penalized.
pub fn train_ridge(rows: &[(Vec<f64>, f64)], lambda: f64) -> Result<RidgeModel> {
    if rows.is_empty() {
        return Err(Error::invalid("ridge needs at least one row"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let d = rows[0].0.len();
    if let Some((x, _)) = rows.iter().find(|(x, _)| x.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: x.len(),
        });
    }
    if rows.iter().any(|(x, y)| !y.is_finite() || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("ridge rows must be finite"));
    }
    let n = rows.len() as f64;
    let mut x_mean = vec![0.0; d];
    let mut y_mean = 0.0;
    for (x, y) in rows {
        for (m, v) in x_mean.iter_mut().zip(x) {
            *m += v / n;
        }
        y_mean += y / n;
    }
    let mut gram = Matrix::zeros(d, d);
    let mut rhs = vec![0.0; d];
    let mut xc = vec![0.0; d];
    for (x, y) in rows {
        for j in 0..d {
            xc[j] = x[j] - x_mean[j];
        }
        let yc = y - y_mean;
        for a in 0..d {
            rhs[a] += xc[a] * yc;
            for b in a..d {
                gram[(a, b)] += xc[a] * xc[b];
            }
        }
    }
    for a in 0..d {
        gram[(a, a)] += lambda;
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let weights = if d == 0 {
        Vec::new()
    } else {
        cholesky_solve(&gram, &rhs).map_err(|e| match e {
            Error::Singular(msg) if lambda == 0.0 => {
                Error::Singular(format!("{msg}; use lambda > 0 to regularize"))
            }
            other => other,
        })?
    };
    let intercept = y_mean - dot(&x_mean, &weights);
    Ok(RidgeModel {
        weights,
        intercept,
        lambda,
    })
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        Ok(self.intercept + dot(&self.weights, x))
    }
}
