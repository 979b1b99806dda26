use crate::error::{GrowFragError, Result};
use serde::{Deserialize, Serialize};

use super::operator::OperatorMatrix;

pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantPair {
    pub mu: f64,
    /// Positive eigenvector with maximum 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Power iteration renormalised by the max norm. Stops once both the
/// eigenvalue estimate and the vector change by less than `tol`.
pub fn dominant_eigen(k: &OperatorMatrix, tol: f64, start: Option<&[f64]>) -> Result<DominantPair> {
    dominant_eigen_with_limit(k, tol, start, DEFAULT_MAX_ITER)
}

pub fn dominant_eigen_with_limit(
    k: &OperatorMatrix,
    tol: f64,
    start: Option<&[f64]>,
    max_iter: usize,
) -> Result<DominantPair> {
    let n = k.n;
    let mut v: Vec<f64> = match start {
        Some(s) if s.len() == n && s.iter().all(|&x| x > 0.0 && x.is_finite()) => s.to_vec(),
        Some(_) => return Err(GrowFragError::InvalidArgument("start vector must be positive".into())),
        None => vec![1.0; n],
    };
    normalize_max(&mut v);
    let mut mu = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mut next = k.apply(&v);
        let top = next.iter().cloned().fold(0.0, f64::max);
        if !(top > 0.0) || !top.is_finite() {
            return Err(GrowFragError::numerical(
                "power iteration",
                format!("iterate collapsed (max = {top}) at step {it}"),
            ));
        }
        for x in next.iter_mut() {
            *x /= top;
        }
        let change = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dmu = (top - mu).abs();
        residual = change.max(dmu);
        mu = top;
        v = next;
        if dmu < tol && change < tol {
            return Ok(DominantPair { mu, vector: v, iterations: it });
        }
    }
    Err(GrowFragError::PowerIterationStalled { iterations: max_iter, mu, residual })
}

fn normalize_max(v: &mut [f64]) {
    let top = v.iter().cloned().fold(0.0, f64::max);
    if top > 0.0 {
        for x in v.iter_mut() {
            *x /= top;
        }
    }
}
