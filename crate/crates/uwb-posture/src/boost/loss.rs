//! Softmax cross-entropy loss with analytic first and second derivatives.
//!
//! Scores, gradients, and hessians are flat row-major `N x K` matrices. The
//! gradient and hessian are per-sample (not averaged over `N`): the boosting
//! leaf values `-sum(g) / (sum(h) + lambda)` are defined on per-sample
//! derivatives, so only the reported loss carries the `1/N` factor.

use thiserror::Error;

/// Probability floor applied inside the logarithm.
pub const PROB_CLIP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("label {label} at row {index} outside [0, {k})")]
    LabelOutOfRange { index: usize, label: u32, k: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("scores length {scores} is not labels ({labels}) x classes ({k})")]
    ShapeMismatch {
        scores: usize,
        labels: usize,
        k: usize,
    },
}

fn check_shape(scores: &[f64], labels: &[u32], k: usize) -> Result<(), LossError> {
    if k < 2 {
        return Err(LossError::TooFewClasses(k));
    }
    if scores.len() != labels.len() * k {
        return Err(LossError::ShapeMismatch {
            scores: scores.len(),
            labels: labels.len(),
            k,
        });
    }
    for (index, &label) in labels.iter().enumerate() {
        if label as usize >= k {
            return Err(LossError::LabelOutOfRange { index, label, k });
        }
    }
    Ok(())
}

/// Writes softmax probabilities of one score row into `out`, subtracting the
/// row maximum before exponentiation for numerical stability.
pub fn softmax_row(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        let e = (s - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Mean softmax cross-entropy plus per-sample gradients and hessians.
///
/// `loss = -(1/N) * sum_i log max(p_{i, y_i}, 1e-15)`,
/// `gradient_{i,k} = p_{i,k} - [k == y_i]`, `hessian_{i,k} = p_{i,k} (1 - p_{i,k})`.
pub fn softmax_logloss(
    scores: &[f64],
    labels: &[u32],
    k: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>), LossError> {
    check_shape(scores, labels, k)?;
    let n = labels.len();
    let mut grad = vec![0.0; n * k];
    let mut hess = vec![0.0; n * k];
    let mut p = vec![0.0; k];
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = &scores[i * k..(i + 1) * k];
        softmax_row(row, &mut p);
        loss -= p[label as usize].max(PROB_CLIP).ln();
        for c in 0..k {
            let y = if c == label as usize { 1.0 } else { 0.0 };
            grad[i * k + c] = p[c] - y;
            hess[i * k + c] = p[c] * (1.0 - p[c]);
        }
    }
    Ok((loss / n as f64, grad, hess))
}

/// Mean softmax cross-entropy without derivative matrices, for per-round
/// loss tracking.
pub fn softmax_logloss_only(scores: &[f64], labels: &[u32], k: usize) -> Result<f64, LossError> {
    check_shape(scores, labels, k)?;
    let mut p = vec![0.0; k];
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        softmax_row(&scores[i * k..(i + 1) * k], &mut p);
        loss -= p[label as usize].max(PROB_CLIP).ln();
    }
    Ok(loss / labels.len() as f64)
}
