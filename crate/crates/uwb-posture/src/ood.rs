//! Out-of-distribution detection over leaf embeddings.
//!
//! A trained forest maps every input to a leaf embedding: the vector of leaf
//! ids the input reaches across all trees. Inputs from the training
//! distribution traverse familiar paths, so their embeddings agree with
//! training embeddings on many trees; novel inputs do not. A one-class
//! classifier over an agreement kernel turns that intuition into a decision
//! value.
//!
//! The kernel is `k(a, b) = exp(-gamma * (1 - s(a, b)))` with `s` the
//! fraction of trees where the leaf ids agree. Leaf ids are nominal labels,
//! so only equality is meaningful; `s` is the normalized dot product of the
//! one-hot encodings, which makes `k` a positive semidefinite RBF-style
//! kernel.
//!
//! Fitting solves the one-class dual
//!
//! ```text
//! minimize    (1/2) * a' K a
//! subject to  0 <= a_i <= 1 / (nu * n),   sum a_i = 1
//! ```
//!
//! with pairwise coordinate updates: each step picks the most violating
//! pair (largest gradient among raisable coordinates vs smallest among
//! reducible ones) and moves mass between them, exactly as a working-set-2
//! SMO. The stopping rule is the KKT gap `<= 1e-6`, capped at 100,000
//! updates. `rho` is the mean gradient over free support vectors, putting
//! the decision boundary `f(x) = sum_i a_i k(x_i, x) - rho` at zero on the
//! margin. At most a `nu` fraction of training points can sit at the upper
//! bound, which caps the training outlier rate near `nu`.
//!
//! A detector is bound to the exact forest that produced its embeddings via
//! the model checksum; scoring against any other model is an error.

/// KKT gap below which the dual solve is converged.
const KKT_TOL: f64 = 1e-6;
/// Hard cap on pairwise updates before reporting non-convergence.
const MAX_UPDATES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OodError {
    #[error("embedding length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least {needed} training embeddings, got {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("nu must be in (0, 1], got {0}")]
    InvalidNu(f64),
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("dual solver did not reach KKT tolerance within {updates} pairwise updates")]
    NonConvergence { updates: usize },
    #[error("detector is bound to model {expected:#018x}, scored against {got:#018x}")]
    ModelBindingMismatch { expected: u64, got: u64 },
}

/// One-class detector over leaf embeddings. `support_embeddings` keeps only
/// training points with nonzero dual weight; `alphas` sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct OodDetector {
    pub support_embeddings: Vec<Vec<u16>>,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub nu: f64,
    pub gamma: f64,
    /// Checksum of the model core whose trees produced the embeddings.
    pub model_checksum: u64,
}

/// Agreement kernel between two leaf embeddings. Zero-length embeddings
/// (a forest with no trees) agree fully by convention.
pub fn embedding_kernel(a: &[u16], b: &[u16], gamma: f64) -> Result<f64, OodError> {
    if a.len() != b.len() {
        return Err(OodError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(kernel_unchecked(a, b, gamma))
}

fn kernel_unchecked(a: &[u16], b: &[u16], gamma: f64) -> f64 {
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let s = if a.is_empty() {
        1.0
    } else {
        agree as f64 / a.len() as f64
    };
    (-gamma * (1.0 - s)).exp()
}

/// Fits the one-class detector on training embeddings.
///
/// `model_checksum` should be [`crate::boost::GbdtModel::checksum`] of the
/// model that produced the embeddings; scoring verifies it. The full kernel
/// matrix is materialized (n^2 doubles), sized for desk-scale n in the low
/// thousands.
pub fn fit_ood(
    embeddings: &[Vec<u16>],
    nu: f64,
    gamma: f64,
    model_checksum: u64,
) -> Result<OodDetector, OodError> {
    let n = embeddings.len();
    if n < 2 {
        return Err(OodError::TooFewSamples { got: n, needed: 2 });
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(OodError::InvalidNu(nu));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(OodError::InvalidGamma(gamma));
    }
    let emb_len = embeddings[0].len();
    for e in embeddings {
        if e.len() != emb_len {
            return Err(OodError::LengthMismatch {
                expected: emb_len,
                got: e.len(),
            });
        }
    }

    let cap = 1.0 / (nu * n as f64);

    // Dense symmetric kernel matrix.
    let mut kernel = vec![0.0f64; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in i + 1..n {
            let k = kernel_unchecked(&embeddings[i], &embeddings[j], gamma);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    // Uniform start is always feasible (1/n <= cap since nu <= 1).
    let mut alpha = vec![1.0 / n as f64; n];
    // Gradient of the objective: g = K alpha.
    let mut grad = vec![0.0f64; n];
    for i in 0..n {
        let row = &kernel[i * n..(i + 1) * n];
        grad[i] = row.iter().zip(&alpha).map(|(k, a)| k * a).sum();
    }

    let mut converged = false;
    let mut updates = 0usize;
    while updates < MAX_UPDATES {
        // Most violating pair: the largest gradient among coordinates that
        // can shrink vs the smallest among those that can grow. Ties go to
        // the lowest index.
        let mut down: Option<usize> = None;
        let mut up: Option<usize> = None;
        for t in 0..n {
            if alpha[t] > 0.0 && down.map_or(true, |d| grad[t] > grad[d]) {
                down = Some(t);
            }
            if alpha[t] < cap && up.map_or(true, |u| grad[t] < grad[u]) {
                up = Some(t);
            }
        }
        let (i, j) = match (down, up) {
            (Some(i), Some(j)) => (i, j),
            _ => break,
        };
        if grad[i] - grad[j] <= KKT_TOL {
            converged = true;
            break;
        }

        let eta = kernel[i * n + i] + kernel[j * n + j] - 2.0 * kernel[i * n + j];
        if eta <= 0.0 {
            // Identical kernel rows cannot be a violating pair; reaching
            // this means the matrix is numerically broken.
            return Err(OodError::NonConvergence { updates });
        }
        let step = ((grad[i] - grad[j]) / eta)
            .min(alpha[i])
            .min(cap - alpha[j]);
        if step == alpha[i] {
            alpha[i] = 0.0;
        } else {
            alpha[i] -= step;
        }
        if cap - alpha[j] == step {
            alpha[j] = cap;
        } else {
            alpha[j] += step;
        }
        for t in 0..n {
            grad[t] += step * (kernel[j * n + t] - kernel[i * n + t]);
        }
        updates += 1;
    }
    if !converged {
        // A fully saturated or single-coordinate state exits the loop with
        // no pair; re-check the gap before declaring failure.
        let gap = kkt_gap(&alpha, &grad, cap);
        if gap > KKT_TOL {
            return Err(OodError::NonConvergence { updates });
        }
    }

    // rho: smallest gradient over coordinates below the cap. At the exact
    // optimum every free support vector shares this value and zero-weight
    // points sit above it, so this is the KKT rho; within solver tolerance
    // it keeps every training point that is not a margin error at a
    // non-negative decision value, bounding the training outlier fraction
    // by nu. When everything is at the cap (nu = 1) any at-bound gradient
    // works; the largest flags all training points, matching nu.
    let lo = (0..n)
        .filter(|&t| alpha[t] < cap)
        .map(|t| grad[t])
        .fold(f64::INFINITY, f64::min);
    let rho = if lo.is_finite() {
        lo
    } else {
        (0..n)
            .map(|t| grad[t])
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut support_embeddings = Vec::new();
    let mut alphas = Vec::new();
    for (t, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            support_embeddings.push(embeddings[t].clone());
            alphas.push(a);
        }
    }

    Ok(OodDetector {
        support_embeddings,
        alphas,
        rho,
        nu,
        gamma,
        model_checksum,
    })
}

fn kkt_gap(alpha: &[f64], grad: &[f64], cap: f64) -> f64 {
    let hi = alpha
        .iter()
        .zip(grad)
        .filter(|(&a, _)| a > 0.0)
        .map(|(_, &g)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = alpha
        .iter()
        .zip(grad)
        .filter(|(&a, _)| a < cap)
        .map(|(_, &g)| g)
        .fold(f64::INFINITY, f64::min);
    if hi.is_finite() && lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

impl OodDetector {
    /// Embedding length the detector expects (tree count of its model).
    pub fn embedding_len(&self) -> usize {
        self.support_embeddings.first().map_or(0, Vec::len)
    }

    /// Scores an embedding produced by the model with `model_checksum`.
    /// Returns `(decision_value, is_ood)` with `is_ood = decision < 0`.
    pub fn score(&self, embedding: &[u16], model_checksum: u64) -> Result<(f64, bool), OodError> {
        if model_checksum != self.model_checksum {
            return Err(OodError::ModelBindingMismatch {
                expected: self.model_checksum,
                got: model_checksum,
            });
        }
        if embedding.len() != self.embedding_len() {
            return Err(OodError::LengthMismatch {
                expected: self.embedding_len(),
                got: embedding.len(),
            });
        }
        let mut f = -self.rho;
        for (sv, &a) in self.support_embeddings.iter().zip(&self.alphas) {
            f += a * kernel_unchecked(sv, embedding, self.gamma);
        }
        Ok((f, f < 0.0))
    }
}
