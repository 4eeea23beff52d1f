//! Dataset-to-model orchestration: per-sample feature preparation, temporal
//! windowing, classifier training, and optional out-of-distribution detector
//! fitting in one call. The command-line tools and the evaluation harness
//! both go through this module so a model trained anywhere behaves the same
//! everywhere.
//!
//! The detector is fitted on leaf embeddings of a stratified subsample of
//! training rows rather than the full matrix: the one-class solver
//! materializes an n-by-n kernel matrix, so n is capped (default 2048) with
//! an equal per-class share to keep rare classes represented. Subsampling
//! draws from per-class RNG streams `OOD_SUBSAMPLE_STREAM + class`, seeded
//! by the trainer seed, so a model plus its detector is reproducible from
//! the dataset and configuration alone.

use thiserror::Error;

use crate::boost::{argmax, train, GbdtConfig, GbdtModel, PredictError, TrainError, TrainReport};
use crate::data::Dataset;
use crate::features::{
    assemble_windowed, sample_feature_rows, windowize_sample, FeatureError,
};
use crate::ood::{fit_ood, OodError};
use crate::rng::{sample_indices, stream_rng};

/// RNG stream block for the per-class detector subsample.
pub const OOD_SUBSAMPLE_STREAM: u64 = 5_000_000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("feature assembly failed: {0}")]
    Feature(#[from] FeatureError),
    #[error("training failed: {0}")]
    Train(#[from] TrainError),
    #[error("prediction failed: {0}")]
    Predict(#[from] PredictError),
    #[error("detector fitting failed: {0}")]
    Ood(#[from] OodError),
}

/// Out-of-distribution detector settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OodParams {
    /// Upper bound on the training outlier fraction, lower bound on the
    /// support fraction.
    pub nu: f64,
    /// Kernel sharpness on leaf disagreement.
    pub gamma: f64,
    /// Cap on detector training embeddings, shared equally across classes
    /// (every present class keeps at least one row).
    pub max_embeddings: usize,
}

impl Default for OodParams {
    fn default() -> Self {
        Self {
            nu: 0.05,
            gamma: 4.0,
            max_embeddings: 2048,
        }
    }
}

/// Picks detector training rows: up to `max_total / n_present` per class,
/// everything when a class is smaller than its share. Returned indices are
/// grouped by class in ascending class order.
fn stratified_row_subsample(labels: &[u32], seed: u64, max_total: usize) -> Vec<usize> {
    let n_classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let present = by_class.iter().filter(|c| !c.is_empty()).count().max(1);
    let cap = (max_total / present).max(1);
    let mut kept = Vec::new();
    for (class, rows) in by_class.iter().enumerate() {
        if rows.len() <= cap {
            kept.extend_from_slice(rows);
        } else {
            let mut rng = stream_rng(seed, OOD_SUBSAMPLE_STREAM + class as u64);
            kept.extend(
                sample_indices(&mut rng, rows.len(), cap)
                    .into_iter()
                    .map(|k| rows[k]),
            );
        }
    }
    kept
}

/// Trains a classifier on every known-labelled sample of `train_set` at
/// window size `tau`, then fits the leaf-embedding detector when `ood` is
/// given. The detector is stored on the returned model and rides along in
/// its file format.
pub fn fit_pipeline(
    train_set: &Dataset,
    tau: usize,
    config: &GbdtConfig,
    ood: Option<&OodParams>,
) -> Result<(GbdtModel, TrainReport), PipelineError> {
    let (matrix, labels, _) = assemble_windowed(&train_set.samples, tau)?;
    // The trainer consumes the matrix, so detector rows are copied out first.
    let kept_rows: Option<Vec<Vec<f64>>> = ood.map(|params| {
        stratified_row_subsample(&labels, config.seed, params.max_embeddings)
            .into_iter()
            .map(|i| matrix.row(i))
            .collect()
    });
    let (mut model, report) = train(matrix, &labels, config)?;
    if let (Some(params), Some(rows)) = (ood, kept_rows) {
        let mut embeddings = Vec::with_capacity(rows.len());
        for row in &rows {
            embeddings.push(model.leaf_indices_row(row, model.layout_hash)?);
        }
        let checksum = model.checksum();
        model.ood = Some(fit_ood(&embeddings, params.nu, params.gamma, checksum)?);
    }
    Ok((model, report))
}

/// Per-frame verdict from [`assess_frames`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAssessment {
    /// Predicted class id.
    pub label: u32,
    /// Softmax probability of the predicted class.
    pub probability: f64,
    /// Detector decision value; `None` when the model carries no detector.
    pub ood_decision: Option<f64>,
    /// True when the detector flags the frame. Always false without a
    /// detector.
    pub is_ood: bool,
}

/// Runs one contiguous capture through the model: per-sample preparation,
/// windowing at the model's tau, then per-row class and detector verdicts.
pub fn assess_frames(
    model: &GbdtModel,
    frames: &[crate::data::UwbFrame],
) -> Result<Vec<FrameAssessment>, PipelineError> {
    let base = sample_feature_rows(frames)?;
    let windowed = windowize_sample(&base, model.tau)?;
    let checksum = model.checksum();
    let mut out = Vec::with_capacity(windowed.rows.len());
    for row in &windowed.rows {
        let proba = model.predict_proba_row(row, windowed.layout_hash)?;
        let best = argmax(&proba);
        let (ood_decision, is_ood) = match &model.ood {
            Some(det) => {
                let emb = model.leaf_indices_row(row, windowed.layout_hash)?;
                let (f, flag) = det.score(&emb, checksum)?;
                (Some(f), flag)
            }
            None => (None, false),
        };
        out.push(FrameAssessment {
            label: model.classes[best],
            probability: proba[best],
            ood_decision,
            is_ood,
        });
    }
    Ok(out)
}
