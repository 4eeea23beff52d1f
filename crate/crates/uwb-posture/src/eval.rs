//! Metrics, confusion matrices, and the temporal-window experiments.
//!
//! Evaluation is frame-level: every windowed row of every test sample counts
//! once. [`compute_metrics`] turns label pairs into a confusion matrix and a
//! per-class precision/recall/F1 report; [`compare_temporal`] trains two
//! models on one stratified split that differ only in window size, the
//! frame-wise baseline against the windowed model; [`sweep_window`] repeats
//! the exercise over a set of window sizes. Per-sample majority-vote accuracy
//! is reported alongside as a diagnostic.
//!
//! Report rendering is split from computation: the `*_csv` and
//! [`write_split_reports`] helpers serialize finished reports, with file
//! names carrying the seed and window size that produced them.

use crate::boost::{train, GbdtConfig, PredictError, TrainError};
use crate::data::{stratified_split, DataError, Dataset, PostureLabel};
use crate::features::{assemble_windowed, FeatureError};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Train share of the sample-level stratified split used by the comparison
/// and sweep experiments.
pub const TRAIN_FRACTION: f64 = 0.6;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label slices differ in length: {truth} truth vs {predicted} predicted")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("no labels to evaluate")]
    EmptyInput,
    #[error("label {label} is outside the {n_classes}-class range")]
    LabelOutOfRange { label: u32, n_classes: usize },
    #[error("window sweep needs at least one window size")]
    EmptySweep,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Frame counts by (true class, predicted class).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    /// `counts[t][p]` is the number of frames of true class `t` predicted as
    /// `p`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    /// Number of evaluated frames.
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// True-class frame count (row sum).
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }
}

/// Precision, recall, and F1 for one class, with its true-frame count.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class and aggregate classification metrics.
///
/// Macro averages are unweighted means over classes with nonzero support;
/// weighted averages weight by support. For single-label classification the
/// weighted recall equals the overall accuracy exactly.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Classes where some metric had a zero denominator (never predicted,
    /// zero support, or precision + recall = 0) and was reported as 0
    /// instead of being dropped.
    pub zero_division_classes: Vec<u32>,
}

/// Tallies predictions against truth.
///
/// Zero-denominator metrics are reported as 0 and the class is listed in
/// [`MetricsReport::zero_division_classes`], so reports from different runs
/// always have the same shape.
pub fn compute_metrics(
    true_labels: &[u32],
    predicted_labels: &[u32],
    n_classes: usize,
) -> Result<(ConfusionMatrix, MetricsReport), EvalError> {
    if true_labels.len() != predicted_labels.len() {
        return Err(EvalError::LengthMismatch {
            truth: true_labels.len(),
            predicted: predicted_labels.len(),
        });
    }
    if true_labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in true_labels.iter().zip(predicted_labels) {
        for label in [t, p] {
            if label as usize >= n_classes {
                return Err(EvalError::LabelOutOfRange { label, n_classes });
            }
        }
        counts[t as usize][p as usize] += 1;
    }
    let confusion = ConfusionMatrix { counts };
    let report = report_from_confusion(&confusion);
    Ok((confusion, report))
}

fn report_from_confusion(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.n_classes();
    let total = cm.total();
    let mut per_class = Vec::with_capacity(k);
    let mut zero_division = Vec::new();
    let mut correct = 0u64;
    for c in 0..k {
        let tp = cm.counts[c][c];
        correct += tp;
        let support = cm.support(c);
        let predicted: u64 = (0..k).map(|t| cm.counts[t][c]).sum();
        let mut flagged = false;
        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            flagged = true;
            0.0
        };
        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            flagged = true;
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            flagged = true;
            0.0
        };
        if flagged {
            zero_division.push(c as u32);
        }
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }

    let supported: Vec<&ClassMetrics> =
        per_class.iter().filter(|m| m.support > 0).collect();
    let n_sup = supported.len().max(1) as f64;
    let macro_of = |f: fn(&ClassMetrics) -> f64| supported.iter().map(|m| f(m)).sum::<f64>() / n_sup;
    let weighted_of = |f: fn(&ClassMetrics) -> f64| {
        supported
            .iter()
            .map(|m| m.support as f64 * f(m))
            .sum::<f64>()
            / total as f64
    };
    MetricsReport {
        accuracy: correct as f64 / total as f64,
        macro_precision: macro_of(|m| m.precision),
        macro_recall: macro_of(|m| m.recall),
        macro_f1: macro_of(|m| m.f1),
        weighted_precision: weighted_of(|m| m.precision),
        weighted_recall: weighted_of(|m| m.recall),
        weighted_f1: weighted_of(|m| m.f1),
        per_class,
        zero_division_classes: zero_division,
    }
}

/// One trained-and-evaluated configuration on a fixed split.
#[derive(Debug, Clone)]
pub struct SplitEvaluation {
    pub tau: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    /// Share of test samples whose modal frame prediction matches the sample
    /// label (ties break to the lowest class id). Diagnostic only.
    pub sample_majority_accuracy: f64,
    /// Boosting rounds kept after early stopping.
    pub rounds: usize,
    pub train_seconds: f64,
}

/// Trains on the train partition at window size `tau` and evaluates frame
/// level on the test partition. Unknown-labelled samples are skipped: they
/// have no row or column in a closed-set confusion matrix.
pub fn evaluate_split(
    train_set: &Dataset,
    test_set: &Dataset,
    tau: usize,
    config: &GbdtConfig,
) -> Result<SplitEvaluation, EvalError> {
    let (train_matrix, train_labels, _) = assemble_windowed(&train_set.samples, tau)?;
    let (model, report) = train(train_matrix, &train_labels, config)?;

    let (test_matrix, test_labels, spans) = assemble_windowed(&test_set.samples, tau)?;
    let predicted = model.predict_label(&test_matrix)?;
    let (confusion, metrics) =
        compute_metrics(&test_labels, &predicted, PostureLabel::COUNT)?;

    let mut correct_samples = 0usize;
    let mut offset = 0usize;
    for &(label, n_rows) in &spans {
        let mut votes = [0usize; PostureLabel::COUNT];
        for &p in &predicted[offset..offset + n_rows] {
            votes[p as usize] += 1;
        }
        let modal = votes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c as u32)
            .unwrap_or(0);
        if modal == label {
            correct_samples += 1;
        }
        offset += n_rows;
    }
    Ok(SplitEvaluation {
        tau,
        confusion,
        metrics,
        sample_majority_accuracy: correct_samples as f64 / spans.len().max(1) as f64,
        rounds: model.n_rounds(),
        train_seconds: report.train_seconds,
    })
}

/// The frame-wise baseline against the temporally windowed model.
#[derive(Debug, Clone)]
pub struct TemporalComparison {
    pub baseline: SplitEvaluation,
    pub ours: SplitEvaluation,
    /// Per-class F1 change, ours minus baseline, indexed by class id.
    pub per_class_f1_delta: Vec<f64>,
    /// Mean F1 delta over static classes with test support.
    pub mean_static_f1_delta: f64,
    /// Mean F1 delta over dynamic classes with test support.
    pub mean_dynamic_f1_delta: f64,
}

/// Trains and evaluates two window sizes on the identical 60/40 stratified
/// sample split. `seed` fixes the split; everything else, including the
/// trainer's internal seed, comes from `config`, so runs differing only in
/// `tau_ours` share their baseline exactly.
pub fn compare_temporal(
    dataset: &Dataset,
    tau_baseline: usize,
    tau_ours: usize,
    config: &GbdtConfig,
    seed: u64,
) -> Result<TemporalComparison, EvalError> {
    let (train_set, test_set) = stratified_split(dataset, TRAIN_FRACTION, seed)?;
    let baseline = evaluate_split(&train_set, &test_set, tau_baseline, config)?;
    let ours = evaluate_split(&train_set, &test_set, tau_ours, config)?;

    let k = PostureLabel::COUNT;
    let mut per_class_f1_delta = vec![0.0; k];
    let mut static_sum = (0.0, 0usize);
    let mut dynamic_sum = (0.0, 0usize);
    for c in 0..k {
        let delta = ours.metrics.per_class[c].f1 - baseline.metrics.per_class[c].f1;
        per_class_f1_delta[c] = delta;
        if ours.metrics.per_class[c].support == 0 {
            continue;
        }
        let label = PostureLabel::from_id(c as u32).expect("class ids are dense");
        let bucket = if label.is_dynamic() {
            &mut dynamic_sum
        } else {
            &mut static_sum
        };
        bucket.0 += delta;
        bucket.1 += 1;
    }
    Ok(TemporalComparison {
        baseline,
        ours,
        per_class_f1_delta,
        mean_static_f1_delta: static_sum.0 / static_sum.1.max(1) as f64,
        mean_dynamic_f1_delta: dynamic_sum.0 / dynamic_sum.1.max(1) as f64,
    })
}

/// Accuracy table over window sizes, one train/eval per size on a fixed
/// split.
#[derive(Debug, Clone)]
pub struct WindowSweep {
    pub seed: u64,
    pub rows: Vec<SplitEvaluation>,
}

/// Runs [`evaluate_split`] once per window size on the same 60/40 stratified
/// split. Sizes are evaluated in the given order.
pub fn sweep_window(
    dataset: &Dataset,
    tau_values: &[usize],
    config: &GbdtConfig,
    seed: u64,
) -> Result<WindowSweep, EvalError> {
    if tau_values.is_empty() {
        return Err(EvalError::EmptySweep);
    }
    let (train_set, test_set) = stratified_split(dataset, TRAIN_FRACTION, seed)?;
    let rows = tau_values
        .iter()
        .map(|&tau| evaluate_split(&train_set, &test_set, tau, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WindowSweep { seed, rows })
}

/// Class names for report headers: posture names when the matrix covers the
/// posture set, positional names otherwise.
pub fn class_names(n_classes: usize) -> Vec<String> {
    if n_classes == PostureLabel::COUNT {
        PostureLabel::ALL.iter().map(|l| l.name().to_string()).collect()
    } else {
        (0..n_classes).map(|c| format!("class{c}")).collect()
    }
}

/// Renders the confusion matrix as CSV with a header row and column of class
/// names: `(K + 1) × (K + 1)` cells, rows = true class.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let names = class_names(cm.n_classes());
    let mut out = String::from("true\\predicted");
    for name in &names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (t, row) in cm.counts.iter().enumerate() {
        out.push_str(&names[t]);
        for &count in row {
            out.push(',');
            out.push_str(&count.to_string());
        }
        out.push('\n');
    }
    out
}

/// Renders the sweep as plot-ready CSV, one row per window size.
pub fn sweep_csv(sweep: &WindowSweep) -> String {
    let mut out = String::from(
        "tau,accuracy,macro_f1,weighted_f1,sample_majority_accuracy,rounds\n",
    );
    for row in &sweep.rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{}\n",
            row.tau,
            row.metrics.accuracy,
            row.metrics.macro_f1,
            row.metrics.weighted_f1,
            row.sample_majority_accuracy,
            row.rounds,
        ));
    }
    out
}

/// Writes one evaluation's confusion matrix (CSV) and metrics (JSON) into
/// `dir`, names carrying seed and window size. Returns the paths written.
pub fn write_split_reports(
    dir: &Path,
    seed: u64,
    eval: &SplitEvaluation,
) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(dir)?;
    let confusion_path = dir.join(format!("confusion_seed{seed}_tau{}.csv", eval.tau));
    let metrics_path = dir.join(format!("metrics_seed{seed}_tau{}.json", eval.tau));
    std::fs::write(&confusion_path, confusion_csv(&eval.confusion))?;
    let mut file = std::fs::File::create(&metrics_path)?;
    let json = serde_json::to_string_pretty(&eval.metrics)
        .expect("metrics reports always serialize");
    file.write_all(json.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(vec![confusion_path, metrics_path])
}

/// Writes the sweep table as `sweep_seed{seed}.csv` in `dir`.
pub fn write_sweep_csv(dir: &Path, sweep: &WindowSweep) -> Result<PathBuf, EvalError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("sweep_seed{}.csv", sweep.seed));
    std::fs::write(&path, sweep_csv(sweep))?;
    Ok(path)
}
