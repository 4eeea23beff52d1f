//! Gradient-boosted decision trees for multiclass posture classification.
//!
//! The model is a forest of regression trees trained round by round against
//! softmax cross-entropy. Every boosting round grows one tree per class; the
//! raw score of class `k` for a row is the class base score (log prior) plus
//! the leaf values that row reaches in every round's class-`k` tree. Leaf
//! values are stored post-shrinkage, so prediction is a plain sum.
//!
//! Trees are grown leaf-wise (best-first) on 256-bin equal-frequency
//! histograms with second-order gains and L2 regularization. Training,
//! binning, and the split search live in the submodules; this module owns
//! the model types and prediction paths.
//!
//! Everything is deterministic for a fixed seed: column subsampling uses a
//! dedicated RNG stream, ties in split search resolve to the lowest feature
//! index then lowest bin, and argmax ties resolve to the lowest class id.

pub mod binning;
pub mod io;
pub mod loss;
pub mod split;
mod train;

pub use train::train;

use crate::features::WindowedMatrix;

/// Training hyperparameters. `Default` mirrors the deployment configuration;
/// tests shrink `max_rounds` and `num_leaves` for speed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GbdtConfig {
    /// Maximum leaves per tree (leaf-wise growth stops here).
    pub num_leaves: usize,
    /// Shrinkage factor applied to every leaf value.
    pub learning_rate: f64,
    /// Fraction of feature columns each tree may split on.
    pub feature_fraction: f64,
    /// Upper bound on boosting rounds.
    pub max_rounds: usize,
    /// Rounds without validation improvement before stopping.
    pub early_stop_patience: usize,
    /// Minimum training rows on each side of a split.
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf values.
    pub l2_lambda: f64,
    /// Histogram bins per feature, at most 256.
    pub histogram_bins: usize,
    /// Seed for column subsampling and the validation split.
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            num_leaves: 64,
            learning_rate: 0.05,
            feature_fraction: 0.9,
            max_rounds: 1000,
            early_stop_patience: 10,
            min_samples_leaf: 20,
            l2_lambda: 1e-3,
            histogram_bins: 256,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("num_leaves must be in [2, 65535], got {0}")]
    NumLeaves(usize),
    #[error("learning_rate must be in (0, 1], got {0}")]
    LearningRate(f64),
    #[error("feature_fraction must be in (0, 1], got {0}")]
    FeatureFraction(f64),
    #[error("early_stop_patience must be at least 1, got {0}")]
    Patience(usize),
    #[error("min_samples_leaf must be at least 1, got {0}")]
    MinSamplesLeaf(usize),
    #[error("l2_lambda must be finite and non-negative, got {0}")]
    Lambda(f64),
    #[error("histogram_bins must be in [2, 256], got {0}")]
    HistogramBins(usize),
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        // Leaf ids are stored as u16, so trees cannot exceed 65535 leaves.
        if self.num_leaves < 2 || self.num_leaves > usize::from(u16::MAX) {
            return Err(ConfigError::NumLeaves(self.num_leaves));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(ConfigError::LearningRate(self.learning_rate));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(ConfigError::FeatureFraction(self.feature_fraction));
        }
        if self.early_stop_patience == 0 {
            return Err(ConfigError::Patience(0));
        }
        if self.min_samples_leaf == 0 {
            return Err(ConfigError::MinSamplesLeaf(0));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(ConfigError::Lambda(self.l2_lambda));
        }
        if self.histogram_bins < 2 || self.histogram_bins > 256 {
            return Err(ConfigError::HistogramBins(self.histogram_bins));
        }
        Ok(())
    }
}

/// One tree node. Children are indices into the owning tree's node array.
/// Rows with `value <= threshold` go left; a NaN feature value (cannot occur
/// for loader-validated data) also routes left, the fixed default direction.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Dense id in `0..n_leaves`, assigned in creation order.
        leaf_id: u16,
        /// Post-shrinkage contribution to the class raw score.
        value: f64,
    },
}

/// A single regression tree. Node 0 is the root; a freshly created tree is
/// one leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub n_leaves: u16,
}

impl Tree {
    /// Routes a row to its leaf, returning `(leaf_id, value)`.
    pub fn leaf_for_row(&self, row: &[f64]) -> (u16, f64) {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    // `!(x > t)` is `x <= t` for real x and keeps NaN on the
                    // left default path.
                    idx = if !(row[*feature] > *threshold) {
                        *left
                    } else {
                        *right
                    };
                }
                TreeNode::Leaf { leaf_id, value } => return (*leaf_id, *value),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("feature layout hash {found:#018x} does not match model layout {expected:#018x}")]
    LayoutMismatch { expected: u64, found: u64 },
    #[error("row has {got} features, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
}

/// A trained multiclass boosted-tree model.
///
/// `trees` is round-major: the tree for round `m`, class slot `k` sits at
/// `trees[m * n_classes + k]`. Rounds are atomic, so `trees.len()` is always
/// a multiple of `classes.len()`. `classes` holds the raw label ids seen at
/// training time, ascending; class slot `k` predicts `classes[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub config: GbdtConfig,
    /// Temporal window size the feature rows were built with.
    pub tau: usize,
    /// Fingerprint of the windowed feature layout; prediction rejects rows
    /// carrying any other hash.
    pub layout_hash: u64,
    /// Windowed row width.
    pub n_features: usize,
    pub classes: Vec<u32>,
    /// Per-class log prior, the round-zero score.
    pub base_scores: Vec<f64>,
    /// Per-feature ascending bin edges from training (kept for diagnostics
    /// and serialization; prediction thresholds are already edge values).
    pub bin_edges: Vec<Vec<f64>>,
    pub trees: Vec<Tree>,
    /// Out-of-distribution detector fitted on this model's leaf embeddings.
    pub ood: Option<crate::ood::OodDetector>,
}

/// Training summary. Loss vectors cover every completed round, including
/// rounds discarded when the model is truncated back to `best_round`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainReport {
    /// Mean training logloss after each round.
    pub train_loss: Vec<f64>,
    /// Held-out validation logloss after each round.
    pub val_loss: Vec<f64>,
    /// Rounds actually run before stopping.
    pub stopped_round: usize,
    /// Round index (0-based) with minimal validation loss; `None` when no
    /// rounds ran.
    pub best_round: Option<usize>,
    /// True when training saw a single class and fell back to a constant
    /// model instead of boosting.
    pub single_class: bool,
    pub n_train_rows: usize,
    pub n_val_rows: usize,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("feature column {feature} contains a non-finite value")]
    NonFiniteFeature { feature: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("labels length {labels} does not match {rows} feature rows")]
    LabelCountMismatch { labels: usize, rows: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl GbdtModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_rounds(&self) -> usize {
        if self.classes.is_empty() {
            0
        } else {
            self.trees.len() / self.classes.len()
        }
    }

    fn check_row(&self, row: &[f64], layout_hash: u64) -> Result<(), PredictError> {
        if layout_hash != self.layout_hash {
            return Err(PredictError::LayoutMismatch {
                expected: self.layout_hash,
                found: layout_hash,
            });
        }
        if row.len() != self.n_features {
            return Err(PredictError::WidthMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(())
    }

    fn check_matrix(&self, matrix: &WindowedMatrix) -> Result<(), PredictError> {
        if matrix.layout_hash != self.layout_hash {
            return Err(PredictError::LayoutMismatch {
                expected: self.layout_hash,
                found: matrix.layout_hash,
            });
        }
        if matrix.n_cols() != self.n_features {
            return Err(PredictError::WidthMismatch {
                expected: self.n_features,
                got: matrix.n_cols(),
            });
        }
        Ok(())
    }

    fn score_row_unchecked(&self, row: &[f64]) -> Vec<f64> {
        let k = self.n_classes();
        let mut scores = self.base_scores.clone();
        for (t, tree) in self.trees.iter().enumerate() {
            scores[t % k] += tree.leaf_for_row(row).1;
        }
        scores
    }

    /// Raw per-class scores for one row.
    pub fn predict_scores_row(
        &self,
        row: &[f64],
        layout_hash: u64,
    ) -> Result<Vec<f64>, PredictError> {
        self.check_row(row, layout_hash)?;
        Ok(self.score_row_unchecked(row))
    }

    /// Softmax probabilities for one row.
    pub fn predict_proba_row(
        &self,
        row: &[f64],
        layout_hash: u64,
    ) -> Result<Vec<f64>, PredictError> {
        self.check_row(row, layout_hash)?;
        let scores = self.score_row_unchecked(row);
        let mut proba = vec![0.0; scores.len()];
        loss::softmax_row(&scores, &mut proba);
        Ok(proba)
    }

    /// Predicted label id for one row: argmax of the raw scores, ties to the
    /// lowest class id.
    pub fn predict_label_row(&self, row: &[f64], layout_hash: u64) -> Result<u32, PredictError> {
        self.check_row(row, layout_hash)?;
        let scores = self.score_row_unchecked(row);
        Ok(self.classes[argmax(&scores)])
    }

    /// Leaf embedding of one row: the leaf id reached in every tree, in the
    /// round-major tree order.
    pub fn leaf_indices_row(&self, row: &[f64], layout_hash: u64) -> Result<Vec<u16>, PredictError> {
        self.check_row(row, layout_hash)?;
        Ok(self
            .trees
            .iter()
            .map(|tree| tree.leaf_for_row(row).0)
            .collect())
    }

    /// Raw scores for every matrix row, N x K.
    pub fn predict_scores(&self, matrix: &WindowedMatrix) -> Result<Vec<Vec<f64>>, PredictError> {
        self.check_matrix(matrix)?;
        Ok((0..matrix.n_rows)
            .map(|i| self.score_row_unchecked(&matrix.row(i)))
            .collect())
    }

    /// Softmax probabilities for every matrix row, N x K.
    pub fn predict_proba(&self, matrix: &WindowedMatrix) -> Result<Vec<Vec<f64>>, PredictError> {
        let scores = self.predict_scores(matrix)?;
        Ok(scores
            .into_iter()
            .map(|s| {
                let mut proba = vec![0.0; s.len()];
                loss::softmax_row(&s, &mut proba);
                proba
            })
            .collect())
    }

    /// Predicted label ids for every matrix row.
    pub fn predict_label(&self, matrix: &WindowedMatrix) -> Result<Vec<u32>, PredictError> {
        self.check_matrix(matrix)?;
        Ok((0..matrix.n_rows)
            .map(|i| {
                let scores = self.score_row_unchecked(&matrix.row(i));
                self.classes[argmax(&scores)]
            })
            .collect())
    }

    /// Leaf embeddings for every matrix row, N x (rounds * classes).
    pub fn leaf_indices(&self, matrix: &WindowedMatrix) -> Result<Vec<Vec<u16>>, PredictError> {
        self.check_matrix(matrix)?;
        Ok((0..matrix.n_rows)
            .map(|i| {
                let row = matrix.row(i);
                self.trees
                    .iter()
                    .map(|tree| tree.leaf_for_row(&row).0)
                    .collect()
            })
            .collect())
    }

    /// FNV-1a checksum over the serialized model core (everything except the
    /// OOD section). The OOD detector stores this value to bind itself to
    /// the exact forest that produced its embeddings.
    pub fn checksum(&self) -> u64 {
        io::model_core_checksum(self)
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::layout_hash;
    use proptest::prelude::*;

    fn leaf(leaf_id: u16, value: f64) -> TreeNode {
        TreeNode::Leaf { leaf_id, value }
    }

    /// Root split on feature 0 at 0.5: left leaf 0 (-1.0), right leaf 1 (2.0).
    fn stump() -> Tree {
        Tree {
            nodes: vec![
                TreeNode::Internal {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                leaf(0, -1.0),
                leaf(1, 2.0),
            ],
            n_leaves: 2,
        }
    }

    fn prior_model(classes: Vec<u32>, base_scores: Vec<f64>, n_features: usize) -> GbdtModel {
        GbdtModel {
            config: GbdtConfig::default(),
            tau: 1,
            layout_hash: layout_hash(1),
            n_features,
            classes,
            base_scores,
            bin_edges: vec![Vec::new(); n_features],
            trees: Vec::new(),
            ood: None,
        }
    }

    #[test]
    fn default_config_is_valid() {
        GbdtConfig::default().validate().unwrap();
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let mut c = GbdtConfig::default();
        c.num_leaves = 1;
        assert!(matches!(c.validate(), Err(ConfigError::NumLeaves(1))));
        let mut c = GbdtConfig::default();
        c.learning_rate = 0.0;
        assert!(matches!(c.validate(), Err(ConfigError::LearningRate(_))));
        let mut c = GbdtConfig::default();
        c.feature_fraction = 1.5;
        assert!(matches!(c.validate(), Err(ConfigError::FeatureFraction(_))));
        let mut c = GbdtConfig::default();
        c.histogram_bins = 257;
        assert!(matches!(c.validate(), Err(ConfigError::HistogramBins(257))));
        let mut c = GbdtConfig::default();
        c.l2_lambda = f64::NAN;
        assert!(matches!(c.validate(), Err(ConfigError::Lambda(_))));
    }

    #[test]
    fn hand_built_stump_routes_rows_to_documented_leaves() {
        let tree = stump();
        assert_eq!(tree.leaf_for_row(&[0.0]), (0, -1.0));
        assert_eq!(tree.leaf_for_row(&[1.0]), (1, 2.0));
        // Boundary value goes left (x <= threshold).
        assert_eq!(tree.leaf_for_row(&[0.5]), (0, -1.0));
        // NaN takes the fixed default direction, left.
        assert_eq!(tree.leaf_for_row(&[f64::NAN]), (0, -1.0));
    }

    #[test]
    fn zero_round_model_predicts_class_priors() {
        let priors = [0.2f64, 0.3, 0.5];
        let model = prior_model(
            vec![2, 5, 9],
            priors.iter().map(|p| p.ln()).collect(),
            103,
        );
        let hash = layout_hash(1);
        let row = vec![0.0; 103];
        let proba = model.predict_proba_row(&row, hash).unwrap();
        for (p, want) in proba.iter().zip(priors) {
            assert!((p - want).abs() < 1e-12, "{p} vs {want}");
        }
        assert_eq!(model.predict_label_row(&row, hash).unwrap(), 9);
    }

    #[test]
    fn shifting_all_base_scores_leaves_labels_and_probabilities_unchanged() {
        let model = prior_model(vec![0, 1, 3], vec![0.3, -0.2, 0.1], 4);
        let mut shifted = model.clone();
        for s in &mut shifted.base_scores {
            *s += 37.25;
        }
        let hash = layout_hash(1);
        let row = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(
            model.predict_label_row(&row, hash).unwrap(),
            shifted.predict_label_row(&row, hash).unwrap()
        );
        let a = model.predict_proba_row(&row, hash).unwrap();
        let b = shifted.predict_proba_row(&row, hash).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_ties_resolve_to_lowest_class_id() {
        assert_eq!(argmax(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
        let model = prior_model(vec![4, 7, 12], vec![0.0, 0.0, 0.0], 2);
        assert_eq!(
            model
                .predict_label_row(&[0.0, 0.0], layout_hash(1))
                .unwrap(),
            4
        );
    }

    #[test]
    fn single_tree_contributions_accumulate_onto_base_scores() {
        let mut model = prior_model(vec![0, 1], vec![0.1, 0.2], 1);
        model.trees = vec![stump(), stump()];
        let hash = layout_hash(1);
        let scores = model.predict_scores_row(&[0.0], hash).unwrap();
        assert_eq!(scores, vec![0.1 - 1.0, 0.2 - 1.0]);
        let scores = model.predict_scores_row(&[1.0], hash).unwrap();
        assert_eq!(scores, vec![0.1 + 2.0, 0.2 + 2.0]);
    }

    #[test]
    fn leaf_indices_follow_round_major_tree_order() {
        let mut model = prior_model(vec![0, 1], vec![0.0, 0.0], 1);
        let mut flipped = stump();
        // Swap children so the same input lands in a different leaf id.
        flipped.nodes[0] = TreeNode::Internal {
            feature: 0,
            threshold: 0.5,
            left: 2,
            right: 1,
        };
        model.trees = vec![stump(), flipped];
        let emb = model.leaf_indices_row(&[0.0], layout_hash(1)).unwrap();
        assert_eq!(emb, vec![0, 1]);
        let emb = model.leaf_indices_row(&[1.0], layout_hash(1)).unwrap();
        assert_eq!(emb, vec![1, 0]);
    }

    #[test]
    fn identical_rows_get_identical_embeddings() {
        let mut model = prior_model(vec![0, 1], vec![0.0, 0.0], 1);
        model.trees = vec![stump(), stump()];
        let hash = layout_hash(1);
        let a = model.leaf_indices_row(&[0.3], hash).unwrap();
        let b = model.leaf_indices_row(&[0.3], hash).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn layout_and_width_mismatches_are_rejected() {
        let model = prior_model(vec![0, 1], vec![0.0, 0.0], 103);
        let err = model
            .predict_scores_row(&vec![0.0; 103], layout_hash(5))
            .unwrap_err();
        assert!(matches!(err, PredictError::LayoutMismatch { .. }));
        let err = model
            .predict_scores_row(&[0.0; 4], layout_hash(1))
            .unwrap_err();
        assert!(matches!(
            err,
            PredictError::WidthMismatch {
                expected: 103,
                got: 4
            }
        ));
    }

    proptest! {
        #[test]
        fn probability_rows_always_sum_to_one(
            scores in proptest::collection::vec(-50.0f64..50.0, 2..20),
        ) {
            let n = scores.len();
            let mut model = prior_model((0..n as u32).collect(), scores, 1);
            model.trees = (0..n).map(|_| stump()).collect();
            for x in [-1.0, 0.0, 0.5, 2.0] {
                let proba = model.predict_proba_row(&[x], layout_hash(1)).unwrap();
                let sum: f64 = proba.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(proba.iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }
}
