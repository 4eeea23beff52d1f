//! The boosting loop: binning, per-class leaf-wise tree growth, score
//! maintenance, and early stopping.
//!
//! Memory layout choices follow the single-core budget for desk-scale
//! datasets (about 100k rows by 927 windowed features at tau 5):
//!
//! * feature columns are consumed into `u8` bin codes, then dropped; the
//!   codes are stored row-major so a histogram pass over a node reads each
//!   of its rows as one contiguous strip instead of touching a cache line
//!   per row in every column;
//! * per-tree gradient/hessian pairs are gathered into `(f32, f32)` so one
//!   histogram add touches 9 bytes of sequential input;
//! * big nodes fill compact `f32` histograms and derive the larger child
//!   from the parent buffer by sibling subtraction (only the smaller child
//!   is built directly); small nodes skip concatenated histograms entirely
//!   and search feature by feature through a cache-resident mini histogram.
//!
//! Determinism: feature subsampling draws from RNG stream
//! `4_000_000 + tree_counter`, the validation holdout from stream
//! `3_000_000 + class`, rows keep ascending order through stable partitions,
//! and every tie in the split search is broken by a documented rule, so a
//! fixed seed reproduces the model bit for bit.

use std::time::Instant;

use crate::data::stratified_indices;
use crate::features::WindowedMatrix;
use crate::rng::{sample_indices, stream_rng};

use super::binning::{bin_column, equal_frequency_edges};
use super::loss::{softmax_logloss, softmax_logloss_only};
use super::split::{
    accumulate_hist, best_split_direct, best_split_sampled, subtract_and_search, sum_gh, GhBin,
    HistBin, SplitCandidate,
};
use super::{GbdtConfig, GbdtModel, TrainError, TrainReport, Tree, TreeNode};

/// RNG stream base for the per-class validation holdout shuffle.
const VALIDATION_STREAM_BASE: u64 = 3_000_000;
/// RNG stream base for per-tree feature subsampling; the round-major tree
/// counter is added.
const FEATURE_STREAM_BASE: u64 = 4_000_000;
/// Fraction of training rows held out per class to monitor early stopping.
const VALIDATION_FRACTION: f64 = 0.1;
/// Nodes below this many rows split through [`best_split_direct`]: per-node
/// work is then proportional to the node instead of the full histogram, and
/// the node's code rows fit comfortably in cache for the per-feature walks.
const DIRECT_SPLIT_CUTOFF: usize = 1024;

/// Trains a multiclass boosted-tree model.
///
/// The matrix is consumed: columns are replaced by bin codes one at a time,
/// holding peak memory near one extra column. A stratified 10% of rows per
/// class is held out; after each round the held-out logloss is evaluated and
/// training stops once it fails to improve for `early_stop_patience` rounds,
/// truncating the forest back to the best round. With a single distinct
/// label the result is a constant model (no trees, reported via
/// [`TrainReport::single_class`]); with too few rows per class to hold
/// anything out, early stopping is disabled and all rounds run.
pub fn train(
    features: WindowedMatrix,
    labels: &[u32],
    config: &GbdtConfig,
) -> Result<(GbdtModel, TrainReport), TrainError> {
    let started = Instant::now();
    config.validate()?;
    let n_total = features.n_rows;
    if n_total == 0 {
        return Err(TrainError::EmptyTrainingSet);
    }
    if labels.len() != n_total {
        return Err(TrainError::LabelCountMismatch {
            labels: labels.len(),
            rows: n_total,
        });
    }

    let tau = features.tau;
    let layout_hash = features.layout_hash;
    let n_features = features.n_cols();

    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    if classes.len() == 1 {
        let model = GbdtModel {
            config: config.clone(),
            tau,
            layout_hash,
            n_features,
            classes,
            base_scores: vec![0.0],
            bin_edges: vec![Vec::new(); n_features],
            trees: Vec::new(),
            ood: None,
        };
        let report = TrainReport {
            train_loss: Vec::new(),
            val_loss: Vec::new(),
            stopped_round: 0,
            best_round: None,
            single_class: true,
            n_train_rows: n_total,
            n_val_rows: 0,
            train_seconds: started.elapsed().as_secs_f64(),
        };
        return Ok((model, report));
    }

    let k = classes.len();
    let y: Vec<u32> = labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap() as u32)
        .collect();

    // Validation holdout, stratified per class over rows.
    let row_labels: Vec<(usize, u32)> = y.iter().enumerate().map(|(i, &c)| (i, c)).collect();
    let (train_rows, val_rows) = stratified_indices(
        &row_labels,
        1.0 - VALIDATION_FRACTION,
        config.seed,
        VALIDATION_STREAM_BASE,
    );
    let n_train = train_rows.len();
    let n_val = val_rows.len();

    // Bin every column, dropping the raw values as we go and scattering the
    // codes into row-major train and validation buffers (row stride is the
    // full feature count).
    let mut features = features;
    let mut bin_edges: Vec<Vec<f64>> = Vec::with_capacity(n_features);
    let mut codes_tr = vec![0u8; n_train * n_features];
    let mut codes_val = vec![0u8; n_val * n_features];
    for f in 0..n_features {
        let col = std::mem::take(&mut features.cols[f]);
        let edges = equal_frequency_edges(&col, config.histogram_bins);
        let col_codes = bin_column(&col, &edges, f)?;
        for (i, &r) in train_rows.iter().enumerate() {
            codes_tr[i * n_features + f] = col_codes[r];
        }
        for (j, &r) in val_rows.iter().enumerate() {
            codes_val[j * n_features + f] = col_codes[r];
        }
        bin_edges.push(edges);
    }
    drop(features);
    let y_tr: Vec<u32> = train_rows.iter().map(|&r| y[r]).collect();
    let y_val: Vec<u32> = val_rows.iter().map(|&r| y[r]).collect();

    // Log priors over the rows the trees actually fit.
    let mut class_counts = vec![0u64; k];
    for &c in &y_tr {
        class_counts[c as usize] += 1;
    }
    let base_scores: Vec<f64> = class_counts
        .iter()
        .map(|&c| (c as f64 / n_train as f64).ln())
        .collect();

    let mut scores_tr = vec![0.0f64; n_train * k];
    for row in scores_tr.chunks_exact_mut(k) {
        row.copy_from_slice(&base_scores);
    }
    let mut scores_val = vec![0.0f64; n_val * k];
    for row in scores_val.chunks_exact_mut(k) {
        row.copy_from_slice(&base_scores);
    }

    let n_sampled = ((config.feature_fraction * n_features as f64).round() as usize)
        .clamp(1, n_features);
    let all_features: Vec<usize> = (0..n_features).collect();

    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_round: 0,
        best_round: None,
        single_class: false,
        n_train_rows: n_train,
        n_val_rows: n_val,
        train_seconds: 0.0,
    };

    let mut trees: Vec<Tree> = Vec::new();
    let mut arena = HistArena::default();
    let mut gh: Vec<(f32, f32)> = vec![(0.0, 0.0); n_train];
    let mut best_val = f64::INFINITY;
    let mut best_round: Option<usize> = None;
    let mut rounds_since_best = 0usize;
    let mut tree_counter = 0u64;

    for round in 0..config.max_rounds {
        let (_, grads, hess) =
            softmax_logloss(&scores_tr, &y_tr, k).expect("internal labels are dense and in range");

        for slot in 0..k {
            for (i, pair) in gh.iter_mut().enumerate() {
                *pair = (grads[i * k + slot] as f32, hess[i * k + slot] as f32);
            }

            let sampled: Vec<usize> = if n_sampled == n_features {
                all_features.clone()
            } else {
                let mut rng = stream_rng(config.seed, FEATURE_STREAM_BASE + tree_counter);
                let mut s = sample_indices(&mut rng, n_features, n_sampled);
                s.sort_unstable();
                s
            };
            let mut offsets = Vec::with_capacity(sampled.len() + 1);
            let mut total_bins = 0usize;
            offsets.push(0);
            for &f in &sampled {
                total_bins += bin_edges[f].len() + 1;
                offsets.push(total_bins);
            }

            let ctx = TreeCtx {
                codes: &codes_tr,
                width: n_features,
                edges: &bin_edges,
                gh: &gh,
                sampled: &sampled,
                offsets: &offsets,
                total_bins,
                lambda: config.l2_lambda,
                learning_rate: config.learning_rate,
                min_n: config.min_samples_leaf as u64,
                num_leaves: config.num_leaves,
            };
            let grown = grow_tree(&ctx, n_train, &mut arena);

            for (rows, value) in &grown.leaf_updates {
                for &r in rows {
                    scores_tr[r as usize * k + slot] += value;
                }
            }
            for j in 0..n_val {
                scores_val[j * k + slot] += traverse_codes(
                    &grown.grow_nodes,
                    &grown.node_values,
                    &codes_val[j * n_features..(j + 1) * n_features],
                );
            }
            trees.push(grown.tree);
            tree_counter += 1;
        }

        report.stopped_round = round + 1;
        report
            .train_loss
            .push(softmax_logloss_only(&scores_tr, &y_tr, k).expect("shape checked"));

        if n_val > 0 {
            let val_loss = softmax_logloss_only(&scores_val, &y_val, k).expect("shape checked");
            report.val_loss.push(val_loss);
            if val_loss < best_val {
                best_val = val_loss;
                best_round = Some(round);
                rounds_since_best = 0;
            } else {
                rounds_since_best += 1;
                if rounds_since_best >= config.early_stop_patience {
                    break;
                }
            }
        }
    }

    // Truncate the forest back to the best validated round. Without a
    // validation set every completed round is kept.
    if let Some(best) = best_round {
        trees.truncate((best + 1) * k);
    }
    report.best_round = best_round;

    let model = GbdtModel {
        config: config.clone(),
        tau,
        layout_hash,
        n_features,
        classes,
        base_scores,
        bin_edges,
        trees,
        ood: None,
    };
    report.train_seconds = started.elapsed().as_secs_f64();
    Ok((model, report))
}

/// Recycles histogram buffers across leaves and trees; buffer sizes vary
/// only with the per-tree feature sample, so capacity stabilizes quickly.
#[derive(Default)]
struct HistArena {
    bufs: Vec<Vec<HistBin>>,
}

impl HistArena {
    fn take(&mut self, size: usize) -> Vec<HistBin> {
        let mut b = self.bufs.pop().unwrap_or_default();
        b.clear();
        b.resize(size, HistBin::default());
        b
    }

    fn put(&mut self, b: Vec<HistBin>) {
        self.bufs.push(b);
    }
}

struct TreeCtx<'a> {
    /// Row-major bin codes for the training subset, stride `width`.
    codes: &'a [u8],
    width: usize,
    edges: &'a [Vec<f64>],
    gh: &'a [(f32, f32)],
    sampled: &'a [usize],
    offsets: &'a [usize],
    total_bins: usize,
    lambda: f64,
    learning_rate: f64,
    min_n: u64,
    num_leaves: usize,
}

/// Growth-time node; leaves are placeholders until finalization. Split
/// comparisons run on bin codes, so the validation pass can traverse without
/// raw feature values.
#[derive(Clone)]
enum GrowNode {
    Internal {
        feature: usize,
        bin: u8,
        left: u32,
        right: u32,
    },
    Leaf,
}

struct GrownTree {
    tree: Tree,
    grow_nodes: Vec<GrowNode>,
    /// Leaf value per node index (0.0 at internal nodes).
    node_values: Vec<f64>,
    /// Train-subset rows and the shrunk value to add to their scores.
    leaf_updates: Vec<(Vec<u32>, f64)>,
}

struct FrontierLeaf {
    node: usize,
    rows: Vec<u32>,
    totals: GhBin,
    /// Present only for histogram-path leaves with a viable candidate;
    /// leaves searched through the direct path carry `best` alone.
    hist: Option<Vec<HistBin>>,
    best: Option<SplitCandidate>,
}

/// Grows one tree leaf-wise: repeatedly split the frontier leaf with the
/// highest gain until `num_leaves` is reached or no leaf has positive gain.
/// Frontier ties resolve to the earliest-created leaf (left child first).
fn grow_tree(ctx: &TreeCtx<'_>, n_rows: usize, arena: &mut HistArena) -> GrownTree {
    let mut nodes: Vec<GrowNode> = vec![GrowNode::Leaf];
    let mut frontier: Vec<FrontierLeaf> = Vec::new();
    let mut n_leaves = 1usize;

    let root_rows: Vec<u32> = (0..n_rows as u32).collect();
    let root_totals = sum_gh(&root_rows, ctx.gh);
    let mut root_hist = arena.take(ctx.total_bins);
    accumulate_hist(
        ctx.codes,
        ctx.width,
        ctx.sampled,
        ctx.offsets,
        &root_rows,
        ctx.gh,
        &mut root_hist,
    );
    let root_best = best_split_sampled(
        &root_hist,
        ctx.sampled,
        ctx.offsets,
        ctx.edges,
        root_totals,
        ctx.lambda,
        ctx.min_n,
    );
    frontier.push(FrontierLeaf {
        node: 0,
        rows: root_rows,
        totals: root_totals,
        hist: if root_best.is_some() {
            Some(root_hist)
        } else {
            arena.put(root_hist);
            None
        },
        best: root_best,
    });

    while n_leaves < ctx.num_leaves {
        let mut pick: Option<usize> = None;
        for (i, leaf) in frontier.iter().enumerate() {
            if let Some(b) = &leaf.best {
                let better = match pick {
                    None => true,
                    Some(p) => b.gain > frontier[p].best.as_ref().unwrap().gain,
                };
                if better {
                    pick = Some(i);
                }
            }
        }
        let Some(pick) = pick else { break };
        // Plain remove keeps the frontier in creation order for the tie rule.
        let leaf = frontier.remove(pick);
        let cand = leaf.best.expect("picked leaf has a candidate");
        let n_parent_rows = leaf.rows.len();

        // Stable partition preserves ascending row order in both children.
        let mut left_rows = Vec::with_capacity(cand.left.n as usize);
        let mut right_rows = Vec::with_capacity(cand.right.n as usize);
        for &r in &leaf.rows {
            if ctx.codes[r as usize * ctx.width + cand.feature] <= cand.bin {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        debug_assert_eq!(left_rows.len() as u64, cand.left.n);
        debug_assert_eq!(right_rows.len() as u64, cand.right.n);

        let left_node = nodes.len();
        nodes.push(GrowNode::Leaf);
        let right_node = nodes.len();
        nodes.push(GrowNode::Leaf);
        nodes[leaf.node] = GrowNode::Internal {
            feature: cand.feature,
            bin: cand.bin,
            left: left_node as u32,
            right: right_node as u32,
        };
        n_leaves += 1;

        // Totals are summed directly for the smaller child and derived for
        // the larger. A child below `2 * min_n` rows cannot split, so its
        // search is skipped. Small parents take the direct per-feature path;
        // big parents build the smaller child's histogram and derive the
        // larger sibling by subtraction from their own buffer.
        let left_is_small = left_rows.len() <= right_rows.len();
        let (small_rows, big_rows) = if left_is_small {
            (&left_rows, &right_rows)
        } else {
            (&right_rows, &left_rows)
        };
        let small_totals = sum_gh(small_rows, ctx.gh);
        let big_totals = GhBin {
            g: leaf.totals.g - small_totals.g,
            h: leaf.totals.h - small_totals.h,
            n: leaf.totals.n - small_totals.n,
        };
        let scan_small = small_rows.len() as u64 >= 2 * ctx.min_n;
        let scan_big = big_rows.len() as u64 >= 2 * ctx.min_n;
        let mut best_small = None;
        let mut best_big = None;
        let mut small_hist = None;
        let mut big_hist = None;
        if n_parent_rows < DIRECT_SPLIT_CUTOFF {
            if let Some(h) = leaf.hist {
                arena.put(h);
            }
            if scan_small {
                best_small = best_split_direct(
                    ctx.codes,
                    ctx.width,
                    ctx.sampled,
                    ctx.edges,
                    small_rows,
                    ctx.gh,
                    small_totals,
                    ctx.lambda,
                    ctx.min_n,
                );
            }
            if scan_big {
                best_big = best_split_direct(
                    ctx.codes,
                    ctx.width,
                    ctx.sampled,
                    ctx.edges,
                    big_rows,
                    ctx.gh,
                    big_totals,
                    ctx.lambda,
                    ctx.min_n,
                );
            }
        } else {
            let parent_hist = leaf.hist.expect("big splittable leaves keep their histograms");
            if scan_small || scan_big {
                let mut small = arena.take(ctx.total_bins);
                accumulate_hist(
                    ctx.codes,
                    ctx.width,
                    ctx.sampled,
                    ctx.offsets,
                    small_rows,
                    ctx.gh,
                    &mut small,
                );
                let mut big = parent_hist;
                (best_small, best_big) = subtract_and_search(
                    &mut big,
                    &small,
                    ctx.sampled,
                    ctx.offsets,
                    ctx.edges,
                    small_totals,
                    big_totals,
                    ctx.lambda,
                    ctx.min_n,
                    scan_small,
                    scan_big,
                );
                if best_small.is_some() {
                    small_hist = Some(small);
                } else {
                    arena.put(small);
                }
                if best_big.is_some() {
                    big_hist = Some(big);
                } else {
                    arena.put(big);
                }
            } else {
                arena.put(parent_hist);
            }
        }

        // Children enter the frontier left first (creation order).
        let (left_state, right_state) = if left_is_small {
            ((small_totals, small_hist, best_small), (big_totals, big_hist, best_big))
        } else {
            ((big_totals, big_hist, best_big), (small_totals, small_hist, best_small))
        };
        for (node, rows, (totals, hist, best)) in
            [(left_node, left_rows, left_state), (right_node, right_rows, right_state)]
        {
            frontier.push(FrontierLeaf {
                node,
                rows,
                totals,
                hist,
                best,
            });
        }
    }

    // Newton values with shrinkage for every remaining leaf.
    let mut by_node: Vec<Option<(Vec<u32>, GhBin)>> = (0..nodes.len()).map(|_| None).collect();
    for leaf in frontier {
        if let Some(h) = leaf.hist {
            arena.put(h);
        }
        by_node[leaf.node] = Some((leaf.rows, leaf.totals));
    }
    let mut node_values = vec![0.0f64; nodes.len()];
    let mut leaf_updates = Vec::new();
    for (idx, gn) in nodes.iter().enumerate() {
        if matches!(gn, GrowNode::Leaf) {
            let (rows, totals) = by_node[idx]
                .take()
                .expect("every leaf node has frontier state");
            let denom = totals.h + ctx.lambda;
            let value = if denom > 0.0 {
                -ctx.learning_rate * totals.g / denom
            } else {
                0.0
            };
            node_values[idx] = value;
            leaf_updates.push((rows, value));
        }
    }

    // Emit the final tree in preorder (matching the file format's node
    // order) with dense leaf ids assigned along the way.
    let mut tree_nodes = Vec::with_capacity(nodes.len());
    let mut next_leaf_id: u16 = 0;
    emit_preorder(
        0,
        &nodes,
        &node_values,
        ctx.edges,
        &mut tree_nodes,
        &mut next_leaf_id,
    );

    GrownTree {
        tree: Tree {
            nodes: tree_nodes,
            n_leaves: next_leaf_id,
        },
        grow_nodes: nodes,
        node_values,
        leaf_updates,
    }
}

/// Copies the grown tree rooted at `old` into `out` in preorder, resolving
/// bin splits to raw thresholds. Returns the new index of the copied node.
fn emit_preorder(
    old: usize,
    grow: &[GrowNode],
    values: &[f64],
    edges: &[Vec<f64>],
    out: &mut Vec<TreeNode>,
    next_leaf_id: &mut u16,
) -> usize {
    match &grow[old] {
        GrowNode::Leaf => {
            let idx = out.len();
            out.push(TreeNode::Leaf {
                leaf_id: *next_leaf_id,
                value: values[old],
            });
            *next_leaf_id += 1;
            idx
        }
        GrowNode::Internal {
            feature,
            bin,
            left,
            right,
        } => {
            let idx = out.len();
            // Placeholder until both children are emitted.
            out.push(TreeNode::Leaf {
                leaf_id: 0,
                value: 0.0,
            });
            let new_left = emit_preorder(*left as usize, grow, values, edges, out, next_leaf_id);
            let new_right = emit_preorder(*right as usize, grow, values, edges, out, next_leaf_id);
            out[idx] = TreeNode::Internal {
                feature: *feature,
                threshold: edges[*feature][*bin as usize],
                left: new_left,
                right: new_right,
            };
            idx
        }
    }
}

/// Routes one row of bin codes through a grown tree and returns the reached
/// leaf value. `code <= bin` is exactly `value <= threshold`.
fn traverse_codes(nodes: &[GrowNode], values: &[f64], row: &[u8]) -> f64 {
    let mut idx = 0usize;
    loop {
        match &nodes[idx] {
            GrowNode::Internal {
                feature,
                bin,
                left,
                right,
            } => {
                idx = if row[*feature] <= *bin {
                    *left as usize
                } else {
                    *right as usize
                };
            }
            GrowNode::Leaf => return values[idx],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::BASE_FEATURE_COUNT;

    /// Deterministic pseudo-random stream for test data construction.
    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Builds a tau=1 matrix from rows that are zero except for the first
    /// few features.
    fn matrix_from_signal(signal: &[Vec<f64>]) -> WindowedMatrix {
        let rows: Vec<Vec<f64>> = signal
            .iter()
            .map(|s| {
                let mut row = vec![0.0; BASE_FEATURE_COUNT];
                row[..s.len()].copy_from_slice(s);
                row
            })
            .collect();
        WindowedMatrix::build(&[&rows], 1).unwrap()
    }

    fn small_config() -> GbdtConfig {
        GbdtConfig {
            num_leaves: 8,
            learning_rate: 0.3,
            feature_fraction: 1.0,
            max_rounds: 10,
            early_stop_patience: 5,
            min_samples_leaf: 2,
            l2_lambda: 1e-3,
            histogram_bins: 256,
            seed: 7,
        }
    }

    /// Three clusters on feature 0, labels = cluster. A depth-1 split chain
    /// separates them, so training accuracy must reach 100% quickly.
    #[test]
    fn separable_toy_reaches_full_training_accuracy() {
        let mut state = 41u64;
        let mut signal = Vec::new();
        let mut labels = Vec::new();
        for class in 0u32..3 {
            for _ in 0..40 {
                signal.push(vec![class as f64 + 0.4 * lcg(&mut state), lcg(&mut state)]);
                labels.push(class + 10); // raw ids need not be dense
            }
        }
        let matrix = matrix_from_signal(&signal);
        let (model, report) = train(matrix, &labels, &small_config()).unwrap();
        assert!(report.stopped_round <= 10);
        assert_eq!(model.classes, vec![10, 11, 12]);

        let matrix = matrix_from_signal(&signal);
        let predicted = model.predict_label(&matrix).unwrap();
        let correct = predicted
            .iter()
            .zip(&labels)
            .filter(|(p, l)| p == l)
            .count();
        assert_eq!(correct, labels.len(), "toy set must be fully separated");
    }

    #[test]
    fn train_loss_is_monotone_with_all_features() {
        let mut state = 123u64;
        let mut signal = Vec::new();
        let mut labels = Vec::new();
        for i in 0..240 {
            let noise: Vec<f64> = (0..5).map(|_| lcg(&mut state)).collect();
            // Label depends on two features plus noise, a non-trivial fit.
            let c = ((noise[0] + 0.7 * noise[1] + 0.3 * lcg(&mut state)) * 2.0) as u32 % 4;
            signal.push(noise);
            labels.push(c);
            let _ = i;
        }
        let mut config = small_config();
        config.max_rounds = 25;
        config.early_stop_patience = 25;
        let (_, report) = train(matrix_from_signal(&signal), &labels, &config).unwrap();
        assert_eq!(report.train_loss.len(), report.stopped_round);
        for w in report.train_loss.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12,
                "train loss increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn same_seed_trains_identical_models() {
        let mut state = 9u64;
        let signal: Vec<Vec<f64>> = (0..150)
            .map(|_| (0..4).map(|_| lcg(&mut state)).collect())
            .collect();
        let labels: Vec<u32> = signal
            .iter()
            .map(|s| if s[0] + s[1] > 1.0 { 1 } else { 0 })
            .collect();
        let mut config = small_config();
        config.feature_fraction = 0.5;
        let (a, ra) = train(matrix_from_signal(&signal), &labels, &config).unwrap();
        let (b, rb) = train(matrix_from_signal(&signal), &labels, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.train_loss, rb.train_loss);
        assert_eq!(ra.val_loss, rb.val_loss);

        let mut other = config.clone();
        other.seed = 8;
        let (c, _) = train(matrix_from_signal(&signal), &labels, &other).unwrap();
        assert_ne!(a, c, "a different seed must change the model");
    }

    #[test]
    fn early_stopping_truncates_to_best_round() {
        let mut state = 77u64;
        let signal: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..6).map(|_| lcg(&mut state)).collect())
            .collect();
        // Labels independent of features: validation loss cannot keep
        // improving, so patience must trigger well before max_rounds.
        let labels: Vec<u32> = (0..300).map(|_| (lcg(&mut state) * 3.0) as u32).collect();
        let mut config = small_config();
        config.max_rounds = 60;
        config.early_stop_patience = 3;
        let (model, report) = train(matrix_from_signal(&signal), &labels, &config).unwrap();
        assert!(report.stopped_round < 60, "patience never triggered");
        let best = report.best_round.expect("validation ran");
        let min_val = report
            .val_loss
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.val_loss[best], min_val);
        assert_eq!(model.trees.len(), (best + 1) * model.n_classes());
    }

    #[test]
    fn single_class_degenerates_to_constant_model() {
        let signal: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels = vec![6u32; 20];
        let (model, report) = train(matrix_from_signal(&signal), &labels, &small_config()).unwrap();
        assert!(report.single_class);
        assert!(model.trees.is_empty());
        let matrix = matrix_from_signal(&signal);
        assert_eq!(model.predict_label(&matrix).unwrap(), vec![6u32; 20]);
        let proba = model.predict_proba(&matrix).unwrap();
        assert!(proba.iter().all(|row| row == &vec![1.0]));
    }

    #[test]
    fn zero_rounds_yields_prior_model() {
        let signal: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let labels: Vec<u32> = (0..40).map(|i| u32::from(i % 4 == 0)).collect();
        let mut config = small_config();
        config.max_rounds = 0;
        let (model, report) = train(matrix_from_signal(&signal), &labels, &config).unwrap();
        assert_eq!(report.stopped_round, 0);
        assert_eq!(report.best_round, None);
        assert!(model.trees.is_empty());
        // 10 of 40 rows are class 1; the holdout is stratified, so the
        // boost-train prior stays 1/4.
        let matrix = matrix_from_signal(&signal);
        let proba = model.predict_proba(&matrix).unwrap();
        assert!((proba[0][1] - 0.25).abs() < 0.01, "prior was {}", proba[0][1]);
        assert_eq!(model.predict_label(&matrix).unwrap(), vec![0u32; 40]);
    }

    #[test]
    fn leaf_ids_are_dense_and_bounded() {
        let mut state = 5u64;
        let signal: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| lcg(&mut state)).collect())
            .collect();
        let labels: Vec<u32> = signal.iter().map(|s| (s[0] * 4.0) as u32).collect();
        let (model, _) = train(matrix_from_signal(&signal), &labels, &small_config()).unwrap();
        assert!(!model.trees.is_empty());
        for tree in &model.trees {
            assert!(tree.n_leaves as usize <= small_config().num_leaves);
            let mut seen = Vec::new();
            for node in &tree.nodes {
                if let TreeNode::Leaf { leaf_id, .. } = node {
                    seen.push(*leaf_id);
                }
            }
            let expect: Vec<u16> = (0..tree.n_leaves).collect();
            assert_eq!(seen, expect, "leaf ids must be dense in node order");
        }

        // Embeddings on the training matrix stay below each tree's count.
        let matrix = matrix_from_signal(&signal);
        let emb = model.leaf_indices(&matrix).unwrap();
        for row in &emb {
            for (t, &leaf) in row.iter().enumerate() {
                assert!(leaf < model.trees[t].n_leaves);
            }
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let signal: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let err = train(matrix_from_signal(&signal), &[1, 2], &small_config()).unwrap_err();
        assert!(matches!(err, TrainError::LabelCountMismatch { labels: 2, rows: 10 }));

        let empty = WindowedMatrix::build(&[], 1).unwrap();
        let err = train(empty, &[], &small_config()).unwrap_err();
        assert!(matches!(err, TrainError::EmptyTrainingSet));
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let mut signal: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        signal[3][0] = f64::NAN;
        let labels: Vec<u32> = (0..10).map(|i| i % 2).collect();
        let err = train(matrix_from_signal(&signal), &labels, &small_config()).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteFeature { feature: 0 }));
    }
}
