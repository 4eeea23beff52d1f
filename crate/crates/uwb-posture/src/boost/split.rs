//! Histogram construction and best-split search.
//!
//! A node's histogram holds, per sampled feature and bin, the gradient sum,
//! hessian sum, and row count. The split search walks each feature's bins
//! left to right and scores boundaries with the regularized second-order
//! gain `G_L^2/(H_L + lambda) + G_R^2/(H_R + lambda) - G_P^2/(H_P + lambda)`.
//! Ties break to the lowest feature index, then the lowest bin, so a search
//! over identical statistics is bit-reproducible.
//!
//! The trainer accumulates `f32` gradient/hessian pairs into compact 12-byte
//! `f32` bins ([`HistBin`]) and derives sibling histograms by subtraction
//! (building only the smaller child directly); cumulative sums and gains are
//! evaluated in `f64`, so the `f32` storage costs about six decimal digits
//! at the bin level and far less after the 256-bin prefix sum.
//! [`best_split_on_columns`] is the standalone entry point over raw `f64`
//! columns; it keeps full `f64` bins, shares the scan and tie-break logic,
//! and is the reference surface for comparing against an exact sorted-scan.

use super::binning::{bin_column, equal_frequency_edges};
use super::TrainError;

/// Feature block width for histogram accumulation: 128 segments of 257 bins
/// keep the active histogram slice under a megabyte so the scattered adds
/// stay cache-resident even when a node's rows span the whole code buffer.
const FEATURE_BLOCK: usize = 128;

/// Per-bin accumulator with `f64` sums: gradient, hessian, row count. Used
/// for node totals and by the raw-column reference path.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GhBin {
    pub g: f64,
    pub h: f64,
    pub n: u64,
}

impl GhBin {
    fn minus(self, other: GhBin) -> GhBin {
        GhBin {
            g: self.g - other.g,
            h: self.h - other.h,
            n: self.n - other.n,
        }
    }
}

/// Compact trainer histogram bin. Keeping it at 12 bytes roughly halves the
/// memory traffic of building, subtracting, and scanning node histograms,
/// which dominates training cost on wide windowed matrices.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct HistBin {
    pub g: f32,
    pub h: f32,
    pub n: u32,
}

/// Read access shared by both bin widths so the scan logic is written once.
pub(crate) trait BinStats: Copy {
    fn g64(self) -> f64;
    fn h64(self) -> f64;
    fn rows(self) -> u64;
}

impl BinStats for GhBin {
    fn g64(self) -> f64 {
        self.g
    }
    fn h64(self) -> f64 {
        self.h
    }
    fn rows(self) -> u64 {
        self.n
    }
}

impl BinStats for HistBin {
    fn g64(self) -> f64 {
        f64::from(self.g)
    }
    fn h64(self) -> f64 {
        f64::from(self.h)
    }
    fn rows(self) -> u64 {
        u64::from(self.n)
    }
}

/// A chosen split: rows with `feature value <= threshold` (equivalently bin
/// code `<= bin`) go left.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub bin: u8,
    pub threshold: f64,
    pub gain: f64,
    pub left: GhBin,
    pub right: GhBin,
}

/// Leaf objective value `G^2 / (H + lambda)`; 0 when the denominator is not
/// positive (possible only with `lambda = 0` and saturated probabilities).
fn objective(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

/// Scans one feature's bins for the best boundary. Returns
/// `(bin, gain, left_totals)` of the best positive-gain split, preferring
/// the lowest bin on exact gain ties. Prefix sums run in `f64` regardless of
/// the bin storage width.
pub(crate) fn scan_feature<B: BinStats>(
    bins: &[B],
    totals: GhBin,
    lambda: f64,
    min_n: u64,
) -> Option<(u8, f64, GhBin)> {
    if bins.len() < 2 {
        return None;
    }
    let parent_obj = objective(totals.g, totals.h, lambda);
    let mut left = GhBin::default();
    let mut best: Option<(u8, f64, GhBin)> = None;
    for b in 0..bins.len() - 1 {
        // A rowless bin repeats the previous partition, so its boundary can
        // never win under the strict comparison and the lowest-bin tie rule;
        // skipping also drops any f32 residue such bins pick up when
        // subtraction cancels all their rows.
        if bins[b].rows() == 0 {
            continue;
        }
        left.g += bins[b].g64();
        left.h += bins[b].h64();
        left.n += bins[b].rows();
        if left.n < min_n {
            continue;
        }
        let right = totals.minus(left);
        if right.n < min_n {
            break;
        }
        let gain =
            objective(left.g, left.h, lambda) + objective(right.g, right.h, lambda) - parent_obj;
        if gain > 0.0 && best.as_ref().map_or(true, |&(_, bg, _)| gain > bg) {
            best = Some((b as u8, gain, left));
        }
    }
    best
}

/// Accumulates `f32` gradient/hessian pairs for `rows` into a concatenated
/// histogram over the sampled features. `codes` is row-major with stride
/// `width` (one byte per feature per row), so a node touches `width`
/// sequential bytes per row regardless of how scattered its rows are.
/// `offsets` has one entry per sampled feature plus a terminator; segment
/// `si` spans `bins[offsets[si]..offsets[si + 1]]`. Features are processed
/// in blocks of [`FEATURE_BLOCK`] to bound the live histogram slice; the
/// per-bin addition order (ascending rows) is the same for any block size.
pub(crate) fn accumulate_hist(
    codes: &[u8],
    width: usize,
    sampled: &[usize],
    offsets: &[usize],
    rows: &[u32],
    gh: &[(f32, f32)],
    bins: &mut [HistBin],
) {
    let mut s0 = 0usize;
    while s0 < sampled.len() {
        let s1 = (s0 + FEATURE_BLOCK).min(sampled.len());
        let feats = &sampled[s0..s1];
        let starts = &offsets[s0..s1];
        for &r in rows {
            let r = r as usize;
            let (g, h) = gh[r];
            let row = &codes[r * width..(r + 1) * width];
            for (&f, &start) in feats.iter().zip(starts) {
                let bin = &mut bins[start + row[f] as usize];
                bin.g += g;
                bin.h += h;
                bin.n += 1;
            }
        }
        s0 = s1;
    }
}

/// Sibling derivation: `parent - child`, in place.
pub(crate) fn subtract_hist(parent: &mut [HistBin], child: &[HistBin]) {
    debug_assert_eq!(parent.len(), child.len());
    for (p, c) in parent.iter_mut().zip(child) {
        p.g -= c.g;
        p.h -= c.h;
        p.n -= c.n;
    }
}

/// Node totals summed directly from the row list (the canonical totals; bin
/// sums would reorder the floating-point accumulation).
pub(crate) fn sum_gh(rows: &[u32], gh: &[(f32, f32)]) -> GhBin {
    let mut t = GhBin::default();
    for &r in rows {
        let (g, h) = gh[r as usize];
        t.g += g as f64;
        t.h += h as f64;
        t.n += 1;
    }
    t
}

/// Folds one feature's scan result into the running best. Features must be
/// offered in ascending index order; replacement only on strictly greater
/// gain realizes the documented tie-break.
fn consider(
    best: &mut Option<SplitCandidate>,
    feature: usize,
    scanned: Option<(u8, f64, GhBin)>,
    edges: &[Vec<f64>],
    totals: GhBin,
) {
    if let Some((bin, gain, left)) = scanned {
        if best.as_ref().map_or(true, |b| gain > b.gain) {
            *best = Some(SplitCandidate {
                feature,
                bin,
                threshold: edges[feature][bin as usize],
                gain,
                left,
                right: totals.minus(left),
            });
        }
    }
}

/// Best split across the sampled features of one node histogram.
pub(crate) fn best_split_sampled(
    bins: &[HistBin],
    sampled: &[usize],
    offsets: &[usize],
    edges: &[Vec<f64>],
    totals: GhBin,
    lambda: f64,
    min_n: u64,
) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    for (si, &f) in sampled.iter().enumerate() {
        let seg = &bins[offsets[si]..offsets[si + 1]];
        consider(&mut best, f, scan_feature(seg, totals, lambda, min_n), edges, totals);
    }
    best
}

/// Best split for a small node: scans one feature at a time through a
/// stack-resident mini histogram instead of filling (and zeroing) a full
/// concatenated buffer. Produces bit-identical candidates to
/// [`best_split_sampled`] over a directly accumulated histogram, because
/// each bin receives the same `f32` adds in the same ascending-row order.
#[allow(clippy::too_many_arguments)]
pub(crate) fn best_split_direct(
    codes: &[u8],
    width: usize,
    sampled: &[usize],
    edges: &[Vec<f64>],
    rows: &[u32],
    gh: &[(f32, f32)],
    totals: GhBin,
    lambda: f64,
    min_n: u64,
) -> Option<SplitCandidate> {
    // Bin codes are u8, so no feature has more than 256 bins.
    let mut mini = [HistBin::default(); 256];
    let mut best: Option<SplitCandidate> = None;
    for &f in sampled {
        let n_bins = edges[f].len() + 1;
        for b in &mut mini[..n_bins] {
            *b = HistBin::default();
        }
        for &r in rows {
            let r = r as usize;
            let (g, h) = gh[r];
            let bin = &mut mini[codes[r * width + f] as usize];
            bin.g += g;
            bin.h += h;
            bin.n += 1;
        }
        consider(
            &mut best,
            f,
            scan_feature(&mini[..n_bins], totals, lambda, min_n),
            edges,
            totals,
        );
    }
    best
}

/// Turns `parent` into the big sibling (`parent - small`) and searches both
/// children, one feature segment at a time so each subtracted slice is
/// scanned while still in cache. `scan_small`/`scan_big` gate the searches
/// (a child below `2 * min_n` rows cannot split); when `scan_big` is false
/// the subtraction itself is skipped because the big histogram would never
/// be read. Returns `(best_small, best_big)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn subtract_and_search(
    parent: &mut [HistBin],
    small: &[HistBin],
    sampled: &[usize],
    offsets: &[usize],
    edges: &[Vec<f64>],
    small_totals: GhBin,
    big_totals: GhBin,
    lambda: f64,
    min_n: u64,
    scan_small: bool,
    scan_big: bool,
) -> (Option<SplitCandidate>, Option<SplitCandidate>) {
    debug_assert_eq!(parent.len(), small.len());
    let mut best_small: Option<SplitCandidate> = None;
    let mut best_big: Option<SplitCandidate> = None;
    for (si, &f) in sampled.iter().enumerate() {
        let range = offsets[si]..offsets[si + 1];
        let sseg = &small[range.clone()];
        if scan_big {
            let pseg = &mut parent[range];
            subtract_hist(pseg, sseg);
            consider(
                &mut best_big,
                f,
                scan_feature(pseg, big_totals, lambda, min_n),
                edges,
                big_totals,
            );
        }
        if scan_small {
            consider(
                &mut best_small,
                f,
                scan_feature(sseg, small_totals, lambda, min_n),
                edges,
                small_totals,
            );
        }
    }
    (best_small, best_big)
}

/// Single-node best split over raw feature columns: bins each column with
/// equal-frequency edges, builds the histogram in `f64`, and runs the shared
/// scan. This is the histogram pipeline in miniature, exposed so it can be
/// checked against an exact sorted-scan on small data.
pub fn best_split_on_columns(
    cols: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    lambda: f64,
    min_samples_leaf: usize,
    max_bins: usize,
) -> Result<Option<SplitCandidate>, TrainError> {
    let n = g.len();
    assert_eq!(h.len(), n, "gradient and hessian lengths differ");
    let mut totals = GhBin::default();
    for i in 0..n {
        totals.g += g[i];
        totals.h += h[i];
        totals.n += 1;
    }

    let mut best: Option<SplitCandidate> = None;
    for (f, col) in cols.iter().enumerate() {
        assert_eq!(col.len(), n, "column {f} length differs from gradients");
        let edges = equal_frequency_edges(col, max_bins);
        let codes = bin_column(col, &edges, f)?;
        let mut bins = vec![GhBin::default(); edges.len() + 1];
        for (i, &c) in codes.iter().enumerate() {
            let b = &mut bins[c as usize];
            b.g += g[i];
            b.h += h[i];
            b.n += 1;
        }
        if let Some((bin, gain, left)) = scan_feature(&bins, totals, lambda, min_samples_leaf as u64)
        {
            if best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    bin,
                    threshold: edges[bin as usize],
                    gain,
                    left,
                    right: totals.minus(left),
                });
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact reference: tries every boundary between consecutive distinct
    /// values of every feature, summing gradients in f64 over raw rows.
    /// Same gain formula and tie-breaks, no histograms.
    fn sorted_scan_oracle(
        cols: &[Vec<f64>],
        g: &[f64],
        h: &[f64],
        lambda: f64,
        min_n: usize,
    ) -> Option<(usize, f64, Vec<usize>)> {
        let n = g.len();
        let tg: f64 = g.iter().sum();
        let th: f64 = h.iter().sum();
        let parent = obj(tg, th, lambda);
        let mut best: Option<(usize, f64, Vec<usize>)> = None;
        for (f, col) in cols.iter().enumerate() {
            let mut vals: Vec<f64> = col.clone();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let cut = w[0] + (w[1] - w[0]) / 2.0;
                let left_rows: Vec<usize> = (0..n).filter(|&i| col[i] <= cut).collect();
                if left_rows.len() < min_n || n - left_rows.len() < min_n {
                    continue;
                }
                let (mut lg, mut lh) = (0.0, 0.0);
                for &i in &left_rows {
                    lg += g[i];
                    lh += h[i];
                }
                let gain = obj(lg, lh, lambda) + obj(tg - lg, th - lh, lambda) - parent;
                if gain > 0.0 && best.as_ref().map_or(true, |&(_, bg, _)| gain > bg) {
                    best = Some((f, gain, left_rows));
                }
            }
        }
        best
    }

    fn obj(g: f64, h: f64, lambda: f64) -> f64 {
        if h + lambda > 0.0 {
            g * g / (h + lambda)
        } else {
            0.0
        }
    }

    #[test]
    fn hand_computed_two_group_split() {
        // Perfect split: gain = 4/2 + 4/2 - 0 = 4 at threshold 0.5.
        let cols = vec![vec![0.0, 0.0, 1.0, 1.0]];
        let g = vec![1.0, 1.0, -1.0, -1.0];
        let h = vec![1.0; 4];
        let best = best_split_on_columns(&cols, &g, &h, 0.0, 1, 256)
            .unwrap()
            .unwrap();
        assert_eq!(best.feature, 0);
        assert_eq!(best.threshold, 0.5);
        assert!((best.gain - 4.0).abs() < 1e-12);
        assert_eq!(best.left.n, 2);
        assert_eq!(best.right.n, 2);
    }

    #[test]
    fn equal_gain_features_resolve_to_lowest_index() {
        // Feature 1 mirrors feature 0, producing the same partition and the
        // same gain.
        let f0 = vec![0.0, 0.0, 1.0, 1.0];
        let f1: Vec<f64> = f0.iter().map(|&v| 1.0 - v).collect();
        let g = vec![1.0, 1.0, -1.0, -1.0];
        let h = vec![1.0; 4];
        let best = best_split_on_columns(&[f0, f1], &g, &h, 0.0, 1, 256)
            .unwrap()
            .unwrap();
        assert_eq!(best.feature, 0);
    }

    #[test]
    fn min_samples_leaf_vetoes_unbalanced_splits() {
        let cols = vec![vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0]];
        let g = vec![5.0, -1.0, -1.0, -1.0, -1.0, -1.0];
        let h = vec![1.0; 6];
        let with_min_1 = best_split_on_columns(&cols, &g, &h, 0.0, 1, 256).unwrap();
        assert!(with_min_1.is_some());
        let with_min_2 = best_split_on_columns(&cols, &g, &h, 0.0, 2, 256).unwrap();
        assert!(with_min_2.is_none());
    }

    #[test]
    fn zero_gain_yields_no_split() {
        let cols = vec![vec![0.0, 1.0]];
        let g = vec![0.0, 0.0];
        let h = vec![1.0, 1.0];
        assert!(best_split_on_columns(&cols, &g, &h, 0.0, 1, 256)
            .unwrap()
            .is_none());
    }

    #[test]
    fn constant_feature_yields_no_split() {
        let cols = vec![vec![3.0; 8]];
        let g = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let h = vec![1.0; 8];
        assert!(best_split_on_columns(&cols, &g, &h, 1e-3, 1, 256)
            .unwrap()
            .is_none());
    }

    #[test]
    fn non_finite_column_is_rejected() {
        let cols = vec![vec![0.0, f64::INFINITY]];
        let err = best_split_on_columns(&cols, &[1.0, -1.0], &[1.0, 1.0], 0.0, 1, 256).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteFeature { feature: 0 }));
    }

    #[test]
    fn histogram_split_matches_sorted_scan_on_random_data() {
        // <= 256 distinct values per feature, so binning is lossless and the
        // histogram search must agree with the exact scan.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for trial in 0..20 {
            let n = 40 + (next() % 160) as usize;
            let n_features = 1 + (next() % 6) as usize;
            let distinct = 2 + (next() % 30) as u64;
            let cols: Vec<Vec<f64>> = (0..n_features)
                .map(|_| {
                    (0..n)
                        .map(|_| (next() % distinct) as f64 * 0.25 - 1.0)
                        .collect()
                })
                .collect();
            let g: Vec<f64> = (0..n).map(|_| (next() % 2000) as f64 / 1000.0 - 1.0).collect();
            let h: Vec<f64> = (0..n).map(|_| (next() % 1000) as f64 / 1000.0 + 0.05).collect();
            let ours = best_split_on_columns(&cols, &g, &h, 1e-3, 2, 256).unwrap();
            let oracle = sorted_scan_oracle(&cols, &g, &h, 1e-3, 2);
            match (ours, oracle) {
                (None, None) => {}
                (Some(b), Some((of, og, oleft))) => {
                    assert_eq!(b.feature, of, "trial {trial}: feature disagrees");
                    assert!(
                        (b.gain - og).abs() <= 1e-9 * og.abs().max(1.0),
                        "trial {trial}: gain {} vs oracle {og}",
                        b.gain
                    );
                    let ours_left: Vec<usize> = (0..n)
                        .filter(|&i| cols[b.feature][i] <= b.threshold)
                        .collect();
                    assert_eq!(ours_left, oleft, "trial {trial}: partition disagrees");
                }
                (a, b) => panic!("trial {trial}: ours {a:?} vs oracle {b:?}"),
            }
        }
    }

    #[test]
    fn sibling_subtraction_matches_direct_build() {
        let n = 200usize;
        let width = 3usize;
        let mut codes = vec![0u8; n * width];
        for i in 0..n {
            for f in 0..width {
                codes[i * width + f] = ((i * (f + 3) + f) % 7) as u8;
            }
        }
        let gh: Vec<(f32, f32)> = (0..n)
            .map(|i| ((i as f32 * 0.37).sin(), (i as f32 * 0.11).cos().abs() + 0.1))
            .collect();
        let sampled = vec![0usize, 1, 2];
        let offsets = vec![0usize, 7, 14, 21];
        let all_rows: Vec<u32> = (0..n as u32).collect();
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            all_rows.iter().copied().partition(|&r| r % 3 == 0);

        let mut parent = vec![HistBin::default(); 21];
        accumulate_hist(&codes, width, &sampled, &offsets, &all_rows, &gh, &mut parent);
        let mut left = vec![HistBin::default(); 21];
        accumulate_hist(&codes, width, &sampled, &offsets, &left_rows, &gh, &mut left);
        let mut right_direct = vec![HistBin::default(); 21];
        accumulate_hist(&codes, width, &sampled, &offsets, &right_rows, &gh, &mut right_direct);

        // f32 storage: direct build and subtraction agree to single
        // precision, not exactly.
        subtract_hist(&mut parent, &left);
        for (sub, direct) in parent.iter().zip(&right_direct) {
            assert_eq!(sub.n, direct.n);
            assert!((f64::from(sub.g) - f64::from(direct.g)).abs() < 1e-4);
            assert!((f64::from(sub.h) - f64::from(direct.h)).abs() < 1e-4);
        }
    }

    #[test]
    fn totals_match_hist_sums() {
        let n = 64usize;
        let codes: Vec<u8> = (0..n).map(|i| (i % 5) as u8).collect();
        let gh: Vec<(f32, f32)> = (0..n).map(|i| (i as f32 * 0.5 - 8.0, 1.0)).collect();
        let rows: Vec<u32> = (0..n as u32).collect();
        let mut bins = vec![HistBin::default(); 5];
        accumulate_hist(&codes, 1, &[0], &[0, 5], &rows, &gh, &mut bins);
        let totals = sum_gh(&rows, &gh);
        let g_sum: f64 = bins.iter().map(|b| f64::from(b.g)).sum();
        let n_sum: u64 = bins.iter().map(|b| u64::from(b.n)).sum();
        assert!((g_sum - totals.g).abs() < 1e-3);
        assert_eq!(n_sum, totals.n);
    }

    /// A feature subsample must leave bins of unsampled features untouched
    /// and fill sampled segments exactly as a plain pass over those features
    /// (same adds in the same order, so even the f32 bits agree).
    #[test]
    fn sampled_accumulation_skips_unsampled_features() {
        let n = 90usize;
        let width = 4usize;
        let mut codes = vec![0u8; n * width];
        for i in 0..n {
            for f in 0..width {
                codes[i * width + f] = ((i + 2 * f) % 5) as u8;
            }
        }
        let gh: Vec<(f32, f32)> = (0..n).map(|i| (i as f32 * 0.01 - 0.4, 0.25)).collect();
        let rows: Vec<u32> = (0..n as u32).step_by(2).collect();

        // Features 1 and 3 only, each with 5 bins.
        let mut bins = vec![HistBin::default(); 10];
        accumulate_hist(&codes, width, &[1, 3], &[0, 5, 10], &rows, &gh, &mut bins);

        for (f, seg_start) in [(1usize, 0usize), (3, 5)] {
            let mut expect = vec![HistBin::default(); 5];
            for &r in &rows {
                let b = &mut expect[codes[r as usize * width + f] as usize];
                b.g += gh[r as usize].0;
                b.h += gh[r as usize].1;
                b.n += 1;
            }
            assert_eq!(&bins[seg_start..seg_start + 5], &expect[..]);
        }
    }

    /// The direct per-feature path must produce bit-identical candidates to
    /// the concatenated-histogram search on the same rows.
    #[test]
    fn direct_search_matches_histogram_search() {
        let mut state = 0xb5297a4d3f84d5b5u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for trial in 0..12 {
            let n = 30 + (next() % 300) as usize;
            let width = 1 + (next() % 6) as usize;
            let n_bins = 2 + (next() % 12) as usize;
            let codes: Vec<u8> = (0..n * width).map(|_| (next() % n_bins as u64) as u8).collect();
            let gh: Vec<(f32, f32)> = (0..n)
                .map(|_| {
                    ((next() % 2000) as f32 / 1000.0 - 1.0, (next() % 900) as f32 / 1000.0 + 0.1)
                })
                .collect();
            let sampled: Vec<usize> = (0..width).collect();
            let offsets: Vec<usize> = (0..=width).map(|i| i * n_bins).collect();
            let edges: Vec<Vec<f64>> = (0..width)
                .map(|_| (0..n_bins - 1).map(|b| b as f64 + 0.5).collect())
                .collect();
            // Take a strided subset so the rows are scattered.
            let rows: Vec<u32> = (0..n as u32).filter(|r| r % 3 != 1).collect();
            let totals = sum_gh(&rows, &gh);

            let mut hist = vec![HistBin::default(); offsets[width]];
            accumulate_hist(&codes, width, &sampled, &offsets, &rows, &gh, &mut hist);
            let want = best_split_sampled(&hist, &sampled, &offsets, &edges, totals, 1e-3, 2);
            let got = best_split_direct(
                &codes, width, &sampled, &edges, &rows, &gh, totals, 1e-3, 2,
            );
            assert_eq!(got, want, "trial {trial}");
        }
    }

    /// The fused subtract-and-search must agree exactly with subtracting
    /// first and searching each child separately, including the scan gates.
    #[test]
    fn fused_search_matches_separate_passes() {
        let mut state = 0x7c159e3779b9u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for trial in 0..12 {
            let n = 60 + (next() % 200) as usize;
            let width = 1 + (next() % 5) as usize;
            let n_bins = 3 + (next() % 8) as usize;
            let codes: Vec<u8> = (0..n * width).map(|_| (next() % n_bins as u64) as u8).collect();
            let gh: Vec<(f32, f32)> = (0..n)
                .map(|_| ((next() % 2000) as f32 / 1000.0 - 1.0, (next() % 900) as f32 / 1000.0 + 0.1))
                .collect();
            let sampled: Vec<usize> = (0..width).collect();
            let offsets: Vec<usize> = (0..=width).map(|i| i * n_bins).collect();
            let edges: Vec<Vec<f64>> = (0..width)
                .map(|_| (0..n_bins - 1).map(|b| b as f64 + 0.5).collect())
                .collect();
            let rows: Vec<u32> = (0..n as u32).collect();
            let (small_rows, big_rows): (Vec<u32>, Vec<u32>) =
                rows.iter().copied().partition(|&r| r % 4 == 0);

            let total = offsets[width];
            let mut parent = vec![HistBin::default(); total];
            accumulate_hist(&codes, width, &sampled, &offsets, &rows, &gh, &mut parent);
            let mut small = vec![HistBin::default(); total];
            accumulate_hist(&codes, width, &sampled, &offsets, &small_rows, &gh, &mut small);
            let small_totals = sum_gh(&small_rows, &gh);
            let big_totals = sum_gh(&big_rows, &gh);

            // Reference: plain subtraction then two independent searches.
            let mut big_ref = parent.clone();
            subtract_hist(&mut big_ref, &small);
            let want_small =
                best_split_sampled(&small, &sampled, &offsets, &edges, small_totals, 1e-3, 2);
            let want_big =
                best_split_sampled(&big_ref, &sampled, &offsets, &edges, big_totals, 1e-3, 2);

            let mut fused = parent.clone();
            let (got_small, got_big) = subtract_and_search(
                &mut fused, &small, &sampled, &offsets, &edges,
                small_totals, big_totals, 1e-3, 2, true, true,
            );
            assert_eq!(got_small, want_small, "trial {trial}: small child disagrees");
            assert_eq!(got_big, want_big, "trial {trial}: big child disagrees");
            assert_eq!(fused, big_ref, "trial {trial}: big histogram disagrees");

            // Gated off: nothing searched, parent untouched when the big
            // child is not splittable.
            let mut gated = parent.clone();
            let (s, b) = subtract_and_search(
                &mut gated, &small, &sampled, &offsets, &edges,
                small_totals, big_totals, 1e-3, 2, false, false,
            );
            assert!(s.is_none() && b.is_none());
            assert_eq!(gated, parent);
        }
    }
}

