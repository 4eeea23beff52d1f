//! Equal-frequency feature binning.
//!
//! Each feature column is quantized once, before boosting, into at most 256
//! bins. Bin edges sit halfway between adjacent distinct values, so when a
//! column has no more distinct values than bins the quantization is lossless.
//! Bin codes fit in a `u8`; split thresholds are always real edge values, so
//! tree traversal on raw features agrees exactly with the binned training
//! view (`bin(x) <= b` if and only if `x <= edges[b]`).

use super::TrainError;

/// Computes ascending bin edges for one column. With `d <= max_bins` distinct
/// values the edges are all `d - 1` midpoints; otherwise candidate cuts are
/// taken at the equal-frequency quantile positions `k * n / max_bins` and
/// each cut lands halfway between the quantile value and the distinct value
/// below it. At most `max_bins - 1` edges are returned.
pub fn equal_frequency_edges(column: &[f64], max_bins: usize) -> Vec<f64> {
    debug_assert!(max_bins >= 2);
    let mut sorted = column.to_vec();
    // total_cmp keeps this panic-free on non-finite input; bin_column is the
    // layer that rejects such columns with a proper error.
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return Vec::new();
    }

    let mut distinct = 0usize;
    let mut prev = f64::NAN;
    for &v in &sorted {
        if distinct == 0 || v != prev {
            distinct += 1;
            prev = v;
        }
        if distinct > max_bins {
            break;
        }
    }

    let mut edges = Vec::new();
    if distinct <= max_bins {
        for i in 1..n {
            if sorted[i] != sorted[i - 1] {
                edges.push(midpoint(sorted[i - 1], sorted[i]));
            }
        }
        return edges;
    }

    for k in 1..max_bins {
        let v = sorted[k * n / max_bins];
        // First index holding v; the value below it is the previous distinct.
        let first = sorted.partition_point(|&x| x < v);
        if first == 0 {
            continue;
        }
        let edge = midpoint(sorted[first - 1], v);
        if edges.last().map_or(true, |&last| edge > last) {
            edges.push(edge);
        }
    }
    edges
}

/// Midpoint that is guaranteed to separate `lo < hi` even when they are
/// adjacent floats (falls back to `lo`, keeping `lo` on the left side).
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid < hi {
        mid
    } else {
        lo
    }
}

/// Bin code of `x`: the number of edges strictly below it. Values in bin `b`
/// satisfy `edges[b-1] < x <= edges[b]`.
pub fn bin_value(edges: &[f64], x: f64) -> u8 {
    edges.partition_point(|&e| e < x) as u8
}

/// Bins one column, checking finiteness. `feature` is only used for errors.
pub fn bin_column(column: &[f64], edges: &[f64], feature: usize) -> Result<Vec<u8>, TrainError> {
    let mut codes = Vec::with_capacity(column.len());
    for &x in column {
        if !x.is_finite() {
            return Err(TrainError::NonFiniteFeature { feature });
        }
        codes.push(bin_value(edges, x));
    }
    Ok(codes)
}
