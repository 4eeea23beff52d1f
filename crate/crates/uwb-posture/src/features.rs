//! Feature engineering: polar CIR conversion, per-frame feature assembly,
//! outlier winsorization, and temporal windowing.
//!
//! Every frame maps to a fixed vector of [`BASE_FEATURE_COUNT`] values laid
//! out as `[ranging | rx1 metrics | rx2 metrics | rx1 CIR | rx2 CIR]`. The
//! CIR block is a 16-tap magnitude window and 16-tap phase window anchored at
//! the first detected path, followed by five summary statistics over the full
//! capture. Temporal windowing then concatenates the current frame with its
//! `tau - 1` predecessors and with rolling means of widths `2..=tau`, tripling
//! context without tripling storage: a window of size `tau` yields
//! `BASE_FEATURE_COUNT * (2 * tau - 1)` values.
//!
//! The name list and its hash ([`layout_hash`]) version the layout; models
//! store the hash and refuse inputs assembled under a different layout.

use thiserror::Error;

use crate::data::{CirCapture, Sample, UwbFrame};
use crate::hash::Fnv1a64;

/// Number of CIR taps in the first-path-anchored window.
pub const CIR_WINDOW_TAPS: usize = 16;

/// Length of one frame's assembled feature vector.
pub const BASE_FEATURE_COUNT: usize = 103;

/// Default IQR fence multiplier for winsorization.
pub const DEFAULT_IQR_FENCE: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("capture has {got} taps; at least {needed} are required")]
    TooFewTaps { needed: usize, got: usize },
    #[error("winsorization needs at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("frame sequence is empty")]
    EmptySequence,
    #[error("window size must be at least 1")]
    InvalidTau,
    #[error("row {index} has {got} values, expected {expected}")]
    MismatchedWidth {
        index: usize,
        expected: usize,
        got: usize,
    },
}

/// Converts a complex CIR to (magnitudes, phases). Magnitude is
/// `sqrt(re^2 + im^2)`; phase is the principal-value `atan2(im, re)` in
/// `(-pi, pi]`, with the zero tap mapped to phase 0.
pub fn cir_polar(capture: &CirCapture) -> (Vec<f64>, Vec<f64>) {
    let mut mags = Vec::with_capacity(capture.taps.len());
    let mut phases = Vec::with_capacity(capture.taps.len());
    for tap in &capture.taps {
        let mag = (tap.re * tap.re + tap.im * tap.im).sqrt();
        mags.push(mag);
        phases.push(if mag == 0.0 { 0.0 } else { tap.im.atan2(tap.re) });
    }
    (mags, phases)
}

const METRIC_NAMES: [&str; 12] = [
    "nlos",
    "first_path_index_ns",
    "main_path_index_ns",
    "snr_main_db",
    "snr_first_db",
    "snr_total_db",
    "rssi_db",
    "cir_main_power",
    "cir_first_path_power",
    "noise_variance",
    "cfo_ppm",
    "aoa_phase_deg",
];

const CIR_STAT_NAMES: [&str; 5] = [
    "cir_energy",
    "cir_peak_mag",
    "cir_peak_idx",
    "cir_mean_mag",
    "cir_std_mag",
];

/// Names of the base (single-frame) features, in vector order.
pub fn feature_names() -> Vec<String> {
    let mut names = vec![
        "distance_cm".to_string(),
        "azimuth_deg".to_string(),
        "elevation_deg".to_string(),
        "aoa_fom".to_string(),
        "pdoa_deg".to_string(),
    ];
    for rx in ["rx1", "rx2"] {
        for m in METRIC_NAMES {
            names.push(format!("{rx}_{m}"));
        }
    }
    for rx in ["rx1", "rx2"] {
        for i in 0..CIR_WINDOW_TAPS {
            names.push(format!("{rx}_cir_mag_{i:02}"));
        }
        for i in 0..CIR_WINDOW_TAPS {
            names.push(format!("{rx}_cir_phase_{i:02}"));
        }
        for s in CIR_STAT_NAMES {
            names.push(format!("{rx}_{s}"));
        }
    }
    debug_assert_eq!(names.len(), BASE_FEATURE_COUNT);
    names
}

/// Names of the windowed features for window size `tau`: the base block,
/// then each lagged block, then each rolling-mean block.
pub fn windowed_feature_names(tau: usize) -> Vec<String> {
    let base = feature_names();
    let mut names = base.clone();
    for k in 1..tau {
        names.extend(base.iter().map(|n| format!("{n}_lag{k}")));
    }
    for w in 2..=tau {
        names.extend(base.iter().map(|n| format!("{n}_mean{w}")));
    }
    names
}

/// Fingerprint of the windowed feature layout for window size `tau`.
/// Changes whenever the name list, order, or window size changes.
pub fn layout_hash(tau: usize) -> u64 {
    let mut h = Fnv1a64::new();
    h.update(b"uwb-posture feature layout v1\n");
    h.update(format!("tau={tau}\n").as_bytes());
    for name in windowed_feature_names(tau) {
        h.update(name.as_bytes());
        h.update(b"\n");
    }
    h.finish()
}

fn cir_block(out: &mut Vec<f64>, capture: &CirCapture, first_path_ns: f64) -> Result<(), FeatureError> {
    let n = capture.taps.len();
    if n < CIR_WINDOW_TAPS {
        return Err(FeatureError::TooFewTaps {
            needed: CIR_WINDOW_TAPS,
            got: n,
        });
    }
    let (mags, phases) = cir_polar(capture);

    let anchor = first_path_ns.round().max(0.0) as usize;
    let start = anchor.min(n - CIR_WINDOW_TAPS);
    out.extend_from_slice(&mags[start..start + CIR_WINDOW_TAPS]);
    out.extend_from_slice(&phases[start..start + CIR_WINDOW_TAPS]);

    let energy: f64 = mags.iter().map(|m| m * m).sum();
    let mut peak = 0usize;
    for (i, &m) in mags.iter().enumerate() {
        if m > mags[peak] {
            peak = i;
        }
    }
    let mean = mags.iter().sum::<f64>() / n as f64;
    let var = mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n as f64;
    out.push(energy);
    out.push(mags[peak]);
    out.push(peak as f64);
    out.push(mean);
    out.push(var.sqrt());
    Ok(())
}

fn metrics_block(out: &mut Vec<f64>, m: &crate::data::AntennaFrameMetrics) {
    out.push(if m.nlos { 1.0 } else { 0.0 });
    out.push(m.first_path_index_ns);
    out.push(m.main_path_index_ns);
    out.push(m.snr_main_db);
    out.push(m.snr_first_db);
    out.push(m.snr_total_db);
    out.push(m.rssi_db);
    out.push(f64::from(m.cir_main_power));
    out.push(f64::from(m.cir_first_path_power));
    out.push(m.noise_variance);
    out.push(m.cfo_ppm);
    out.push(m.aoa_phase_deg);
}

/// Assembles one frame into its [`BASE_FEATURE_COUNT`]-value vector. Pure:
/// depends only on the frame's contents.
pub fn assemble_frame_features(frame: &UwbFrame) -> Result<Vec<f64>, FeatureError> {
    let mut out = Vec::with_capacity(BASE_FEATURE_COUNT);
    out.push(frame.ranging.distance_cm);
    out.push(frame.ranging.azimuth_deg);
    out.push(frame.ranging.elevation_deg);
    out.push(f64::from(frame.ranging.aoa_fom));
    out.push(frame.ranging.pdoa_deg);
    metrics_block(&mut out, &frame.rx1);
    metrics_block(&mut out, &frame.rx2);
    cir_block(&mut out, &frame.cir_rx1, frame.rx1.first_path_index_ns)?;
    cir_block(&mut out, &frame.cir_rx2, frame.rx2.first_path_index_ns)?;
    debug_assert_eq!(out.len(), BASE_FEATURE_COUNT);
    Ok(out)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    sorted[h.round() as usize]
}

/// Clamps each column of a per-sample feature matrix to its interquartile
/// fences `[Q1 - fence * IQR, Q3 + fence * IQR]`, in place. A quantile is the
/// order statistic nearest to position `p * (n - 1)` (ties round up), so the
/// quartiles are always actual sample values. Values are clamped, never
/// dropped, so the frame count is preserved.
///
/// Because clamping is a monotone map that leaves everything inside the
/// fences untouched, the quartiles of the clamped column equal those of the
/// original, and the operation is idempotent. An interpolated quantile would
/// not guarantee this: with more than a quarter of a column beyond a fence,
/// interpolation reaches into the clamped values and a second pass would
/// clamp further.
pub fn iqr_winsorize(rows: &mut [Vec<f64>], fence: f64) -> Result<(), FeatureError> {
    const MIN_FRAMES: usize = 4;
    if rows.len() < MIN_FRAMES {
        return Err(FeatureError::TooFewFrames {
            needed: MIN_FRAMES,
            got: rows.len(),
        });
    }
    let width = rows[0].len();
    for (index, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(FeatureError::MismatchedWidth {
                index,
                expected: width,
                got: row.len(),
            });
        }
    }

    let mut column = vec![0.0; rows.len()];
    for j in 0..width {
        for (i, row) in rows.iter().enumerate() {
            column[i] = row[j];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile(&column, 0.25);
        let q3 = quantile(&column, 0.75);
        let iqr = q3 - q1;
        let lo = q1 - fence * iqr;
        let hi = q3 + fence * iqr;
        for row in rows.iter_mut() {
            row[j] = row[j].clamp(lo, hi);
        }
    }
    Ok(())
}

/// The full per-sample preparation: assembles every frame of one capture
/// into base rows, then winsorizes within the sample at
/// [`DEFAULT_IQR_FENCE`]. Outlier fences are computed per sample so one
/// noisy capture cannot distort another's features.
pub fn sample_feature_rows(frames: &[UwbFrame]) -> Result<Vec<Vec<f64>>, FeatureError> {
    let mut rows = frames
        .iter()
        .map(assemble_frame_features)
        .collect::<Result<Vec<_>, _>>()?;
    iqr_winsorize(&mut rows, DEFAULT_IQR_FENCE)?;
    Ok(rows)
}

/// Writes one windowed row: the current base row, the `tau - 1` preceding
/// rows, then rolling means of widths `2..=tau`. `back(d)` must return the
/// base row `d` steps back, repeating the earliest row when history runs out.
///
/// Means accumulate in ascending-lag order, so any two callers that supply
/// the same base rows produce bit-identical output. Both batch windowing and
/// the streaming monitor go through this function.
pub fn fill_windowed_row<'a, G>(out: &mut Vec<f64>, tau: usize, back: G)
where
    G: Fn(usize) -> &'a [f64],
{
    let width = back(0).len();
    out.clear();
    out.reserve(width * (2 * tau - 1));
    for d in 0..tau {
        out.extend_from_slice(back(d));
    }
    let mut acc = back(0).to_vec();
    for w in 2..=tau {
        let older = back(w - 1);
        for j in 0..width {
            acc[j] += older[j];
        }
        let div = w as f64;
        for j in 0..width {
            out.push(acc[j] / div);
        }
    }
}

/// Expands a frame sequence into windowed rows of width
/// `width * (2 * tau - 1)`. Row `i` sees frames `i, i-1, ..., i-tau+1`, with
/// history before the first frame padded by repeating it. `tau = 1` is the
/// identity. The output has exactly one row per input frame.
pub fn windowize(rows: &[Vec<f64>], tau: usize) -> Result<Vec<Vec<f64>>, FeatureError> {
    if tau == 0 {
        return Err(FeatureError::InvalidTau);
    }
    if rows.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    let width = rows[0].len();
    for (index, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(FeatureError::MismatchedWidth {
                index,
                expected: width,
                got: row.len(),
            });
        }
    }

    let mut out = Vec::with_capacity(rows.len());
    for i in 0..rows.len() {
        let mut row = Vec::new();
        fill_windowed_row(&mut row, tau, |d| rows[i - d.min(i)].as_slice());
        out.push(row);
    }
    Ok(out)
}

/// Windowed rows for one sample of base features, tagged with the layout
/// fingerprint. Rows must be full [`BASE_FEATURE_COUNT`]-wide base vectors.
#[derive(Debug, Clone)]
pub struct WindowedFrames {
    pub tau: usize,
    pub layout_hash: u64,
    pub rows: Vec<Vec<f64>>,
}

/// Windowizes one sample's base feature rows into prediction-ready rows.
pub fn windowize_sample(base_rows: &[Vec<f64>], tau: usize) -> Result<WindowedFrames, FeatureError> {
    if let Some((index, row)) = base_rows
        .iter()
        .enumerate()
        .find(|(_, r)| r.len() != BASE_FEATURE_COUNT)
    {
        return Err(FeatureError::MismatchedWidth {
            index,
            expected: BASE_FEATURE_COUNT,
            got: row.len(),
        });
    }
    Ok(WindowedFrames {
        tau,
        layout_hash: layout_hash(tau),
        rows: windowize(base_rows, tau)?,
    })
}

/// Column-major windowed feature matrix used for training. Column storage
/// lets the trainer bin and scan one feature at a time without striding.
#[derive(Debug, Clone)]
pub struct WindowedMatrix {
    pub tau: usize,
    pub layout_hash: u64,
    pub n_rows: usize,
    pub cols: Vec<Vec<f64>>,
}

impl WindowedMatrix {
    /// Builds the matrix from per-sample base feature blocks, windowizing
    /// each sample independently (windows never straddle sample boundaries).
    pub fn build(sample_blocks: &[&[Vec<f64>]], tau: usize) -> Result<Self, FeatureError> {
        if tau == 0 {
            return Err(FeatureError::InvalidTau);
        }
        let width = BASE_FEATURE_COUNT * (2 * tau - 1);
        let n_rows: usize = sample_blocks.iter().map(|b| b.len()).sum();
        let mut cols = vec![Vec::with_capacity(n_rows); width];
        for block in sample_blocks {
            let windowed = windowize_sample(block, tau)?;
            for row in &windowed.rows {
                for (j, &v) in row.iter().enumerate() {
                    cols[j].push(v);
                }
            }
        }
        Ok(Self {
            tau,
            layout_hash: layout_hash(tau),
            n_rows,
            cols,
        })
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// Gathers row `i` across columns.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[i]).collect()
    }
}

/// Prepares and windowizes every known-labelled sample and stacks the rows:
/// the matrix, one label id per row, and per-sample `(label, n_rows)` spans
/// in sample order. Unknown-labelled samples are skipped; a set with no
/// known samples is rejected rather than yielding an empty matrix.
pub fn assemble_windowed(
    samples: &[Sample],
    tau: usize,
) -> Result<(WindowedMatrix, Vec<u32>, Vec<(u32, usize)>), FeatureError> {
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut labels = Vec::new();
    let mut spans = Vec::new();
    for sample in samples {
        let Some(label) = sample.label.known() else {
            continue;
        };
        let rows = sample_feature_rows(&sample.frames)?;
        labels.extend(std::iter::repeat(label.id()).take(rows.len()));
        spans.push((label.id(), rows.len()));
        blocks.push(rows);
    }
    if blocks.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    let refs: Vec<&[Vec<f64>]> = blocks.iter().map(|b| b.as_slice()).collect();
    let matrix = WindowedMatrix::build(&refs, tau)?;
    Ok((matrix, labels, spans))
}
