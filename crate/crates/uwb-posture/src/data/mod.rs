//! Domain types for UWB posture sensing.
//!
//! A [`Dataset`] is a collection of [`Sample`]s; a sample is a labelled,
//! regularly spaced burst of [`UwbFrame`]s captured from one subject. Each
//! frame carries a two-way ranging result, per-antenna diagnostics for both
//! receive antennas, and the complex channel impulse response (CIR) captured
//! at each antenna.
//!
//! All types are plain owned data, immutable once constructed, and safe to
//! share across threads.

mod io;
mod split;

pub use io::{load_dataset, load_dataset_with, parse_frame_line, save_dataset, LoadOptions};
pub use split::stratified_split;
pub(crate) use split::stratified_indices;

use thiserror::Error;

/// Nominal spacing between consecutive frames of a sample, in seconds.
pub const NOMINAL_FRAME_INTERVAL_S: f64 = 0.2;

/// Dataset wire schema version understood by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Default number of CIR taps per capture.
pub const DEFAULT_N_TAPS: usize = 128;

/// One complex CIR tap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexTap {
    pub re: f64,
    pub im: f64,
}

impl ComplexTap {
    pub fn magnitude(self) -> f64 {
        (self.re * self.re + self.im * self.im).sqrt()
    }
}

/// Receive antenna identifier. The radar has one transmitter and two
/// receivers; the phase difference between them carries angle information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RxId {
    Rx1,
    Rx2,
}

/// Double-sided two-way ranging output for one frame.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RangingRecord {
    /// Estimated distance to the dominant reflector, centimetres, in [0, 10_000].
    pub distance_cm: f64,
    /// Horizontal angle of arrival, degrees, in [-90, 90].
    pub azimuth_deg: f64,
    /// Vertical angle of arrival, degrees, in [-90, 90].
    pub elevation_deg: f64,
    /// Angle-of-arrival figure of merit reported by the ranging exchange, 0..=100.
    pub aoa_fom: u8,
    /// Phase difference of arrival between the two antennas, degrees, in [-180, 180].
    pub pdoa_deg: f64,
}

/// Per-antenna link diagnostics for one frame.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AntennaFrameMetrics {
    /// Non-line-of-sight flag reported by the receiver.
    pub nlos: bool,
    /// Index of the first detected path, in nanoseconds (equivalently taps).
    /// Never exceeds `main_path_index_ns`.
    pub first_path_index_ns: f64,
    /// Index of the strongest path, in nanoseconds.
    pub main_path_index_ns: f64,
    /// Signal-to-noise ratio of the main path, dB.
    pub snr_main_db: f64,
    /// Signal-to-noise ratio of the first path, dB.
    pub snr_first_db: f64,
    /// Total-band signal-to-noise ratio, dB.
    pub snr_total_db: f64,
    /// Received signal strength, dB.
    pub rssi_db: f64,
    /// Fixed-point power of the main path as reported by hardware.
    pub cir_main_power: u32,
    /// Fixed-point power of the first path as reported by hardware.
    pub cir_first_path_power: u32,
    /// Estimated noise variance, non-negative.
    pub noise_variance: f64,
    /// Carrier frequency offset, parts per million.
    pub cfo_ppm: f64,
    /// Raw angle-of-arrival phase, degrees, in [-180, 180].
    pub aoa_phase_deg: f64,
}

/// Complex CIR snapshot from one antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct CirCapture {
    pub rx: RxId,
    pub taps: Vec<ComplexTap>,
}

/// One radar frame: ranging, per-antenna diagnostics, and both CIRs.
#[derive(Debug, Clone, PartialEq)]
pub struct UwbFrame {
    /// Seconds since the start of the sample.
    pub timestamp_s: f64,
    pub ranging: RangingRecord,
    pub rx1: AntennaFrameMetrics,
    pub rx2: AntennaFrameMetrics,
    pub cir_rx1: CirCapture,
    pub cir_rx2: CirCapture,
}

/// The closed set of trained posture classes.
///
/// Identifiers are stable and contiguous; class 0..=10 are static postures,
/// 11..=18 involve motion. [`PostureLabel::ALL`] lists them in id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PostureLabel {
    Idle,
    Upright,
    LeanForward,
    LeanBack,
    LateralLeanLeft,
    CrossLegLeft,
    LateralLeanRight,
    CrossLegRight,
    Hunch,
    Tense,
    LieOnTable,
    RotateHead,
    VertLegShakeLeft,
    VertLegShakeRight,
    HorizLegShake,
    TapFinger,
    Stretch,
    Stand,
    Walk,
}

impl PostureLabel {
    pub const COUNT: usize = 19;

    pub const ALL: [PostureLabel; Self::COUNT] = [
        PostureLabel::Idle,
        PostureLabel::Upright,
        PostureLabel::LeanForward,
        PostureLabel::LeanBack,
        PostureLabel::LateralLeanLeft,
        PostureLabel::CrossLegLeft,
        PostureLabel::LateralLeanRight,
        PostureLabel::CrossLegRight,
        PostureLabel::Hunch,
        PostureLabel::Tense,
        PostureLabel::LieOnTable,
        PostureLabel::RotateHead,
        PostureLabel::VertLegShakeLeft,
        PostureLabel::VertLegShakeRight,
        PostureLabel::HorizLegShake,
        PostureLabel::TapFinger,
        PostureLabel::Stretch,
        PostureLabel::Stand,
        PostureLabel::Walk,
    ];

    /// Stable numeric id, 0..=18.
    pub fn id(self) -> u32 {
        Self::ALL.iter().position(|&l| l == self).unwrap() as u32
    }

    pub fn from_id(id: u32) -> Option<PostureLabel> {
        Self::ALL.get(id as usize).copied()
    }

    /// Canonical snake_case name used on the wire and in reports.
    pub fn name(self) -> &'static str {
        match self {
            PostureLabel::Idle => "idle",
            PostureLabel::Upright => "upright",
            PostureLabel::LeanForward => "lean_forward",
            PostureLabel::LeanBack => "lean_back",
            PostureLabel::LateralLeanLeft => "lateral_lean_left",
            PostureLabel::CrossLegLeft => "cross_leg_left",
            PostureLabel::LateralLeanRight => "lateral_lean_right",
            PostureLabel::CrossLegRight => "cross_leg_right",
            PostureLabel::Hunch => "hunch",
            PostureLabel::Tense => "tense",
            PostureLabel::LieOnTable => "lie_on_table",
            PostureLabel::RotateHead => "rotate_head",
            PostureLabel::VertLegShakeLeft => "vert_leg_shake_left",
            PostureLabel::VertLegShakeRight => "vert_leg_shake_right",
            PostureLabel::HorizLegShake => "horiz_leg_shake",
            PostureLabel::TapFinger => "tap_finger",
            PostureLabel::Stretch => "stretch",
            PostureLabel::Stand => "stand",
            PostureLabel::Walk => "walk",
        }
    }

    pub fn from_name(name: &str) -> Option<PostureLabel> {
        Self::ALL.iter().copied().find(|l| l.name() == name)
    }

    /// True for classes whose signature is motion over time rather than a
    /// static pose.
    pub fn is_dynamic(self) -> bool {
        self.id() >= PostureLabel::RotateHead.id()
    }
}

impl std::fmt::Display for PostureLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A sample label: either one of the trained postures or the out-of-set
/// sentinel. `Unknown` never appears in training targets; it marks frames
/// that an out-of-distribution detector should reject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleLabel {
    Known(PostureLabel),
    Unknown,
}

impl SampleLabel {
    pub fn name(self) -> &'static str {
        match self {
            SampleLabel::Known(l) => l.name(),
            SampleLabel::Unknown => "unknown",
        }
    }

    pub fn from_name(name: &str) -> Option<SampleLabel> {
        if name == "unknown" {
            Some(SampleLabel::Unknown)
        } else {
            PostureLabel::from_name(name).map(SampleLabel::Known)
        }
    }

    pub fn known(self) -> Option<PostureLabel> {
        match self {
            SampleLabel::Known(l) => Some(l),
            SampleLabel::Unknown => None,
        }
    }
}

impl std::fmt::Display for SampleLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One labelled capture burst from a single subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: String,
    pub subject_id: String,
    pub label: SampleLabel,
    /// Sorted, deduplicated capture-condition tags (for example "obstacle_3db").
    pub scenario_tags: Vec<String>,
    /// Frames ordered by strictly increasing timestamp.
    pub frames: Vec<UwbFrame>,
}

/// A collection of samples sharing one tap count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema_version: u32,
    pub n_taps: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn n_frames(&self) -> usize {
        self.samples.iter().map(|s| s.frames.len()).sum()
    }

    /// Frame counts per known class id, plus the count of unknown-labelled samples.
    pub fn class_sample_counts(&self) -> ([usize; PostureLabel::COUNT], usize) {
        let mut counts = [0usize; PostureLabel::COUNT];
        let mut unknown = 0usize;
        for s in &self.samples {
            match s.label {
                SampleLabel::Known(l) => counts[l.id() as usize] += 1,
                SampleLabel::Unknown => unknown += 1,
            }
        }
        (counts, unknown)
    }
}

/// A single reason a frame failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("{field} = {value} outside [{min}, {max}]")]
    RangeViolation {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{rx:?} has {actual} taps, expected {expected}")]
    TapCountMismatch {
        rx: RxId,
        expected: usize,
        actual: usize,
    },
    #[error("{field} is not finite")]
    NonFiniteValue { field: String },
}

/// Validation failure carrying every violation found in the frame.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid frame: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct FrameValidationError {
    pub violations: Vec<Violation>,
}

fn check_finite(out: &mut Vec<Violation>, field: &str, value: f64) -> bool {
    if value.is_finite() {
        true
    } else {
        out.push(Violation::NonFiniteValue {
            field: field.to_string(),
        });
        false
    }
}

fn check_range(out: &mut Vec<Violation>, field: &'static str, value: f64, min: f64, max: f64) {
    if !check_finite(out, field, value) {
        return;
    }
    if value < min || value > max {
        out.push(Violation::RangeViolation {
            field,
            value,
            min,
            max,
        });
    }
}

fn validate_metrics(out: &mut Vec<Violation>, prefix: &str, m: &AntennaFrameMetrics) {
    let fields: [(&str, f64); 9] = [
        ("first_path_index_ns", m.first_path_index_ns),
        ("main_path_index_ns", m.main_path_index_ns),
        ("snr_main_db", m.snr_main_db),
        ("snr_first_db", m.snr_first_db),
        ("snr_total_db", m.snr_total_db),
        ("rssi_db", m.rssi_db),
        ("noise_variance", m.noise_variance),
        ("cfo_ppm", m.cfo_ppm),
        ("aoa_phase_deg", m.aoa_phase_deg),
    ];
    let mut all_finite = true;
    for (name, value) in fields {
        all_finite &= check_finite(out, &format!("{prefix}.{name}"), value);
    }
    if !all_finite {
        return;
    }
    if m.first_path_index_ns > m.main_path_index_ns {
        out.push(Violation::RangeViolation {
            field: "first_path_index_ns",
            value: m.first_path_index_ns,
            min: 0.0,
            max: m.main_path_index_ns,
        });
    }
    if m.first_path_index_ns < 0.0 {
        out.push(Violation::RangeViolation {
            field: "first_path_index_ns",
            value: m.first_path_index_ns,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if m.noise_variance < 0.0 {
        out.push(Violation::RangeViolation {
            field: "noise_variance",
            value: m.noise_variance,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if m.aoa_phase_deg < -180.0 || m.aoa_phase_deg > 180.0 {
        out.push(Violation::RangeViolation {
            field: "aoa_phase_deg",
            value: m.aoa_phase_deg,
            min: -180.0,
            max: 180.0,
        });
    }
}

fn validate_cir(out: &mut Vec<Violation>, expected_taps: usize, cir: &CirCapture) {
    if cir.taps.len() != expected_taps {
        out.push(Violation::TapCountMismatch {
            rx: cir.rx,
            expected: expected_taps,
            actual: cir.taps.len(),
        });
    }
    for (i, tap) in cir.taps.iter().enumerate() {
        if !tap.re.is_finite() || !tap.im.is_finite() {
            out.push(Violation::NonFiniteValue {
                field: format!("{:?}.taps[{i}]", cir.rx),
            });
        }
    }
}

/// Checks one frame against the ranging/diagnostic ranges and the expected
/// tap count. Pure: the same frame always yields the same verdict, and the
/// error lists every violation rather than stopping at the first.
pub fn validate_frame(frame: &UwbFrame, n_taps: usize) -> Result<(), FrameValidationError> {
    let mut v = Vec::new();

    check_finite(&mut v, "timestamp_s", frame.timestamp_s);
    let r = &frame.ranging;
    check_range(&mut v, "distance_cm", r.distance_cm, 0.0, 10_000.0);
    check_range(&mut v, "azimuth_deg", r.azimuth_deg, -90.0, 90.0);
    check_range(&mut v, "elevation_deg", r.elevation_deg, -90.0, 90.0);
    check_range(&mut v, "pdoa_deg", r.pdoa_deg, -180.0, 180.0);
    if r.aoa_fom > 100 {
        v.push(Violation::RangeViolation {
            field: "aoa_fom",
            value: f64::from(r.aoa_fom),
            min: 0.0,
            max: 100.0,
        });
    }

    validate_metrics(&mut v, "rx1", &frame.rx1);
    validate_metrics(&mut v, "rx2", &frame.rx2);
    validate_cir(&mut v, n_taps, &frame.cir_rx1);
    validate_cir(&mut v, n_taps, &frame.cir_rx2);

    if v.is_empty() {
        Ok(())
    } else {
        Err(FrameValidationError { violations: v })
    }
}

/// Errors from dataset loading, saving, and splitting.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema version {found} not supported (this build reads version {supported})")]
    SchemaVersionMismatch { found: u32, supported: u32 },
    #[error("line {line}: {source}")]
    InvalidFrame {
        line: usize,
        source: FrameValidationError,
    },
    #[error("dataset invariant violated: {0}")]
    Invariant(String),
    #[error("class {class} has {count} samples; at least {needed} are required")]
    ClassTooSmall {
        class: &'static str,
        count: usize,
        needed: usize,
    },
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn test_metrics() -> AntennaFrameMetrics {
        AntennaFrameMetrics {
            nlos: false,
            first_path_index_ns: 8.0,
            main_path_index_ns: 17.0,
            snr_main_db: 22.0,
            snr_first_db: 18.0,
            snr_total_db: 25.0,
            rssi_db: -60.0,
            cir_main_power: 120_000,
            cir_first_path_power: 80_000,
            noise_variance: 1.0e-4,
            cfo_ppm: 1.5,
            aoa_phase_deg: 12.0,
        }
    }

    pub(crate) fn test_frame(n_taps: usize) -> UwbFrame {
        let taps = vec![ComplexTap { re: 0.01, im: -0.02 }; n_taps];
        UwbFrame {
            timestamp_s: 0.0,
            ranging: RangingRecord {
                distance_cm: 95.0,
                azimuth_deg: 3.0,
                elevation_deg: -2.0,
                aoa_fom: 100,
                pdoa_deg: 10.0,
            },
            rx1: test_metrics(),
            rx2: test_metrics(),
            cir_rx1: CirCapture {
                rx: RxId::Rx1,
                taps: taps.clone(),
            },
            cir_rx2: CirCapture {
                rx: RxId::Rx2,
                taps,
            },
        }
    }

    #[test]
    fn full_fom_is_valid() {
        let frame = test_frame(32);
        assert!(validate_frame(&frame, 32).is_ok());
    }

    #[test]
    fn fom_above_hundred_is_rejected() {
        let mut frame = test_frame(32);
        frame.ranging.aoa_fom = 101;
        let err = validate_frame(&frame, 32).unwrap_err();
        assert!(err
            .violations
            .iter()
            .any(|v| matches!(v, Violation::RangeViolation { field: "aoa_fom", .. })));
    }

    #[test]
    fn nan_tap_is_rejected() {
        let mut frame = test_frame(32);
        frame.cir_rx2.taps[5].im = f64::NAN;
        let err = validate_frame(&frame, 32).unwrap_err();
        assert!(err
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonFiniteValue { field } if field.contains("taps[5]"))));
    }

    #[test]
    fn wrong_tap_count_is_rejected() {
        let frame = test_frame(32);
        let err = validate_frame(&frame, 64).unwrap_err();
        assert_eq!(
            err.violations
                .iter()
                .filter(|v| matches!(v, Violation::TapCountMismatch { .. }))
                .count(),
            2
        );
    }

    #[test]
    fn first_path_after_main_is_rejected() {
        let mut frame = test_frame(32);
        frame.rx1.first_path_index_ns = 20.0;
        frame.rx1.main_path_index_ns = 10.0;
        assert!(validate_frame(&frame, 32).is_err());
    }

    #[test]
    fn all_violations_are_collected() {
        let mut frame = test_frame(32);
        frame.ranging.aoa_fom = 120;
        frame.ranging.azimuth_deg = 95.0;
        frame.cir_rx1.taps[0].re = f64::INFINITY;
        let err = validate_frame(&frame, 32).unwrap_err();
        assert!(err.violations.len() >= 3);
    }

    #[test]
    fn validation_is_pure() {
        let frame = test_frame(16);
        assert_eq!(validate_frame(&frame, 16), validate_frame(&frame, 16));
    }

    #[test]
    fn label_ids_are_stable_and_round_trip() {
        for (i, label) in PostureLabel::ALL.iter().enumerate() {
            assert_eq!(label.id() as usize, i);
            assert_eq!(PostureLabel::from_id(label.id()), Some(*label));
            assert_eq!(PostureLabel::from_name(label.name()), Some(*label));
        }
        assert_eq!(PostureLabel::Idle.id(), 0);
        assert_eq!(PostureLabel::Walk.id(), 18);
        assert_eq!(SampleLabel::from_name("unknown"), Some(SampleLabel::Unknown));
        assert_eq!(SampleLabel::from_name("no_such"), None);
    }

    #[test]
    fn dynamic_split_matches_taxonomy() {
        let dynamics: Vec<_> = PostureLabel::ALL
            .iter()
            .filter(|l| l.is_dynamic())
            .collect();
        assert_eq!(dynamics.len(), 8);
        assert!(PostureLabel::RotateHead.is_dynamic());
        assert!(!PostureLabel::LieOnTable.is_dynamic());
    }
}
