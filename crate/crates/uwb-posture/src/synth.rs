//! Seeded synthetic UWB scene simulator.
//!
//! Produces posture-dependent frames for testing and benchmarking without
//! real hardware. The model is phenomenological, not electromagnetic: each
//! frame's CIR is a superposition of a direct antenna-to-antenna path, a
//! handful of body-reflection paths (torso, head, legs, hands) whose delays
//! and amplitudes follow the posture profile, and complex Gaussian noise.
//! Ranging angles and distance derive from the same geometry; the per-antenna
//! diagnostics derive from the constructed taps, so simulated frames behave
//! like loaded ones all the way through the pipeline.
//!
//! One tap corresponds to one nanosecond of delay. The direct path sits at a
//! fixed early tap; a seated torso reflects near tap 17, shifted by lean and
//! by the profile's range offset, so the 16-tap windows anchored at the first
//! detected path always cover the body region.
//!
//! Left/right posture variants are encoded as sign-flipped roll: positive
//! roll moves the body toward the second antenna, shortening that antenna's
//! reflection path and lengthening the other's, and shifts the azimuth and
//! phase-difference readings in proportion.
//!
//! Randomness is layered so that datasets are reproducible and samples are
//! independent: subject geometry comes from stream `1_000 + subject`, each
//! sample's draws from stream `10_000 + sample index`, and monitoring
//! sessions from stream `90_000` (see [`crate::rng`]). Within a frame the
//! draw order is fixed: three per-path amplitude flickers, seven measurement
//! noises, then one complex noise pair per tap for each antenna in turn.
//! Frame synthesis is therefore pure given the RNG state, and identical
//! configurations reproduce identical datasets on a given platform (the
//! generator is fully portable; transcendental rounding follows the
//! platform's math library).

use crate::data::{
    AntennaFrameMetrics, CirCapture, ComplexTap, Dataset, PostureLabel, RangingRecord, RxId,
    Sample, SampleLabel, UwbFrame, SCHEMA_VERSION,
};
use crate::rng::{normal, normal_pair, stream_rng, uniform_range};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use thiserror::Error;

/// Seconds between consecutive frames (5 Hz capture).
pub const FRAME_INTERVAL_S: f64 = 0.2;

// Tap-domain geometry. One tap = 1 ns.
const DIRECT_TAP: f64 = 8.0;
const TORSO_TAP: f64 = 17.0;
const PULSE_SIGMA: f64 = 0.75;
const CM_PER_TAP: f64 = 10.0;
const PITCH_TAPS_PER_DEG: f64 = 0.055;
const ROLL_RX_TAPS_PER_DEG: f64 = 0.04;
const RX2_DELAY_TAPS: f64 = 0.35;
const SEP_TAPS_PER_CM: f64 = 0.02;

// Path amplitudes before reflectivity, subject, and attenuation scaling.
const DIRECT_AMP: f64 = 1.0;
const TORSO_AMP: f64 = 0.55;
const HEAD_AMP: f64 = 0.13;
const LEG_AMP: f64 = 0.16;
const HAND_AMP: f64 = 0.07;

// Phase model: fast carrier rotation with delay plus slow rotation across
// taps, so sub-tap delay changes show up strongly in the phase windows.
const PHASE_CYCLES_PER_TAP: f64 = 0.83;
const PHASE_CYCLES_PER_DELAY: f64 = 2.1;

// Angle couplings.
const AZ_PER_ROLL_DEG: f64 = 0.55;
const ELEV_PER_PITCH_DEG: f64 = 0.3;
const PDOA_PER_AZ_DEG: f64 = 3.5;
const AOA_PHASE_PER_AZ_DEG: f64 = 1.9;

// Noise levels at the default perturbation.
const NOISE_SIGMA: f64 = 0.012;
const INTERFERENCE_SIGMA: f64 = 0.004;
const AMP_FLICKER: f64 = 0.08;
const BREATH_TAPS: f64 = 0.12;
const BREATH_HZ: f64 = 0.25;
const AZ_NOISE_DEG: f64 = 0.5;
const ELEV_NOISE_DEG: f64 = 0.6;
const DIST_NOISE_CM: f64 = 1.2;
const PDOA_NOISE_DEG: f64 = 1.5;
const AOA_PHASE_NOISE_DEG: f64 = 0.8;
const CFO_NOISE_PPM: f64 = 0.05;

// Diagnostics derivation.
const FIRST_PATH_FRACTION: f64 = 0.45;
const NOISE_REGION_TAPS: usize = 5;
const CIR_POWER_SCALE: f64 = 1.0e6;
const RSSI_REF_DB: f64 = -48.0;
const DEVICE_SEPARATION_CM: f64 = 100.0;
const DIST_CM_PER_TORSO_TAP: f64 = 2.5;
const NLOS_ATTENUATION_DB: f64 = 4.0;

/// Which side of the body carries the oscillating limb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillationSide {
    None,
    Left,
    Right,
    Both,
}

/// The kinematic description of one posture class.
///
/// Angles are degrees; pitch is positive leaning forward, roll positive
/// leaning right. `body_range_offset_cm` shifts the torso reflection closer
/// (negative) or farther (positive); `body_reflectivity` scales all body-path
/// amplitudes and lies in (0, 2]. `presence = false` removes the body
/// entirely, leaving only the direct path and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostureProfile {
    pub label: PostureLabel,
    pub torso_pitch_deg: f64,
    pub torso_roll_deg: f64,
    pub head_yaw_amplitude_deg: f64,
    pub limb_oscillation_hz: f64,
    pub limb_oscillation_side: OscillationSide,
    pub body_range_offset_cm: f64,
    pub body_reflectivity: f64,
    pub presence: bool,
}

/// The canonical profile for each trained posture class.
///
/// Static classes differ in pitch, roll, range offset, and reflectivity;
/// dynamic classes add an oscillation whose rendering is class-specific (see
/// the renderer). Idle is the empty scene.
pub fn posture_profile(label: PostureLabel) -> PostureProfile {
    use OscillationSide::{Both, Left, None as NoSide, Right};
    use PostureLabel::*;
    let (pitch, roll, yaw, hz, side, range, refl, presence) = match label {
        Idle => (0.0, 0.0, 0.0, 0.0, NoSide, 0.0, 1.0, false),
        Upright => (0.0, 0.0, 0.0, 0.0, NoSide, 0.0, 1.0, true),
        LeanForward => (15.0, 0.0, 0.0, 0.0, NoSide, -8.0, 1.10, true),
        LeanBack => (-12.0, 0.0, 0.0, 0.0, NoSide, 7.0, 0.92, true),
        LateralLeanLeft => (4.0, -14.0, 0.0, 0.0, NoSide, -2.0, 1.05, true),
        CrossLegLeft => (1.0, -5.0, 0.0, 0.0, NoSide, 1.0, 1.12, true),
        LateralLeanRight => (4.0, 14.0, 0.0, 0.0, NoSide, -2.0, 1.05, true),
        CrossLegRight => (1.0, 5.0, 0.0, 0.0, NoSide, 1.0, 1.12, true),
        Hunch => (30.0, 0.0, 0.0, 0.0, NoSide, -18.0, 1.25, true),
        Tense => (-3.0, 0.0, 0.0, 0.0, NoSide, -2.0, 1.15, true),
        LieOnTable => (55.0, 0.0, 0.0, 0.0, NoSide, -25.0, 1.40, true),
        RotateHead => (0.0, 0.0, 35.0, 0.45, NoSide, 0.0, 1.0, true),
        VertLegShakeLeft => (0.0, -0.8, 0.0, 1.7, Left, 0.0, 1.08, true),
        VertLegShakeRight => (0.0, 0.8, 0.0, 1.7, Right, 0.0, 1.08, true),
        HorizLegShake => (0.0, 0.0, 0.0, 1.1, Both, 0.0, 1.08, true),
        TapFinger => (2.0, 0.0, 0.0, 2.3, Right, -1.0, 1.05, true),
        Stretch => (-8.0, 0.0, 0.0, 0.35, Both, 4.0, 1.18, true),
        Stand => (-2.0, 0.0, 0.0, 0.4, Both, 6.0, 1.30, true),
        Walk => (0.0, 0.0, 0.0, 0.7, Both, 10.0, 1.20, true),
    };
    PostureProfile {
        label,
        torso_pitch_deg: pitch,
        torso_roll_deg: roll,
        head_yaw_amplitude_deg: yaw,
        limb_oscillation_hz: hz,
        limb_oscillation_side: side,
        body_range_offset_cm: range,
        body_reflectivity: refl,
        presence,
    }
}

/// Capture-condition knobs. The default is the unperturbed desk setup: no
/// obstacle, no interferer, bare antennas at the reference height and
/// separation, unit noise floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioPerturbation {
    /// Extra path loss from an object between user and antennas, dB ≥ 0.
    pub obstacle_attenuation_db: f64,
    /// Strength of a nearby in-band interferer, ≥ 0 (adds noise).
    pub interference_level: f64,
    /// Extra path loss from heavy clothing, dB ≥ 0.
    pub clothing_attenuation_db: f64,
    /// Antenna height relative to the reference mount, cm.
    pub antenna_height_offset_cm: f64,
    /// Antenna separation relative to the reference spacing, cm.
    pub antenna_separation_cm: f64,
    /// Multiplier on the receiver noise floor, > 0.
    pub noise_floor_scale: f64,
}

impl Default for ScenarioPerturbation {
    fn default() -> Self {
        ScenarioPerturbation {
            obstacle_attenuation_db: 0.0,
            interference_level: 0.0,
            clothing_attenuation_db: 0.0,
            antenna_height_offset_cm: 0.0,
            antenna_separation_cm: 0.0,
            noise_floor_scale: 1.0,
        }
    }
}

/// Full description of one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatorConfig {
    pub seed: u64,
    pub subjects: usize,
    pub samples_per_class: usize,
    pub frames_per_sample: usize,
    /// CIR length per antenna. At least 32 so the pulse geometry fits.
    pub n_taps: usize,
    pub perturbation: ScenarioPerturbation,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            seed: 7,
            subjects: 10,
            samples_per_class: 9,
            frames_per_sample: 100,
            n_taps: 128,
            perturbation: ScenarioPerturbation::default(),
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        if self.subjects == 0 {
            return Err(SimulatorError::InvalidConfig { field: "subjects" });
        }
        if self.samples_per_class == 0 {
            return Err(SimulatorError::InvalidConfig {
                field: "samples_per_class",
            });
        }
        if self.frames_per_sample == 0 {
            return Err(SimulatorError::InvalidConfig {
                field: "frames_per_sample",
            });
        }
        if self.n_taps < 32 {
            return Err(SimulatorError::InvalidConfig { field: "n_taps" });
        }
        let p = &self.perturbation;
        let knobs_valid = p.obstacle_attenuation_db >= 0.0
            && p.interference_level >= 0.0
            && p.clothing_attenuation_db >= 0.0
            && p.noise_floor_scale > 0.0
            && p.obstacle_attenuation_db.is_finite()
            && p.interference_level.is_finite()
            && p.clothing_attenuation_db.is_finite()
            && p.antenna_height_offset_cm.is_finite()
            && p.antenna_separation_cm.is_finite()
            && p.noise_floor_scale.is_finite();
        if !knobs_valid {
            return Err(SimulatorError::InvalidConfig {
                field: "perturbation",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimulatorError {
    #[error("simulator config field `{field}` is out of range")]
    InvalidConfig { field: &'static str },
    #[error("session segment {index} has a non-positive duration")]
    NonPositiveDuration { index: usize },
}

/// Per-subject body and mounting offsets, mirroring the spread of a small
/// participant population (build, seating position, antenna alignment).
/// Drawn once per subject from stream `1_000 + subject`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectGeometry {
    pub delay_offset_taps: f64,
    pub amp_scale: f64,
    pub azimuth_bias_deg: f64,
    pub elevation_bias_deg: f64,
    /// Extra delay of the leg reflection beyond the torso tap.
    pub leg_delay_taps: f64,
    pub cfo_ppm: f64,
}

pub fn subject_geometry(seed: u64, subject: usize) -> SubjectGeometry {
    let mut rng = stream_rng(seed, 1_000 + subject as u64);
    SubjectGeometry {
        delay_offset_taps: uniform_range(&mut rng, -1.2, 1.2),
        amp_scale: uniform_range(&mut rng, 0.85, 1.15),
        azimuth_bias_deg: uniform_range(&mut rng, -3.0, 3.0),
        elevation_bias_deg: uniform_range(&mut rng, -2.0, 2.0),
        leg_delay_taps: uniform_range(&mut rng, 3.2, 4.6),
        cfo_ppm: uniform_range(&mut rng, -4.0, 4.0),
    }
}

/// Per-sample nuisance state: where in its cycle the oscillation starts, how
/// the subject settled in the chair, and slow hardware drift. Constant across
/// the frames of one sample, redrawn for the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleContext {
    pub oscillation_phase: f64,
    pub delay_jitter_taps: f64,
    pub amplitude_scale: f64,
    pub cfo_offset_ppm: f64,
}

impl Default for SampleContext {
    fn default() -> Self {
        SampleContext {
            oscillation_phase: 0.0,
            delay_jitter_taps: 0.0,
            amplitude_scale: 1.0,
            cfo_offset_ppm: 0.0,
        }
    }
}

impl SampleContext {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        SampleContext {
            oscillation_phase: uniform_range(rng, 0.0, TAU),
            delay_jitter_taps: uniform_range(rng, -0.04, 0.04),
            amplitude_scale: uniform_range(rng, 0.97, 1.03),
            cfo_offset_ppm: uniform_range(rng, -0.3, 0.3),
        }
    }
}

/// The body state at one instant: path delays and amplitudes after applying
/// the profile's static geometry and the class-specific motion model.
struct BodyPose {
    torso_delay: f64,
    torso_amp: f64,
    head_delay: f64,
    head_amp: f64,
    leg_delay: f64,
    leg_amp: f64,
    hand_delay: f64,
    hand_amp: f64,
    azimuth_deg: f64,
    elevation_deg: f64,
    pdoa_extra_deg: f64,
}

fn pose_at(
    profile: &PostureProfile,
    geometry: &SubjectGeometry,
    context: &SampleContext,
    t: f64,
) -> BodyPose {
    use PostureLabel::*;
    let osc = TAU * profile.limb_oscillation_hz * t + context.oscillation_phase;
    let (s, c) = osc.sin_cos();
    // Breathing phase is decorrelated from the limb phase by a fixed factor.
    let breath =
        BREATH_TAPS * (TAU * BREATH_HZ * t + 0.73 * context.oscillation_phase).sin();

    let mut pitch = profile.torso_pitch_deg;
    let mut torso_amp = TORSO_AMP * profile.body_reflectivity;
    let mut torso_shift = 0.0;
    let mut head_amp_f = 1.0;
    let mut leg_amp_f = 1.0;
    let mut hand_amp_f = 1.0;
    let mut leg_shift = 0.0;
    let mut hand_shift = 0.0;
    let mut az_osc = 0.0;
    let mut elev_branch = 0.0;
    let mut pdoa_quad = 0.0;

    match profile.label {
        CrossLegLeft | CrossLegRight => {
            // The raised leg sits higher and closer, with more cross-section.
            leg_amp_f = 1.6;
            leg_shift = -1.5;
        }
        Tense => head_amp_f = 1.15,
        LieOnTable => {
            elev_branch = -12.0;
            head_amp_f = 0.3;
        }
        RotateHead => {
            let yaw_deg = profile.head_yaw_amplitude_deg * s;
            head_amp_f = 0.55 + 0.45 * yaw_deg.to_radians().cos();
            az_osc = 0.12 * yaw_deg;
        }
        VertLegShakeLeft | VertLegShakeRight => {
            let side = match profile.limb_oscillation_side {
                OscillationSide::Left => -1.0,
                _ => 1.0,
            };
            // Quadrature encoding: azimuth follows sin, the antenna phase
            // difference follows ±cos, so a single frame sees the same joint
            // distribution for both sides and only the temporal rotation
            // direction tells them apart.
            leg_shift = 0.55 * s;
            leg_amp_f = 1.0 + 0.25 * s;
            az_osc = 0.9 * s;
            pdoa_quad = 3.0 * side * c;
        }
        HorizLegShake => {
            az_osc = 1.8 * s;
            leg_shift = 0.15 * c;
            leg_amp_f = 1.0 + 0.3 * s;
        }
        TapFinger => {
            hand_amp_f = 2.2 * (0.35 + 0.65 * s.abs());
            hand_shift = 0.1 * s;
        }
        Stretch => {
            torso_shift = 1.3 * s;
            torso_amp *= 1.0 + 0.30 * s;
            pitch += 14.0 * s;
            head_amp_f = 1.3;
        }
        Stand => {
            elev_branch = 22.0;
            torso_amp *= 1.15;
            leg_amp_f = 0.4;
            torso_shift = 0.25 * s;
        }
        Walk => {
            elev_branch = 22.0;
            torso_shift = 1.4 * s;
            torso_amp *= 1.0 + 0.2 * c;
            az_osc = 2.5 * s;
            leg_amp_f = 0.7;
            leg_shift = 1.4 * s;
        }
        _ => {}
    }

    let base = geometry.delay_offset_taps + context.delay_jitter_taps;
    let torso_delay = TORSO_TAP + base + profile.body_range_offset_cm / CM_PER_TAP
        - pitch * PITCH_TAPS_PER_DEG
        + breath
        + torso_shift;
    BodyPose {
        torso_delay,
        torso_amp,
        head_delay: torso_delay - 2.2,
        head_amp: HEAD_AMP * profile.body_reflectivity * head_amp_f,
        leg_delay: TORSO_TAP + base + geometry.leg_delay_taps + leg_shift,
        leg_amp: LEG_AMP * profile.body_reflectivity * leg_amp_f,
        hand_delay: torso_delay + 1.8 + hand_shift,
        hand_amp: HAND_AMP * profile.body_reflectivity * hand_amp_f,
        azimuth_deg: geometry.azimuth_bias_deg
            + profile.torso_roll_deg * AZ_PER_ROLL_DEG
            + az_osc,
        elevation_deg: geometry.elevation_bias_deg + elev_branch - pitch * ELEV_PER_PITCH_DEG,
        pdoa_extra_deg: pdoa_quad,
    }
}

struct PathSpec {
    delay: f64,
    amp: f64,
    /// Per-antenna delay asymmetry: added on RX1, subtracted on RX2.
    rx_shift: f64,
    body: bool,
}

fn add_pulse(taps: &mut [ComplexTap], delay: f64, amp: f64, extra_phase: f64) {
    if amp == 0.0 {
        return;
    }
    let lo = (delay - 3.5).floor().max(0.0) as usize;
    let hi = ((delay + 3.5).ceil() as usize).min(taps.len().saturating_sub(1));
    let two_sigma_sq = 2.0 * PULSE_SIGMA * PULSE_SIGMA;
    for (k, tap) in taps.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let d = k as f64 - delay;
        let mag = amp * (-d * d / two_sigma_sq).exp();
        let theta = TAU * (PHASE_CYCLES_PER_TAP * k as f64 - PHASE_CYCLES_PER_DELAY * delay)
            + extra_phase;
        tap.re += mag * theta.cos();
        tap.im += mag * theta.sin();
    }
}

fn derive_metrics(
    taps: &[ComplexTap],
    nlos: bool,
    cfo_ppm: f64,
    aoa_phase_deg: f64,
) -> AntennaFrameMetrics {
    let mags: Vec<f64> = taps.iter().map(|t| t.magnitude()).collect();
    let mut main_idx = 0usize;
    for (k, &m) in mags.iter().enumerate() {
        if m > mags[main_idx] {
            main_idx = k;
        }
    }
    let threshold = FIRST_PATH_FRACTION * mags[main_idx];
    let first_idx = (0..=main_idx)
        .find(|&k| mags[k] >= threshold)
        .unwrap_or(main_idx);
    let noise_region = NOISE_REGION_TAPS.min(mags.len());
    let noise_power = (mags[..noise_region].iter().map(|m| m * m).sum::<f64>()
        / noise_region as f64)
        .max(1.0e-12);
    let total_power: f64 = mags.iter().map(|m| m * m).sum();
    let main_power = mags[main_idx] * mags[main_idx];
    let first_power = mags[first_idx] * mags[first_idx];
    AntennaFrameMetrics {
        nlos,
        first_path_index_ns: first_idx as f64,
        main_path_index_ns: main_idx as f64,
        snr_main_db: 10.0 * (main_power / noise_power).max(1.0e-12).log10(),
        snr_first_db: 10.0 * (first_power / noise_power).max(1.0e-12).log10(),
        snr_total_db: 10.0
            * (total_power / (mags.len() as f64 * noise_power))
                .max(1.0e-12)
                .log10(),
        rssi_db: RSSI_REF_DB + 10.0 * total_power.max(1.0e-12).log10(),
        cir_main_power: (CIR_POWER_SCALE * main_power).round().min(u32::MAX as f64) as u32,
        cir_first_path_power: (CIR_POWER_SCALE * first_power).round().min(u32::MAX as f64)
            as u32,
        noise_variance: noise_power,
        cfo_ppm,
        aoa_phase_deg,
    }
}

/// Renders one frame at time `t` seconds.
///
/// Pure given the RNG state: the same arguments with the same generator state
/// always produce the same frame, and every call consumes the same number of
/// draws (3 flickers, 7 measurement noises, `2 * n_taps` complex pairs)
/// regardless of profile. The output always passes
/// [`crate::data::validate_frame`] for `n_taps ≥ 32` and valid perturbations.
pub fn synth_frame(
    profile: &PostureProfile,
    geometry: &SubjectGeometry,
    context: &SampleContext,
    perturbation: &ScenarioPerturbation,
    n_taps: usize,
    t: f64,
    rng: &mut ChaCha8Rng,
) -> UwbFrame {
    let pose = pose_at(profile, geometry, context, t);

    let flicker_torso = 1.0 + AMP_FLICKER * normal(rng);
    let flicker_legs = 1.0 + AMP_FLICKER * normal(rng);
    let flicker_head = 1.0 + AMP_FLICKER * normal(rng);
    let n_az = normal(rng);
    let n_elev = normal(rng);
    let n_dist = normal(rng);
    let n_pdoa = normal(rng);
    let n_phase = normal(rng);
    let n_cfo = normal(rng);
    let n_fom = normal(rng);

    let p = perturbation;
    let attenuation =
        10f64.powf(-(p.obstacle_attenuation_db + p.clothing_attenuation_db) / 20.0);
    let body_scale = if profile.presence {
        geometry.amp_scale * context.amplitude_scale * attenuation
    } else {
        0.0
    };
    let sigma = NOISE_SIGMA * p.noise_floor_scale + INTERFERENCE_SIGMA * p.interference_level;
    let roll_shift = profile.torso_roll_deg * ROLL_RX_TAPS_PER_DEG;
    let direct_amp = DIRECT_AMP * (1.0 - (p.antenna_height_offset_cm.abs() * 0.004).min(0.5));

    let paths = [
        PathSpec {
            delay: DIRECT_TAP + p.antenna_separation_cm * SEP_TAPS_PER_CM,
            amp: direct_amp,
            rx_shift: 0.0,
            body: false,
        },
        PathSpec {
            delay: pose.torso_delay,
            amp: pose.torso_amp * body_scale * flicker_torso,
            rx_shift: roll_shift,
            body: true,
        },
        PathSpec {
            delay: pose.head_delay,
            amp: pose.head_amp * body_scale * flicker_head,
            rx_shift: roll_shift,
            body: true,
        },
        PathSpec {
            delay: pose.leg_delay,
            amp: pose.leg_amp * body_scale * flicker_legs,
            rx_shift: roll_shift,
            body: true,
        },
        PathSpec {
            delay: pose.hand_delay,
            amp: pose.hand_amp * body_scale * flicker_head,
            rx_shift: roll_shift,
            body: true,
        },
    ];

    let pdoa_geom_deg = pose.azimuth_deg * PDOA_PER_AZ_DEG + pose.pdoa_extra_deg;
    let mut cirs = Vec::with_capacity(2);
    for rx in [RxId::Rx1, RxId::Rx2] {
        let mut taps = vec![ComplexTap { re: 0.0, im: 0.0 }; n_taps];
        for path in &paths {
            let (delay, extra_phase) = match rx {
                RxId::Rx1 => (path.delay + path.rx_shift, 0.0),
                RxId::Rx2 => (
                    path.delay + RX2_DELAY_TAPS - path.rx_shift,
                    if path.body {
                        pdoa_geom_deg.to_radians()
                    } else {
                        0.0
                    },
                ),
            };
            add_pulse(&mut taps, delay, path.amp, extra_phase);
        }
        for tap in &mut taps {
            let (n_re, n_im) = normal_pair(rng);
            tap.re += sigma * std::f64::consts::FRAC_1_SQRT_2 * n_re;
            tap.im += sigma * std::f64::consts::FRAC_1_SQRT_2 * n_im;
        }
        cirs.push(CirCapture { rx, taps });
    }
    let cir_rx2 = cirs.pop().expect("two captures were just rendered");
    let cir_rx1 = cirs.pop().expect("two captures were just rendered");

    let nlos = p.obstacle_attenuation_db + p.clothing_attenuation_db > NLOS_ATTENUATION_DB;
    let cfo = geometry.cfo_ppm + context.cfo_offset_ppm + CFO_NOISE_PPM * n_cfo;
    let pdoa_deg = (pdoa_geom_deg + PDOA_NOISE_DEG * n_pdoa).clamp(-180.0, 180.0);
    let aoa_phase_rx1 = (pose.azimuth_deg * AOA_PHASE_PER_AZ_DEG
        + AOA_PHASE_NOISE_DEG * n_phase)
        .clamp(-180.0, 180.0);
    let aoa_phase_rx2 = (aoa_phase_rx1 + pdoa_deg).clamp(-180.0, 180.0);

    let body_bias = if profile.presence {
        (pose.torso_delay - TORSO_TAP) * DIST_CM_PER_TORSO_TAP
    } else {
        0.0
    };
    let fom_base = 88.0 + if profile.presence { 4.0 } else { 0.0 }
        - 1.5 * p.obstacle_attenuation_db
        - 1.0 * p.clothing_attenuation_db
        - 6.0 * p.interference_level;
    let ranging = RangingRecord {
        distance_cm: (DEVICE_SEPARATION_CM + p.antenna_separation_cm + body_bias
            + DIST_NOISE_CM * n_dist)
            .clamp(0.0, 10_000.0),
        azimuth_deg: (pose.azimuth_deg + AZ_NOISE_DEG * n_az).clamp(-90.0, 90.0),
        elevation_deg: (pose.elevation_deg + ELEV_NOISE_DEG * n_elev).clamp(-90.0, 90.0),
        aoa_fom: (fom_base + 3.0 * n_fom).round().clamp(0.0, 100.0) as u8,
        pdoa_deg,
    };

    UwbFrame {
        timestamp_s: t,
        ranging,
        rx1: derive_metrics(&cir_rx1.taps, nlos, cfo, aoa_phase_rx1),
        rx2: derive_metrics(&cir_rx2.taps, nlos, cfo, aoa_phase_rx2),
        cir_rx1,
        cir_rx2,
    }
}

fn scenario_tags(p: &ScenarioPerturbation) -> Vec<String> {
    let mut tags = Vec::new();
    if p.obstacle_attenuation_db > 0.0 {
        tags.push(format!("obstacle_{}db", p.obstacle_attenuation_db));
    }
    if p.clothing_attenuation_db > 0.0 {
        tags.push(format!("clothing_{}db", p.clothing_attenuation_db));
    }
    if p.interference_level > 0.0 {
        tags.push(format!("interference_{}", p.interference_level));
    }
    if p.antenna_height_offset_cm != 0.0 {
        tags.push(format!("height_offset_{}cm", p.antenna_height_offset_cm));
    }
    if p.antenna_separation_cm != 0.0 {
        tags.push(format!("separation_offset_{}cm", p.antenna_separation_cm));
    }
    if p.noise_floor_scale != 1.0 {
        tags.push(format!("noise_scale_{}", p.noise_floor_scale));
    }
    tags.sort();
    tags
}

/// Generates `subjects × 19 × samples_per_class` samples, each holding
/// `frames_per_sample` frames at 0.2 s spacing.
///
/// Subject geometry is drawn once per subject; each sample then renders from
/// its own RNG stream indexed by position (subject outermost, then class,
/// then repetition), so the result is fully deterministic for a fixed config
/// and any one sample can be regenerated in isolation.
pub fn synth_dataset(config: &SimulatorConfig) -> Result<Dataset, SimulatorError> {
    config.validate()?;
    let mut samples =
        Vec::with_capacity(config.subjects * PostureLabel::COUNT * config.samples_per_class);
    for subject in 0..config.subjects {
        let geometry = subject_geometry(config.seed, subject);
        for label in PostureLabel::ALL {
            let profile = posture_profile(label);
            for rep in 0..config.samples_per_class {
                let sample_index = (subject * PostureLabel::COUNT + label.id() as usize)
                    * config.samples_per_class
                    + rep;
                let mut rng = stream_rng(config.seed, 10_000 + sample_index as u64);
                let context = SampleContext::draw(&mut rng);
                let frames = (0..config.frames_per_sample)
                    .map(|i| {
                        synth_frame(
                            &profile,
                            &geometry,
                            &context,
                            &config.perturbation,
                            config.n_taps,
                            i as f64 * FRAME_INTERVAL_S,
                            &mut rng,
                        )
                    })
                    .collect();
                samples.push(Sample {
                    sample_id: format!("s{subject:02}-{}-r{rep:02}", label.name()),
                    subject_id: format!("subject{subject:02}"),
                    label: SampleLabel::Known(label),
                    scenario_tags: scenario_tags(&config.perturbation),
                    frames,
                });
            }
        }
    }
    Ok(Dataset {
        schema_version: SCHEMA_VERSION,
        n_taps: config.n_taps,
        samples,
    })
}

/// A profile deliberately outside the trained envelope: torso pitched far
/// beyond any class, pressed close to the antennas, unusually reflective.
/// Used for the Unknown segments of monitoring sessions.
fn unknown_profile() -> PostureProfile {
    PostureProfile {
        label: PostureLabel::Upright,
        torso_pitch_deg: 82.0,
        torso_roll_deg: 18.0,
        head_yaw_amplitude_deg: 0.0,
        limb_oscillation_hz: 0.0,
        limb_oscillation_side: OscillationSide::None,
        body_range_offset_cm: -32.0,
        body_reflectivity: 1.85,
        presence: true,
    }
}

/// One frame of a monitoring session with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionFrame {
    pub frame: UwbFrame,
    pub truth: SampleLabel,
    /// Index of the segment this frame belongs to.
    pub segment: usize,
}

/// Synthesizes a continuous monitoring session: one subject moving through
/// the given posture segments, frames at 0.2 s spacing with a shared clock
/// across segment boundaries. A duration of `d` seconds yields
/// `round(d / 0.2)` frames. `Unknown` segments render the out-of-envelope
/// profile. The subject repositions at each transition, so per-segment
/// nuisance state is redrawn.
pub fn synth_ood_session(
    config: &SimulatorConfig,
    sequence: &[(SampleLabel, f64)],
) -> Result<Vec<SessionFrame>, SimulatorError> {
    config.validate()?;
    for (index, &(_, duration_s)) in sequence.iter().enumerate() {
        if !(duration_s > 0.0) {
            return Err(SimulatorError::NonPositiveDuration { index });
        }
    }
    let geometry = subject_geometry(config.seed, 0);
    let mut rng = stream_rng(config.seed, 90_000);
    let mut out = Vec::new();
    let mut frame_index = 0u64;
    for (segment, &(truth, duration_s)) in sequence.iter().enumerate() {
        let profile = match truth {
            SampleLabel::Known(label) => posture_profile(label),
            SampleLabel::Unknown => unknown_profile(),
        };
        let context = SampleContext::draw(&mut rng);
        let n_frames = (duration_s / FRAME_INTERVAL_S).round() as u64;
        for _ in 0..n_frames {
            let t = frame_index as f64 * FRAME_INTERVAL_S;
            let frame = synth_frame(
                &profile,
                &geometry,
                &context,
                &config.perturbation,
                config.n_taps,
                t,
                &mut rng,
            );
            out.push(SessionFrame {
                frame,
                truth,
                segment,
            });
            frame_index += 1;
        }
    }
    Ok(out)
}
