//! Continuous monitoring over a live frame stream.
//!
//! [`StreamMonitor`] consumes one frame at a time and emits one
//! [`TimelineRecord`] per frame: the predicted posture, the detector verdict
//! before and after smoothing, and the alert state. Windowing reuses
//! [`fill_windowed_row`] over a ring buffer of the last `tau` assembled
//! rows, with the padding rule shared with batch windowing (history short of
//! `tau` repeats the earliest frame), so stream and batch predictions over
//! the same frames agree from the first frame on.
//!
//! Frames are assembled as they arrive, without the per-sample winsorization
//! of the file pipeline: outlier fences are order statistics of a complete
//! capture and have no incremental counterpart. Clipping only binds on
//! extreme frames, which the detector is there to flag anyway.
//!
//! The detector verdict is smoothed by strict majority over the last three
//! raw verdicts, so a single flickering frame neither suppresses a posture
//! nor interrupts an alert. Smoothed-out frames report the posture as
//! unknown and reset the alert accumulator; the raw verdict stays in the
//! record.

use std::collections::VecDeque;

use thiserror::Error;

use crate::boost::{argmax, GbdtModel, PredictError};
use crate::data::{PostureLabel, SampleLabel, UwbFrame};
use crate::features::{assemble_frame_features, fill_windowed_row, FeatureError};
use crate::ood::OodError;

/// Smoothing depth for the detector verdict.
const SMOOTHING_FRAMES: usize = 3;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("feature assembly failed: {0}")]
    Feature(#[from] FeatureError),
    #[error("prediction failed: {0}")]
    Predict(#[from] PredictError),
    #[error("detector scoring failed: {0}")]
    Ood(#[from] OodError),
    #[error("timestamp {got} does not advance past {prev}")]
    NonMonotonicTimestamp { prev: f64, got: f64 },
    #[error("alert threshold must be positive and finite, got {0}")]
    InvalidAlertThreshold(f64),
}

/// Monitoring policy: which postures are unhealthy and how long they must
/// persist before an alert.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub unhealthy: Vec<PostureLabel>,
    /// Consecutive unhealthy seconds before `alert_active` turns on.
    pub alert_after_s: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            unhealthy: vec![
                PostureLabel::Hunch,
                PostureLabel::Tense,
                PostureLabel::LieOnTable,
                PostureLabel::LeanForward,
                PostureLabel::LateralLeanLeft,
                PostureLabel::LateralLeanRight,
            ],
            alert_after_s: 30.0,
        }
    }
}

/// One frame's monitoring outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRecord {
    pub timestamp_s: f64,
    /// Predicted posture; `Unknown` when the smoothed detector verdict is
    /// out-of-distribution.
    pub predicted: SampleLabel,
    /// Smoothed detector verdict.
    pub is_ood: bool,
    /// Raw, unsmoothed detector verdict for this frame alone.
    pub raw_is_ood: bool,
    /// Detector decision value; `None` when the model has no detector.
    pub decision_value: Option<f64>,
    pub alert_active: bool,
}

/// Consecutive-unhealthy timing, separated from the monitor so the alert
/// arithmetic is testable without a model.
#[derive(Debug, Clone)]
pub struct AlertTracker {
    after_s: f64,
    accumulated_s: f64,
    last_timestamp: Option<f64>,
}

impl AlertTracker {
    pub fn new(after_s: f64) -> Result<Self, StreamError> {
        if !(after_s > 0.0 && after_s.is_finite()) {
            return Err(StreamError::InvalidAlertThreshold(after_s));
        }
        Ok(Self {
            after_s,
            accumulated_s: 0.0,
            last_timestamp: None,
        })
    }

    /// Advances to `timestamp_s` and returns whether the alert is active.
    /// Unhealthy time accrues between consecutive unhealthy frames; any
    /// healthy (or suppressed) frame resets the run to zero.
    pub fn update(&mut self, timestamp_s: f64, unhealthy: bool) -> bool {
        if unhealthy {
            if let Some(prev) = self.last_timestamp {
                self.accumulated_s += timestamp_s - prev;
            }
        } else {
            self.accumulated_s = 0.0;
        }
        self.last_timestamp = Some(timestamp_s);
        self.accumulated_s >= self.after_s
    }

    pub fn accumulated_s(&self) -> f64 {
        self.accumulated_s
    }
}

/// Incremental per-frame classifier and detector over a live stream.
pub struct StreamMonitor<'m> {
    model: &'m GbdtModel,
    unhealthy: Vec<bool>,
    alert: AlertTracker,
    checksum: u64,
    /// Last `tau` assembled base rows, oldest first.
    history: VecDeque<Vec<f64>>,
    /// Last raw detector verdicts, oldest first, at most
    /// [`SMOOTHING_FRAMES`].
    recent_ood: VecDeque<bool>,
    windowed_row: Vec<f64>,
    last_timestamp: Option<f64>,
}

impl<'m> StreamMonitor<'m> {
    pub fn new(model: &'m GbdtModel, config: &MonitorConfig) -> Result<Self, StreamError> {
        let mut unhealthy = vec![false; PostureLabel::COUNT];
        for label in &config.unhealthy {
            unhealthy[label.id() as usize] = true;
        }
        Ok(Self {
            model,
            unhealthy,
            alert: AlertTracker::new(config.alert_after_s)?,
            checksum: model.checksum(),
            history: VecDeque::with_capacity(model.tau),
            recent_ood: VecDeque::with_capacity(SMOOTHING_FRAMES),
            windowed_row: Vec::new(),
            last_timestamp: None,
        })
    }

    /// Consumes one frame and reports its monitoring outcome. A frame whose
    /// timestamp does not strictly advance is rejected without touching the
    /// monitor state, so a caller can skip it and continue.
    pub fn push_frame(&mut self, frame: &UwbFrame) -> Result<TimelineRecord, StreamError> {
        if let Some(prev) = self.last_timestamp {
            if frame.timestamp_s <= prev {
                return Err(StreamError::NonMonotonicTimestamp {
                    prev,
                    got: frame.timestamp_s,
                });
            }
        }
        let row = assemble_frame_features(frame)?;
        if self.history.len() == self.model.tau {
            self.history.pop_front();
        }
        self.history.push_back(row);
        self.last_timestamp = Some(frame.timestamp_s);

        let newest = self.history.len() - 1;
        let history = &self.history;
        let mut windowed = std::mem::take(&mut self.windowed_row);
        fill_windowed_row(&mut windowed, self.model.tau, |d| {
            &history[newest.saturating_sub(d)]
        });

        let proba = self
            .model
            .predict_proba_row(&windowed, self.model.layout_hash)?;
        let raw_label = self.model.classes[argmax(&proba)];

        let (decision_value, raw_is_ood) = match &self.model.ood {
            Some(det) => {
                let emb = self.model.leaf_indices_row(&windowed, self.model.layout_hash)?;
                let (f, flag) = det.score(&emb, self.checksum)?;
                (Some(f), flag)
            }
            None => (None, false),
        };
        self.windowed_row = windowed;

        if self.recent_ood.len() == SMOOTHING_FRAMES {
            self.recent_ood.pop_front();
        }
        self.recent_ood.push_back(raw_is_ood);
        let flagged = self.recent_ood.iter().filter(|&&f| f).count();
        let is_ood = 2 * flagged > self.recent_ood.len();

        let predicted = if is_ood {
            SampleLabel::Unknown
        } else {
            SampleLabel::Known(
                PostureLabel::from_id(raw_label).expect("model classes are posture ids"),
            )
        };
        let unhealthy_now = !is_ood && self.unhealthy[raw_label as usize];
        let alert_active = self.alert.update(frame.timestamp_s, unhealthy_now);

        Ok(TimelineRecord {
            timestamp_s: frame.timestamp_s,
            predicted,
            is_ood,
            raw_is_ood,
            decision_value,
            alert_active,
        })
    }
}
