//! Sitting-posture recognition from ultra-wideband channel impulse responses.
//!
//! The crate covers the full pipeline:
//!
//! * [`data`]: domain types, frame validation, JSONL datasets, stratified splits.
//! * [`synth`]: a seeded synthetic scene generator standing in for captures.
//! * [`features`]: per-frame feature assembly, winsorization, temporal windows.
//! * [`boost`]: a histogram gradient-boosted tree multiclass classifier.
//! * [`ood`]: leaf-embedding one-class out-of-distribution detection.
//! * [`eval`]: confusion matrices, per-class metrics, window-size ablations.
//! * [`stream`]: frame-by-frame monitoring with smoothing and posture alerts.
//! * [`pipeline`]: end-to-end helpers tying the stages together.
//!
//! ```
//! use uwb_posture::data::PostureLabel;
//!
//! assert_eq!(PostureLabel::Upright.id(), 1);
//! assert_eq!(PostureLabel::from_name("hunch"), Some(PostureLabel::Hunch));
//! ```

pub mod book;
pub mod boost;
pub mod data;
pub mod eval;
pub mod features;
pub mod hash;
pub mod ood;
pub mod pipeline;
pub mod rng;
pub mod stream;
pub mod synth;
