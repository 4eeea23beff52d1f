//! The guide chapters as doc-tested modules.
//!
//! Each chapter of `book/` is included verbatim so its code blocks compile
//! and run under `cargo test`. The book stays truthful or the build breaks.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
pub mod synthetic_data {}

#[doc = include_str!("../../../book/src/features.md")]
pub mod features {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/ood-detection.md")]
pub mod ood_detection {}

#[doc = include_str!("../../../book/src/monitoring.md")]
pub mod monitoring {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
