//! Evaluation toolkit for wound-detection models that emit per-pixel
//! probability maps.
//!
//! - [`losses`]: soft Dice, soft Jaccard, binary focal and their weighted
//!   composite, with analytic gradients ([`gradcheck`] audits them).
//! - [`postprocess`]: probability map to boxes via connected regions and
//!   mean-confidence / area thresholds (0.6 and 200 px by default).
//! - [`metrics`]: pixel F1/IoU, greedy box matching, precision/recall/F1, AP.
//! - [`stats`]: Welch's t-test for comparing runs.
//! - [`preprocess`]: normalization and a seeded, portable augmentation pipeline.
//! - [`io`]: file formats; [`scoring`]: dataset-level scoring shared with the
//!   scoring service.

pub mod error;
pub mod gradcheck;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod postprocess;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod stats;
pub mod types;

pub use error::{Error, FormatError, Result};
pub use types::{bbox_area, BBox, BinaryMask, Detection, FocalParams, LossWeights, ProbMap, SmoothEps};
