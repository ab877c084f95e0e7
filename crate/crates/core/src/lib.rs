//! Severity scoring for chest radiographs built on semantic pathology features.
//!
//! The crate is split along the pipeline:
//!
//! * [`imgproc`]: deterministic 8-bit image pipeline (equalization, CLAHE,
//!   mask clean-up, crop, resize, Dice).
//! * [`model_runtime`]: loading and running the pretrained segmentation and
//!   pathology networks, plus a mock runner for tests.
//! * [`dataset`]: metadata ingestion, training labels and stage grouping.
//! * [`learn`]: standardization, the logistic severity model, the shallow
//!   decision tree and leave-two-out cross-validation.
//! * [`eval`]: box statistics, trend predicates, scorer comparison and the
//!   report bundle.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod imgproc;
pub mod learn;
pub mod model_runtime;

pub use error::{Error, Result};
