//! Liver fibrosis screening pipeline.
//!
//! Extracts radiomic features from spherical ROIs in CT-like volumes, runs a
//! contrast x normalization x model x feature-selection configuration sweep
//! under a nested repeated-split protocol, ranks features, and trains the
//! curated "simple" screening models. Synthetic phantoms with planted
//! texture signal provide end-to-end verification ground truth.

pub mod error;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod normalize;
pub mod phantom;
pub mod pipeline;
pub mod radiomics;
pub mod roi;
pub mod selectors;
pub mod seeding;
pub mod tabular;
pub mod volume;

pub use error::{Error, Result};
