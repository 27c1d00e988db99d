//! Kernel ridge regression regularised toward a synthetic generator, the
//! generalization bounds and ratio planners built on it, a spectral
//! estimation pipeline for images, and an experiment harness.

pub mod bounds;
pub mod discrepancy;
pub mod error;
pub mod harness;
pub mod krr;
pub mod mercer;
pub mod optimize;
pub mod spectral;

pub use error::{Error, Result};
pub use mercer::{make_series, sample_training_set, EigenSpec, SeriesFunction, TrainingSet};
