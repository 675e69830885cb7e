//! Membership-inference benchmark for toy diffusion models.
//!
//! Trains small epsilon-prediction denoisers on synthetic image pools, runs
//! loss-based and classifier-based membership attacks against them, and scores
//! every attack with a validation/test protocol: thresholds (or classifiers)
//! are fitted on a validation split and applied blind to a disjoint test split.

pub mod attacks;
pub mod classifier;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod harness;
pub mod rng;

pub use error::{Error, Result};
