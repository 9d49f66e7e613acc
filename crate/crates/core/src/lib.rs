//! Minority-class oversampling with multivariate Gaussian kernel density
//! estimation, together with the usual resampling baselines (random
//! oversampling, SMOTE, ADASYN, NearMiss), two base classifiers, imbalance-aware
//! metrics, synthetic data generators and a seeded experiment harness.
//!
//! The minority class is always the *positive* class. Every operation that
//! draws random numbers takes an explicit RNG stream, usually derived from a
//! [`Seed`] with a stream label, so runs are reproducible end to end.

pub mod bench;
pub mod classifiers;
pub mod dataset;
mod error;
pub mod kde;
pub mod linalg;
pub mod metrics;
pub mod neighbors;
pub mod samplers;
pub mod synthgen;

pub use dataset::{ColumnRef, Dataset, Label, LabelSpec, Seed};
pub use error::{Error, Result};
pub use kde::{BandwidthRule, KdeModel};
pub use samplers::{ResampleRequest, ResampleResult, Strategy};
