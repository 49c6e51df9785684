//! Transfer learning for linear regression when new input features appear.
//!
//! The typical situation: a large historical dataset observes only the first
//! `d_S` features, while a small freshly collected dataset observes all `d_T`
//! features. This crate fits a single linear model from both by minimizing a
//! weighted sum of the two residual losses, with the missing source columns
//! zero-filled and the new target columns centred by their sample mean.
//!
//! Main entry points:
//! - [`estimators::fit_data_pooling`] — the pooled estimator plus its
//!   inverse-variance weights.
//! - [`gain`] — analytic and empirical transfer gain of pooling over
//!   target-only least squares, including the positive-semidefiniteness
//!   certificate for the variance-difference matrix.
//! - [`dsft`] — feature-imputation baselines (linear and RBF-kernel).
//! - [`simgen`] — seeded synthetic data generators for the simulation studies.
//! - [`bench`] — CSV ingestion, split protocols, RMSE comparison and Wilcoxon
//!   significance testing.

pub mod bench;
pub mod dsft;
mod error;
pub mod estimators;
pub mod experiments;
pub mod gain;
pub(crate) mod linalg;
pub mod simgen;

pub use error::{Error, Result};
pub use estimators::{Dataset, FittedModel, ModelKind, PoolingWeights};
