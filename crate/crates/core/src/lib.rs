//! Graph anomaly detection with tree ensembles over parameter-free neighbor
//! aggregation, together with the evaluation harness used to benchmark them.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`] and [`dataset`]: CSR graphs, feature/label containers, on-disk format
//! - [`datagen`]: deterministic synthetic datasets
//! - [`aggregation`]: mean/sum/max neighbor pooling and layer stacking
//! - [`trees`]: CART, random forests and second-order gradient boosting
//! - [`baselines`]: k-nearest-neighbor scoring and neighborhood averaging
//! - [`metrics`]: AUROC, average precision, Rec@K
//! - [`protocol`]: splits, repeated trials, random hyperparameter search

pub mod aggregation;
pub mod baselines;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod trees;

pub use error::{GadError, Result};

/// Version string embedded in every serialized report.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
