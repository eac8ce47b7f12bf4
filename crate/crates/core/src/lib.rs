//! Hybrid binary-response modeling: CHAID-driven interaction detection
//! feeding stepwise logistic regression.
//!
//! The library is organized around a two-stage workflow. First, every pair
//! of predictors is screened with a small CHAID tree; pairs whose tree
//! actually splits are turned into product interaction columns. Second,
//! those products join the base predictors as candidates in a stepwise
//! logistic regression. The surrounding machinery (CSV ingestion, stratified
//! splitting, median imputation, variable clustering, ROC/AUC/KS evaluation,
//! synthetic data with planted interactions, and a brute-force complete
//! stepwise baseline) lives in the sibling modules.

pub mod chaid;
pub mod cluster;
pub mod data;
pub mod error;
pub mod logit;
pub mod metrics;
pub mod preprocess;
pub mod scan;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
