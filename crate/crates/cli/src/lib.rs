//! Pipeline orchestration behind the `chaidlr` binary.
//!
//! Stage commands (`scan`, `fit`, `evaluate`, `profile`) re-derive the
//! preprocessed splits deterministically from the input CSV and the config
//! seed, then read earlier stages' JSON artifacts; `run` chains all four.
//! Every computation flows from the config seed, so identical config plus
//! seed yields byte-identical artifacts; wall-clock numbers go to `*_meta`
//! side files that are excluded from that guarantee.

pub mod artifacts;
pub mod config;
pub mod stages;

use std::path::PathBuf;

use thiserror::Error;

/// Errors that indicate a usage problem (exit status 2) rather than a
/// computation failure (exit status 1).
#[derive(Debug, Error)]
pub enum UsageError {
    #[error("input file {0} does not exist")]
    MissingInput(PathBuf),

    #[error("missing artifact {path}: run `chaidlr {producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("cannot read config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("config has no `synth` section; `{command}` needs one")]
    MissingSynthSpec { command: &'static str },

    #[error("config has no `input` path; data commands need an input CSV")]
    NoInputConfigured,
}

/// Exit status for an error: 2 for usage problems, 1 otherwise.
pub fn exit_status(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}
