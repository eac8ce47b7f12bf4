//! Pipeline configuration. A single JSON document; every default matches
//! the modeling procedure's standard values (0.6 train split, 0.9 missing
//! threshold, CHAID 0.3/18/10/3/15, stepwise 0.15/0.15, VIF 10), so an
//! empty `{}` override runs the standard procedure.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use chaidlr_core::chaid::ChaidConfig;
use chaidlr_core::error::Error as CoreError;
use chaidlr_core::logit::StepwiseConfig;
use chaidlr_core::synth::SynthSpec;

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_train_fraction() -> f64 {
    0.6
}
fn default_seed() -> u64 {
    1
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: default_train_fraction(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    #[serde(default = "default_max_second_eigenvalue")]
    pub max_second_eigenvalue: f64,
}

fn default_max_second_eigenvalue() -> f64 {
    1.0
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            max_second_eigenvalue: default_max_second_eigenvalue(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Input CSV; required by the data-driven commands.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default)]
    pub split: SplitConfig,
    /// Columns with a larger missing fraction are dropped.
    #[serde(default = "default_missing_threshold")]
    pub missing_threshold: f64,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub chaid: ChaidConfig,
    #[serde(default)]
    pub stepwise: StepwiseConfig,
    #[serde(default = "default_vif_threshold")]
    pub vif_threshold: f64,
    /// Model sizes for the comparison tables.
    #[serde(default = "default_sweep")]
    pub sweep: Vec<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Synthetic-data spec for `synth` and `bench`.
    #[serde(default)]
    pub synth: Option<SynthSpec>,
}

fn default_target() -> String {
    "RESP_FLAG".to_string()
}
fn default_missing_threshold() -> f64 {
    0.9
}
fn default_vif_threshold() -> f64 {
    10.0
}
fn default_sweep() -> Vec<usize> {
    vec![30, 27, 24, 21, 18, 15, 12]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let config: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| UsageError::Config {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.chaid.validate()?;
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "split.train_fraction must be in (0,1), got {}",
                self.split.train_fraction
            )));
        }
        if !(self.missing_threshold > 0.0 && self.missing_threshold <= 1.0) {
            return Err(CoreError::InvalidConfig(format!(
                "missing_threshold must be in (0,1], got {}",
                self.missing_threshold
            )));
        }
        if self.vif_threshold <= 1.0 {
            return Err(CoreError::InvalidConfig(format!(
                "vif_threshold must exceed 1, got {}",
                self.vif_threshold
            )));
        }
        if let Some(spec) = &self.synth {
            spec.validate()?;
        }
        Ok(())
    }

    /// Applies command-line overrides: `--seed` steers both the split and
    /// the synthetic generator; `--out` replaces the output directory.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(seed) = seed {
            self.split.seed = seed;
            if let Some(spec) = &mut self.synth {
                spec.seed = seed;
            }
        }
        if let Some(out) = out {
            self.output_dir = out;
        }
        self
    }
}
