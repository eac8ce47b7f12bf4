//! JSON artifact reading/writing. Artifacts are pretty-printed with a
//! trailing newline and contain no timestamps or durations; stage timing
//! goes to `<stage>_meta.json` side files instead.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use chaidlr_core::logit::{LogisticModel, SelectionTrace, VifReport};
use chaidlr_core::metrics::MetricsReport;
use chaidlr_core::scan::{InteractionTerm, ScanReport};

use crate::UsageError;

pub const MEDIANS: &str = "medians.json";
pub const CLUSTERS: &str = "clusters.json";
pub const SCAN: &str = "scan.json";
pub const MODEL_HYBRID: &str = "model_hybrid.json";
pub const MODEL_PURE: &str = "model_pure.json";
pub const COMPARISON: &str = "comparison.csv";
pub const KS_CURVE: &str = "ks_curve.csv";
pub const EVALUATION: &str = "evaluation.json";
pub const BENCH: &str = "bench.json";

/// Scan stage artifact: the report plus the detected terms (ids refer to
/// the deterministically re-derived training split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanArtifact {
    pub report: ScanReport,
    pub terms: Vec<InteractionTerm>,
}

/// Fit stage artifact for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model: LogisticModel,
    pub trace: SelectionTrace,
    /// Absent for models with fewer than two variables.
    pub vif: Option<VifReport>,
}

/// One row of the model-size sweep, with the full metric reports behind the
/// CSV tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub n_variables: usize,
    pub hybrid_train: MetricsReport,
    pub hybrid_valid: MetricsReport,
    pub pure_train: MetricsReport,
    pub pure_valid: MetricsReport,
}

/// Timing side file, excluded from the byte-identity guarantee.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageMeta {
    pub stage: String,
    pub duration_secs: f64,
    pub workers: usize,
    pub unix_time_secs: u64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(
    path: &Path,
    producer: &'static str,
) -> anyhow::Result<T> {
    if !path.exists() {
        return Err(UsageError::MissingArtifact {
            path: path.to_path_buf(),
            producer,
        }
        .into());
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(value)
}

pub fn write_meta(
    out_dir: &Path,
    stage: &str,
    duration_secs: f64,
    workers: usize,
) -> anyhow::Result<()> {
    let meta = StageMeta {
        stage: stage.to_string(),
        duration_secs,
        workers,
        unix_time_secs: SystemTime::now()
            .duration_since(SystemTime::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(&out_dir.join(format!("{stage}_meta.json")), &meta)
}

/// `profile_<term>.csv`, with path-hostile characters in the term name
/// replaced.
pub fn profile_path(out_dir: &Path, term_name: &str) -> PathBuf {
    let safe: String = term_name
        .chars()
        .map(|c| if c == '/' || c == '\\' || c == '\0' { '_' } else { c })
        .collect();
    out_dir.join(format!("profile_{safe}.csv"))
}
