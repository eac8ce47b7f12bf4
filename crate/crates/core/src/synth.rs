//! Synthetic data with planted interaction effects, plus the complete
//! stepwise search over all pairwise products — the brute-force baseline the
//! pair scan is benchmarked against.
//!
//! Generation draws one ChaCha substream per predictor column (stream `j+1`),
//! one for the target (stream 0), and one per correlation block factor, so
//! adding predictors to a spec never perturbs the columns already there.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chaid::ChaidConfig;
use crate::data::{make_interaction_column, ColumnId, Column, Dataset};
use crate::error::{Error, Result};
use crate::logit::{stepwise, LogisticModel, SelectionTrace, StepwiseConfig};
use crate::metrics::{report_for, MetricsReport};
use crate::preprocess::{apply_imputation, drop_missing_target, filter_and_impute, stratified_split};
use crate::scan::{enumerate_pairs, materialize_terms, scan_all};
use crate::stats::sigmoid;

const FACTOR_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainEffect {
    pub index: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedInteraction {
    pub i: usize,
    pub j: usize,
    pub coefficient: f64,
}

/// Within-block correlation: consecutive runs of `block_size` predictors
/// share a common factor giving pairwise correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCorrelation {
    pub block_size: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub n_rows: usize,
    pub n_predictors: usize,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub main_effects: Vec<MainEffect>,
    #[serde(default)]
    pub interactions: Vec<PlantedInteraction>,
    #[serde(default)]
    pub correlation: Option<BlockCorrelation>,
    #[serde(default)]
    pub missing_rate: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_target_name")]
    pub target_name: String,
}

fn default_name() -> String {
    "synthetic".to_string()
}
fn default_seed() -> u64 {
    1
}
fn default_target_name() -> String {
    "RESP_FLAG".to_string()
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 {
            return Err(Error::InvalidConfig("n_rows must be positive".into()));
        }
        if self.n_predictors == 0 {
            return Err(Error::InvalidConfig("n_predictors must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::InvalidConfig(format!(
                "missing_rate must be in [0,1), got {}",
                self.missing_rate
            )));
        }
        for effect in &self.main_effects {
            if effect.index >= self.n_predictors {
                return Err(Error::InvalidConfig(format!(
                    "main effect index {} out of range (p = {})",
                    effect.index, self.n_predictors
                )));
            }
        }
        for planted in &self.interactions {
            if planted.i >= self.n_predictors || planted.j >= self.n_predictors {
                return Err(Error::InvalidConfig(format!(
                    "interaction ({}, {}) out of range (p = {})",
                    planted.i, planted.j, self.n_predictors
                )));
            }
            if planted.i == planted.j {
                return Err(Error::InvalidConfig(format!(
                    "interaction references predictor {} twice",
                    planted.i
                )));
            }
        }
        if let Some(corr) = &self.correlation {
            if corr.block_size == 0 {
                return Err(Error::InvalidConfig("block_size must be positive".into()));
            }
            if !(0.0..1.0).contains(&corr.rho) {
                return Err(Error::InvalidConfig(format!(
                    "rho must be in [0,1), got {}",
                    corr.rho
                )));
            }
        }
        Ok(())
    }

    /// Name of the planted pair's product column, e.g. `"x4*x8"`.
    pub fn interaction_name(&self, planted: &PlantedInteraction) -> String {
        let (a, b) = if planted.i < planted.j {
            (planted.i, planted.j)
        } else {
            (planted.j, planted.i)
        };
        format!("x{}*x{}", a + 1, b + 1)
    }
}

fn column_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a dataset from the spec: standard-normal predictors (optionally
/// block-correlated), a Bernoulli target through the logistic link applied
/// to the planted effects, then missing-cell injection on the predictors.
/// The target is generated from the latent (pre-masking) values.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_rows;
    let p = spec.n_predictors;

    let factors: Vec<Vec<f64>> = match &spec.correlation {
        Some(corr) => {
            let n_blocks = p.div_ceil(corr.block_size);
            (0..n_blocks)
                .map(|b| {
                    let mut rng = column_stream(spec.seed, FACTOR_STREAM_BASE + b as u64);
                    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
                })
                .collect()
        }
        None => Vec::new(),
    };

    let mut latent: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut rng = column_stream(spec.seed, j as u64 + 1);
        let noise: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let values = match &spec.correlation {
            Some(corr) => {
                let factor = &factors[j / corr.block_size];
                let load = corr.rho.sqrt();
                let resid = (1.0 - corr.rho).sqrt();
                noise
                    .iter()
                    .zip(factor)
                    .map(|(e, f)| load * f + resid * e)
                    .collect()
            }
            None => noise,
        };
        // the mask comes from the same column stream, after the values
        let mask: Vec<bool> = (0..n)
            .map(|_| rng.random::<f64>() < spec.missing_rate)
            .collect();
        latent.push(values);
        masks.push(mask);
    }

    let mut target_rng = column_stream(spec.seed, 0);
    let target: Vec<Option<f64>> = (0..n)
        .map(|r| {
            let mut lin = spec.intercept;
            for effect in &spec.main_effects {
                lin += effect.coefficient * latent[effect.index][r];
            }
            for planted in &spec.interactions {
                lin += planted.coefficient * latent[planted.i][r] * latent[planted.j][r];
            }
            let y = target_rng.random::<f64>() < sigmoid(lin);
            Some(y as u8 as f64)
        })
        .collect();

    let mut columns: Vec<Column> = latent
        .into_iter()
        .zip(&masks)
        .enumerate()
        .map(|(j, (values, mask))| {
            let cells: Vec<Option<f64>> = values
                .into_iter()
                .zip(mask)
                .map(|(v, &m)| if m { None } else { Some(v) })
                .collect();
            Column::new(format!("x{}", j + 1), cells)
        })
        .collect();
    columns.push(Column::new(spec.target_name.clone(), target));
    Dataset::from_columns(spec.name.clone(), columns, &spec.target_name)
}

/// Every pairwise product of the base predictors attached to the dataset in
/// pair order. Used by the complete stepwise baseline on both splits.
pub fn materialize_all_products(ds: &Dataset, base: &[ColumnId]) -> Result<Dataset> {
    let mut columns = ds.columns.clone();
    for (a, b) in enumerate_pairs(base.len())? {
        columns.push(make_interaction_column(ds, base[a], base[b])?);
    }
    let target_name = ds.target_column().name.clone();
    Dataset::from_columns(ds.name.clone(), columns, &target_name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub trace: SelectionTrace,
    pub model: LogisticModel,
    pub duration_secs: f64,
    /// Base predictors plus materialized products.
    pub candidates: usize,
}

/// The complete stepwise search: every pairwise product of the base
/// predictors is materialized and thrown into one stepwise selection.
/// Refuses outright when candidates would outnumber rows.
pub fn complete_stepwise_oracle(
    ds: &Dataset,
    base: &[ColumnId],
    cfg: &StepwiseConfig,
) -> Result<OracleRun> {
    let p = base.len();
    if p < 2 {
        return Err(Error::InvalidInput(
            "complete stepwise needs at least 2 base predictors".to_string(),
        ));
    }
    let products = p * (p - 1) / 2;
    let candidates = products + p;
    if candidates >= ds.n_rows {
        return Err(Error::TooManyCandidates {
            base: p,
            products,
            candidates,
            rows: ds.n_rows,
        });
    }

    let started = Instant::now();
    let full = materialize_all_products(ds, base)?;
    let mut candidate_ids: Vec<ColumnId> = base.to_vec();
    let first_product = ds.columns.len();
    candidate_ids.extend((first_product..full.columns.len()).map(ColumnId));
    let (trace, model) = stepwise(&full, &candidate_ids, cfg)?;
    let duration_secs = started.elapsed().as_secs_f64();
    Ok(OracleRun {
        trace,
        model,
        duration_secs,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    #[serde(default)]
    pub chaid: ChaidConfig,
    #[serde(default)]
    pub stepwise: StepwiseConfig,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_max_missing")]
    pub max_missing_fraction: f64,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_train_fraction() -> f64 {
    0.6
}
fn default_max_missing() -> f64 {
    0.9
}
fn default_split_seed() -> u64 {
    1
}
fn default_workers() -> usize {
    1
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            chaid: ChaidConfig::default(),
            stepwise: StepwiseConfig::default(),
            train_fraction: default_train_fraction(),
            max_missing_fraction: default_max_missing(),
            split_seed: default_split_seed(),
            workers: default_workers(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub pairs_total: usize,
    pub pairs_detected: usize,
    pub detected_terms: Vec<String>,
    /// Scan + materialization + stepwise over base and detected terms.
    pub hybrid_secs: f64,
    /// Product materialization + stepwise over base and all products.
    pub oracle_secs: f64,
    pub speedup: f64,
    pub hybrid_columns: Vec<String>,
    pub oracle_columns: Vec<String>,
    pub hybrid_valid: MetricsReport,
    pub oracle_valid: MetricsReport,
    pub workers: usize,
}

/// Times the scan-then-stepwise pipeline against the complete stepwise
/// search on the same generated data and reports both models' validation
/// metrics. Both sides run on the same worker pool.
pub fn run_benchmark(spec: &SynthSpec, cfg: &BenchConfig) -> Result<BenchReport> {
    let ds = generate(spec)?;
    let ds = drop_missing_target(&ds)?;
    let (train, valid) = stratified_split(&ds, cfg.train_fraction, cfg.split_seed)?;
    let (train, medians) = filter_and_impute(&train, cfg.max_missing_fraction)?;
    let (valid, _) = apply_imputation(&valid, &medians)?;
    let base = train.base_predictor_ids();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;

    // hybrid: scan, materialize detections, stepwise
    let hybrid_started = Instant::now();
    let (terms, scan_report) = scan_all(&train, &base, &cfg.chaid, cfg.workers)?;
    let (train_h, terms) = materialize_terms(&train, &terms)?;
    let mut hybrid_candidates = base.clone();
    hybrid_candidates.extend(terms.iter().filter_map(|t| t.derived));
    let (_, hybrid_model) = pool.install(|| stepwise(&train_h, &hybrid_candidates, &cfg.stepwise))?;
    let hybrid_secs = hybrid_started.elapsed().as_secs_f64();

    // oracle: complete stepwise over base + every product
    let oracle = pool.install(|| complete_stepwise_oracle(&train, &base, &cfg.stepwise))?;

    let (valid_h, _) = materialize_terms(&valid, &terms)?;
    let valid_o = materialize_all_products(&valid, &valid.base_predictor_ids())?;
    let hybrid_valid = report_for(&hybrid_model, &valid_h, "validation")?;
    let oracle_valid = report_for(&oracle.model, &valid_o, "validation")?;

    Ok(BenchReport {
        pairs_total: scan_report.pairs_total,
        pairs_detected: scan_report.pairs_detected,
        detected_terms: terms.iter().map(|t| t.name.clone()).collect(),
        hybrid_secs,
        oracle_secs: oracle.duration_secs,
        speedup: oracle.duration_secs / hybrid_secs,
        hybrid_columns: hybrid_model.columns.clone(),
        oracle_columns: oracle.model.columns.clone(),
        hybrid_valid,
        oracle_valid,
        workers: cfg.workers,
    })
}
