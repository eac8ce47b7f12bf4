//! Data preparation: target cleaning, stratified train/validation split,
//! missing-percentage filtering, and median imputation with train-to-
//! validation carryover.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnId, Dataset};
use crate::error::{Error, Result};

/// Per-column medians computed on the training split, keyed by column name
/// so they replay onto any dataset with the same schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianMap {
    pub medians: BTreeMap<String, f64>,
    /// Missing-fraction threshold the columns survived.
    pub max_missing_fraction: f64,
}

/// Removes rows whose target is missing; predictors are untouched.
pub fn drop_missing_target(ds: &Dataset) -> Result<Dataset> {
    let target = ds.target_column();
    let rows: Vec<usize> = (0..ds.n_rows)
        .filter(|&r| target.values[r].is_some())
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyDataset(
            "every row has a missing target".to_string(),
        ));
    }
    if rows.len() == ds.n_rows {
        return Ok(ds.clone());
    }
    Ok(ds.select_rows(&rows))
}

/// Stratified split: within each target class, `round(train_fraction *
/// class_size)` rows go to the training set. The same seed always yields the
/// same partition; row order within each side follows the original dataset.
pub fn stratified_split(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let y = ds.target_as_binary()?;
    let mut class_rows: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (row, &cls) in y.iter().enumerate() {
        class_rows[cls as usize].push(row);
    }
    for (cls, rows) in class_rows.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::TinyClass {
                class: cls as u8,
                count: rows.len(),
            });
        }
    }

    let mut train_rows: Vec<usize> = Vec::new();
    let mut valid_rows: Vec<usize> = Vec::new();
    for (cls, rows) in class_rows.iter().enumerate() {
        let mut shuffled = rows.clone();
        // one substream per class keeps the partition stable if the other
        // class changes size
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(cls as u64);
        shuffled.shuffle(&mut rng);
        let n_train = (train_fraction * rows.len() as f64 + 0.5).floor() as usize;
        train_rows.extend_from_slice(&shuffled[..n_train]);
        valid_rows.extend_from_slice(&shuffled[n_train..]);
    }
    train_rows.sort_unstable();
    valid_rows.sort_unstable();

    let mut train = ds.select_rows(&train_rows);
    let mut valid = ds.select_rows(&valid_rows);
    train.name = format!("{}:train", ds.name);
    valid.name = format!("{}:valid", ds.name);
    Ok((train, valid))
}

/// Median of a non-empty slice: the middle order statistic, or the mean of
/// the two middle order statistics for an even count.
fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Drops predictor columns with a missing fraction above
/// `max_missing_fraction`, then fills the remaining gaps with each column's
/// own median. Returns the imputed training set and the recorded medians.
pub fn filter_and_impute(
    train: &Dataset,
    max_missing_fraction: f64,
) -> Result<(Dataset, MedianMap)> {
    if !(max_missing_fraction > 0.0 && max_missing_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "max_missing_fraction must be in (0,1], got {max_missing_fraction}"
        )));
    }
    let mut keep: HashSet<ColumnId> = HashSet::new();
    for &id in &ds_predictors(train) {
        let col = train.column(id)?;
        // an all-missing column has no median; drop it regardless
        if col.missing_fraction() <= max_missing_fraction && col.missing_count < col.len() {
            keep.insert(id);
        }
    }
    if keep.is_empty() {
        return Err(Error::NoPredictors(format!(
            "every predictor exceeds the {max_missing_fraction} missing-fraction threshold"
        )));
    }

    let mut out = train.select_columns(&keep);
    let mut medians = BTreeMap::new();
    let target = out.target;
    for col in out.columns.iter_mut() {
        if col.id == target {
            continue;
        }
        let mut present: Vec<f64> = col.values.iter().filter_map(|v| *v).collect();
        let med = median_of(&mut present);
        medians.insert(col.name.clone(), med);
        if col.missing_count > 0 {
            for v in col.values.iter_mut() {
                if v.is_none() {
                    *v = Some(med);
                }
            }
            col.missing_count = 0;
        }
    }
    Ok((
        out,
        MedianMap {
            medians,
            max_missing_fraction,
        },
    ))
}

/// Applies training-set medians to another split: restricts it to the
/// recorded columns (plus the target) and fills missing cells with the
/// *training* medians. Returns the names of dropped columns.
pub fn apply_imputation(valid: &Dataset, medians: &MedianMap) -> Result<(Dataset, Vec<String>)> {
    let mut keep = HashSet::new();
    let mut dropped = Vec::new();
    for &id in &ds_predictors(valid) {
        let col = valid.column(id)?;
        if medians.medians.contains_key(&col.name) {
            keep.insert(id);
        } else {
            dropped.push(col.name.clone());
        }
    }
    for name in medians.medians.keys() {
        if valid.column_by_name(name).is_err() {
            return Err(Error::ColumnNotFound(name.clone()));
        }
    }

    let mut out = valid.select_columns(&keep);
    let target = out.target;
    for col in out.columns.iter_mut() {
        if col.id == target || col.missing_count == 0 {
            continue;
        }
        let med = medians.medians[&col.name];
        for v in col.values.iter_mut() {
            if v.is_none() {
                *v = Some(med);
            }
        }
        col.missing_count = 0;
    }
    Ok((out, dropped))
}

fn ds_predictors(ds: &Dataset) -> Vec<ColumnId> {
    ds.predictor_ids()
}
