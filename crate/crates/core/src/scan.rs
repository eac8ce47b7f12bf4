//! Pairwise interaction scan: one small CHAID tree per predictor pair.
//!
//! A pair counts as a detected interaction when its tree manages any split
//! at all — even a tree that only ever uses one of the two variables, since
//! a useless product is cheap to discard later in stepwise selection while a
//! missed one is gone for good. Pairs are independent read-only tasks over
//! the shared dataset, so the scan parallelizes freely; results are merged
//! in pair order, making the output independent of the worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaid::{grow_tree, ChaidConfig};
use crate::data::{make_interaction_column, ColumnId, Dataset};
use crate::error::{Error, Result};

/// A detected variable pair, ready to materialize as a product column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub i: ColumnId,
    pub j: ColumnId,
    pub name: String,
    pub tree_depth_reached: usize,
    /// Whether both variables appear in splits (false: one-variable tree).
    pub used_both: bool,
    /// Column id of the materialized product, once attached to a dataset.
    pub derived: Option<ColumnId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub i: ColumnId,
    pub j: ColumnId,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub pairs_total: usize,
    pub pairs_detected: usize,
    pub outcomes: Vec<PairOutcome>,
    /// Wall-clock seconds; excluded from serialized artifacts so repeated
    /// runs stay byte-identical.
    #[serde(skip)]
    pub duration_secs: f64,
}

/// All index pairs `i < j` in lexicographic order; `p*(p-1)/2` of them.
pub fn enumerate_pairs(p: usize) -> Result<Vec<(usize, usize)>> {
    if p < 2 {
        return Err(Error::InvalidInput(format!(
            "pair enumeration needs at least 2 predictors, got {p}"
        )));
    }
    let mut pairs = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            pairs.push((i, j));
        }
    }
    Ok(pairs)
}

/// Grows a CHAID tree offering only the two columns; a root split means the
/// pair is a potential interaction.
pub fn detect_pair(
    ds: &Dataset,
    pair: (ColumnId, ColumnId),
    cfg: &ChaidConfig,
) -> Result<Option<InteractionTerm>> {
    let (i, j) = pair;
    let tree = grow_tree(ds, &[i, j], cfg)?;
    if tree.root().is_leaf() {
        return Ok(None);
    }
    let used = tree.split_columns();
    let name_i = &ds.column(i)?.name;
    let name_j = &ds.column(j)?.name;
    Ok(Some(InteractionTerm {
        i,
        j,
        name: format!("{name_i}*{name_j}"),
        tree_depth_reached: tree.depth_reached,
        used_both: used.contains(&i) && used.contains(&j),
        derived: None,
    }))
}

/// Scans every pair of the given predictors with `parallelism` workers.
/// The term list is ordered by `(i, j)` regardless of scheduling.
pub fn scan_all(
    ds: &Dataset,
    predictors: &[ColumnId],
    cfg: &ChaidConfig,
    parallelism: usize,
) -> Result<(Vec<InteractionTerm>, ScanReport)> {
    if predictors.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "interaction scan needs at least 2 predictors, got {}",
            predictors.len()
        )));
    }
    // validate once so per-pair work cannot fail
    if ds.n_rows == 0 {
        return Err(Error::EmptyDataset("interaction scan on empty dataset".into()));
    }
    for &id in predictors {
        let col = ds.column(id)?;
        if col.missing_count > 0 {
            return Err(Error::UnexpectedMissing {
                column: col.name.clone(),
                count: col.missing_count,
            });
        }
    }
    ds.target_as_binary()?;

    let index_pairs = enumerate_pairs(predictors.len())?;
    let pairs: Vec<(ColumnId, ColumnId)> = index_pairs
        .iter()
        .map(|&(a, b)| (predictors[a], predictors[b]))
        .collect();

    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    let detections: Vec<Option<InteractionTerm>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&pair| detect_pair(ds, pair, cfg).expect("inputs validated upfront"))
            .collect()
    });
    let duration_secs = started.elapsed().as_secs_f64();

    let outcomes: Vec<PairOutcome> = pairs
        .iter()
        .zip(&detections)
        .map(|(&(i, j), det)| PairOutcome {
            i,
            j,
            detected: det.is_some(),
        })
        .collect();
    let terms: Vec<InteractionTerm> = detections.into_iter().flatten().collect();
    let report = ScanReport {
        pairs_total: pairs.len(),
        pairs_detected: terms.len(),
        outcomes,
        duration_secs,
    };
    Ok((terms, report))
}

/// Attaches product columns for the given terms to a dataset, recording the
/// materialized column ids in the returned terms. Columns are assembled in
/// one pass; appending hundreds of products one at a time would re-clone the
/// table per term.
pub fn materialize_terms(
    ds: &Dataset,
    terms: &[InteractionTerm],
) -> Result<(Dataset, Vec<InteractionTerm>)> {
    let mut columns = ds.columns.clone();
    let mut updated = Vec::with_capacity(terms.len());
    for term in terms {
        let col = make_interaction_column(ds, term.i, term.j)?;
        updated.push(InteractionTerm {
            derived: Some(ColumnId(columns.len())),
            ..term.clone()
        });
        columns.push(col);
    }
    let target_name = ds.target_column().name.clone();
    let out = Dataset::from_columns(ds.name.clone(), columns, &target_name)?;
    Ok((out, updated))
}
