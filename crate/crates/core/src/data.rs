//! Column-oriented tabular data: numeric predictors with explicit missing
//! cells, a binary target, CSV ingestion, and derived product columns.
//!
//! A [`Dataset`] is immutable after construction; operations that change the
//! table return a new value. Column ids are positional within their dataset,
//! so anything that must survive schema changes (model coefficients,
//! recorded medians) is keyed by column *name* instead.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positional identifier of a column within one `Dataset`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ColumnId(pub usize);

impl std::fmt::Display for ColumnId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    /// Row-wise product of two parent columns.
    DerivedInteraction { parents: (ColumnId, ColumnId) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub id: ColumnId,
    pub name: String,
    pub kind: ColumnKind,
    /// `None` marks a missing cell.
    pub values: Vec<Option<f64>>,
    pub missing_count: usize,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        let missing_count = values.iter().filter(|v| v.is_none()).count();
        Column {
            id: ColumnId(0),
            name: name.into(),
            kind: ColumnKind::Numeric,
            values,
            missing_count,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.missing_count as f64 / self.values.len() as f64
        }
    }

    /// Present values only, in row order.
    pub fn present(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    /// Dense values; fails if any cell is missing.
    pub fn dense(&self) -> Result<Vec<f64>> {
        if self.missing_count > 0 {
            return Err(Error::UnexpectedMissing {
                column: self.name.clone(),
                count: self.missing_count,
            });
        }
        Ok(self.values.iter().map(|v| v.unwrap()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub n_rows: usize,
    pub columns: Vec<Column>,
    pub target: ColumnId,
}

impl Dataset {
    /// Assembles a dataset from columns, checking the shape invariants:
    /// equal lengths, unique names, and a valid target reference.
    pub fn from_columns(
        name: impl Into<String>,
        mut columns: Vec<Column>,
        target_name: &str,
    ) -> Result<Self> {
        let name = name.into();
        let n_rows = columns.first().map(|c| c.len()).unwrap_or(0);
        let mut seen = HashSet::new();
        let mut target = None;
        for (idx, col) in columns.iter_mut().enumerate() {
            if col.len() != n_rows {
                return Err(Error::InvalidInput(format!(
                    "column {:?} has {} rows, expected {}",
                    col.name,
                    col.len(),
                    n_rows
                )));
            }
            if !seen.insert(col.name.clone()) {
                return Err(Error::DuplicateColumn(col.name.clone()));
            }
            col.id = ColumnId(idx);
            if col.name == target_name {
                target = Some(ColumnId(idx));
            }
        }
        let target = target.ok_or_else(|| Error::TargetNotFound(target_name.to_string()))?;
        Ok(Dataset {
            name,
            n_rows,
            columns,
            target,
        })
    }

    pub fn column(&self, id: ColumnId) -> Result<&Column> {
        self.columns.get(id.0).ok_or(Error::UnknownColumn(id.0))
    }

    pub fn column_by_name(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::ColumnNotFound(name.to_string()))
    }

    pub fn target_column(&self) -> &Column {
        &self.columns[self.target.0]
    }

    /// All non-target columns, in order.
    pub fn predictor_ids(&self) -> Vec<ColumnId> {
        self.columns
            .iter()
            .filter(|c| c.id != self.target)
            .map(|c| c.id)
            .collect()
    }

    /// Non-target columns of kind `Numeric` (excludes derived products).
    pub fn base_predictor_ids(&self) -> Vec<ColumnId> {
        self.columns
            .iter()
            .filter(|c| c.id != self.target && matches!(c.kind, ColumnKind::Numeric))
            .map(|c| c.id)
            .collect()
    }

    /// Target as 0/1 bytes; fails on missing or non-binary cells.
    pub fn target_as_binary(&self) -> Result<Vec<u8>> {
        let col = self.target_column();
        let mut out = Vec::with_capacity(self.n_rows);
        for (row, v) in col.values.iter().enumerate() {
            match v {
                Some(x) if *x == 0.0 => out.push(0),
                Some(x) if *x == 1.0 => out.push(1),
                Some(x) => return Err(Error::NonBinaryTarget { row, value: *x }),
                None => {
                    return Err(Error::UnexpectedMissing {
                        column: col.name.clone(),
                        count: col.missing_count,
                    })
                }
            }
        }
        Ok(out)
    }

    /// New dataset with `col` appended; the column receives the next id.
    pub fn with_column(&self, mut col: Column) -> Result<Dataset> {
        if col.len() != self.n_rows {
            return Err(Error::InvalidInput(format!(
                "column {:?} has {} rows, expected {}",
                col.name,
                col.len(),
                self.n_rows
            )));
        }
        if self.columns.iter().any(|c| c.name == col.name) {
            return Err(Error::DuplicateColumn(col.name));
        }
        let mut columns = self.columns.clone();
        col.id = ColumnId(columns.len());
        columns.push(col);
        Ok(Dataset {
            name: self.name.clone(),
            n_rows: self.n_rows,
            columns,
            target: self.target,
        })
    }

    /// New dataset restricted to `rows` (kept in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let values: Vec<Option<f64>> = rows.iter().map(|&r| c.values[r]).collect();
                let missing_count = values.iter().filter(|v| v.is_none()).count();
                Column {
                    id: c.id,
                    name: c.name.clone(),
                    kind: c.kind.clone(),
                    values,
                    missing_count,
                }
            })
            .collect();
        Dataset {
            name: self.name.clone(),
            n_rows: rows.len(),
            columns,
            target: self.target,
        }
    }

    /// New dataset keeping only the columns in `keep` (original order),
    /// re-assigning positional ids. The target is always kept.
    pub fn select_columns(&self, keep: &HashSet<ColumnId>) -> Dataset {
        let mut columns: Vec<Column> = self
            .columns
            .iter()
            .filter(|c| c.id == self.target || keep.contains(&c.id))
            .cloned()
            .collect();
        let target_name = self.target_column().name.clone();
        let mut target = ColumnId(0);
        for (idx, col) in columns.iter_mut().enumerate() {
            col.id = ColumnId(idx);
            if col.name == target_name {
                target = ColumnId(idx);
            }
        }
        Dataset {
            name: self.name.clone(),
            n_rows: self.n_rows,
            columns,
            target,
        }
    }
}

/// Classification outcome counts at a fixed cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }
}

/// Reads a CSV file: UTF-8, comma-separated, first row is the header, an
/// empty cell is a missing value. Every non-empty cell must parse as a
/// decimal number; text columns are rejected with the offending row/column.
pub fn load_csv(path: impl AsRef<Path>, target_name: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);

    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.display().to_string(),
            source,
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut values: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: path.display().to_string(),
            source,
        })?;
        for (col_idx, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                values[col_idx].push(None);
            } else {
                let parsed: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                    row: row_idx + 1,
                    column: headers[col_idx].clone(),
                    value: cell.to_string(),
                })?;
                if !parsed.is_finite() {
                    return Err(Error::NonNumericCell {
                        row: row_idx + 1,
                        column: headers[col_idx].clone(),
                        value: cell.to_string(),
                    });
                }
                values[col_idx].push(Some(parsed));
            }
        }
    }

    let columns: Vec<Column> = headers
        .into_iter()
        .zip(values)
        .map(|(name, vals)| Column::new(name, vals))
        .collect();

    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let ds = Dataset::from_columns(stem, columns, target_name)?;

    // Target cells may be missing at this point but must be 0/1 when present.
    let target = ds.target_column();
    for (row, v) in target.values.iter().enumerate() {
        if let Some(x) = v {
            if *x != 0.0 && *x != 1.0 {
                return Err(Error::NonBinaryTarget { row, value: *x });
            }
        }
    }
    Ok(ds)
}

/// Writes a dataset back to CSV in the ingestion format (missing cells as
/// empty strings). `load_csv(write_csv(ds))` reproduces `ds` value-for-value.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    let header: Vec<&str> = ds.columns.iter().map(|c| c.name.as_str()).collect();
    writer.write_record(&header).map_err(|source| Error::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let mut record: Vec<String> = Vec::with_capacity(ds.columns.len());
    for row in 0..ds.n_rows {
        record.clear();
        for col in &ds.columns {
            match col.values[row] {
                Some(v) => record.push(format!("{v}")),
                None => record.push(String::new()),
            }
        }
        writer.write_record(&record).map_err(|source| Error::Csv {
            path: path.display().to_string(),
            source,
        })?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// Derived product column for the pair `(i, j)`: named `"<i>*<j>"`, missing
/// wherever either parent is missing. The column is not attached to the
/// dataset; pass it to [`Dataset::with_column`].
pub fn make_interaction_column(ds: &Dataset, i: ColumnId, j: ColumnId) -> Result<Column> {
    if i == j {
        return Err(Error::SelfInteraction(i.0));
    }
    let a = ds.column(i)?;
    let b = ds.column(j)?;
    let values: Vec<Option<f64>> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Some(x * y),
            _ => None,
        })
        .collect();
    let missing_count = values.iter().filter(|v| v.is_none()).count();
    Ok(Column {
        id: ColumnId(0),
        name: format!("{}*{}", a.name, b.name),
        kind: ColumnKind::DerivedInteraction { parents: (i, j) },
        values,
        missing_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_csv_counts_missing_cells() {
        let f = write_tmp("a,b,RESP_FLAG\n,2.0,1\n3.5,4.0,0\n5.0,6.0,1\n");
        let ds = load_csv(f.path(), "RESP_FLAG").unwrap();
        assert_eq!(ds.n_rows, 3);
        assert_eq!(ds.column_by_name("a").unwrap().missing_count, 1);
        assert_eq!(ds.column_by_name("b").unwrap().missing_count, 0);
        assert_eq!(ds.target, ColumnId(2));
    }

    #[test]
    fn load_csv_rejects_non_binary_target() {
        let f = write_tmp("a,RESP_FLAG\n1.0,2\n");
        let err = load_csv(f.path(), "RESP_FLAG").unwrap_err();
        assert!(matches!(err, Error::NonBinaryTarget { value, .. } if value == 2.0));
    }

    #[test]
    fn load_csv_rejects_text_cells_with_location() {
        let f = write_tmp("a,RESP_FLAG\n1.0,1\nhello,0\n");
        let err = load_csv(f.path(), "RESP_FLAG").unwrap_err();
        match err {
            Error::NonNumericCell { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
                assert_eq!(value, "hello");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_csv_rejects_missing_target_column() {
        let f = write_tmp("a,b\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), "RESP_FLAG").unwrap_err(),
            Error::TargetNotFound(_)
        ));
    }

    #[test]
    fn load_csv_rejects_duplicate_columns() {
        let f = write_tmp("a,a,RESP_FLAG\n1,2,1\n");
        assert!(matches!(
            load_csv(f.path(), "RESP_FLAG").unwrap_err(),
            Error::DuplicateColumn(_)
        ));
    }

    #[test]
    fn interaction_column_is_rowwise_product() {
        let cols = vec![
            Column::new("a", vec![Some(1.0), Some(2.0), Some(3.0)]),
            Column::new("b", vec![Some(4.0), Some(5.0), Some(6.0)]),
            Column::new("y", vec![Some(0.0), Some(1.0), Some(1.0)]),
        ];
        let ds = Dataset::from_columns("t", cols, "y").unwrap();
        let col = make_interaction_column(&ds, ColumnId(0), ColumnId(1)).unwrap();
        assert_eq!(col.name, "a*b");
        assert_eq!(col.values, vec![Some(4.0), Some(10.0), Some(18.0)]);
        assert!(matches!(
            col.kind,
            ColumnKind::DerivedInteraction { parents: (ColumnId(0), ColumnId(1)) }
        ));
    }

    #[test]
    fn interaction_column_propagates_missing() {
        let cols = vec![
            Column::new("a", vec![Some(1.0), Some(2.0), None]),
            Column::new("b", vec![Some(4.0), None, Some(6.0)]),
            Column::new("y", vec![Some(0.0), Some(1.0), Some(1.0)]),
        ];
        let ds = Dataset::from_columns("t", cols, "y").unwrap();
        let col = make_interaction_column(&ds, ColumnId(0), ColumnId(1)).unwrap();
        assert_eq!(col.values, vec![Some(4.0), None, None]);
        assert_eq!(col.missing_count, 2);
    }

    #[test]
    fn interaction_with_ones_is_identity() {
        let cols = vec![
            Column::new("x", vec![Some(1.5), Some(-2.0), Some(0.0)]),
            Column::new("ones", vec![Some(1.0), Some(1.0), Some(1.0)]),
            Column::new("y", vec![Some(0.0), Some(1.0), Some(1.0)]),
        ];
        let ds = Dataset::from_columns("t", cols, "y").unwrap();
        let col = make_interaction_column(&ds, ColumnId(0), ColumnId(1)).unwrap();
        let x: Vec<Option<f64>> = ds.column(ColumnId(0)).unwrap().values.clone();
        assert_eq!(col.values, x);
    }

    #[test]
    fn self_interaction_is_rejected() {
        let cols = vec![
            Column::new("a", vec![Some(1.0)]),
            Column::new("y", vec![Some(1.0)]),
        ];
        let ds = Dataset::from_columns("t", cols, "y").unwrap();
        assert!(matches!(
            make_interaction_column(&ds, ColumnId(0), ColumnId(0)),
            Err(Error::SelfInteraction(0))
        ));
    }
}
