//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("non-numeric cell {value:?} at row {row}, column {column}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-binary target: value {value} at row {row} (expected 0 or 1)")]
    NonBinaryTarget { row: usize, value: f64 },

    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),

    #[error("target column {0:?} not found in header")]
    TargetNotFound(String),

    #[error("unknown column id {0}")]
    UnknownColumn(usize),

    #[error("column {0:?} not found")]
    ColumnNotFound(String),

    #[error("interaction requires two distinct columns, got {0} twice")]
    SelfInteraction(usize),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("target class {class} has {count} rows; at least 2 are required to split")]
    TinyClass { class: u8, count: usize },

    #[error("missing values in column {column:?} ({count} cells); impute before this step")]
    UnexpectedMissing { column: String, count: usize },

    #[error("all predictors removed: {0}")]
    NoPredictors(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "singular design matrix (condition estimate {condition:.3e}); \
         collinear columns: {columns:?}"
    )]
    SingularDesign { condition: f64, columns: Vec<String> },

    #[error(
        "insufficient rows for complete stepwise search: {candidates} candidate \
         predictors ({base} base + {products} pairwise products) >= {rows} rows; \
         the design would be wider than it is tall"
    )]
    TooManyCandidates {
        base: usize,
        products: usize,
        candidates: usize,
        rows: usize,
    },

    #[error("{0}")]
    Metrics(String),
}
