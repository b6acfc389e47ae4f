use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{token}` as a number")]
    BadNumber {
        row: usize,
        column: String,
        token: String,
    },

    #[error("row {row}: label token `{token}` is not one of -1, 1, +1, 0")]
    BadLabel { row: usize, token: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("no instances")]
    NoInstances,

    #[error("non-finite feature value at instance {row}, feature {column}")]
    NonFinite { row: usize, column: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need at least {needed} instances, found {found}")]
    TooFewInstances { needed: usize, found: usize },

    #[error("dataset contains a single class")]
    SingleClass,

    #[error("index ({row}, {col}) out of bounds for {rows}x{cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid matrix shape {rows}x{cols}: need at least 2 rows and 1 column")]
    InvalidShape { rows: usize, cols: usize },

    #[error("L must be odd and at least 3, got {0}")]
    InvalidEnsembleSize(usize),

    #[error("could not obtain a split with both classes in each part after {0} attempts")]
    ClassCoverage(usize),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("running energy drifted from full recompute by {drift:e} at iteration {iteration}")]
    EnergyDrift { iteration: u64, drift: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("ragged vote profiles: expected {expected} outputs, found {found}")]
    RaggedProfiles { expected: usize, found: usize },

    #[error("score tables disagree: {0}")]
    KeyMismatch(String),

    #[error("friedman test needs at least 3 methods, got {0}")]
    TooFewMethods(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported document: {0}")]
    UnsupportedDocument(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
