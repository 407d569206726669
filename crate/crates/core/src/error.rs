use std::path::PathBuf;

use chrono::NaiveDate;
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

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("row {row}: {message}")]
    MalformedRow { row: u64, message: String },

    #[error("row {row}: price {price} is not positive")]
    NonPositivePrice { row: u64, price: f64 },

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("date {0} is not an observation date of the series")]
    BoundaryNotFound(NaiveDate),

    #[error("split leaves no out-of-sample observations")]
    EmptyOutOfSample,

    #[error("window of {k} steps from origin {origin} exceeds series length {len}")]
    WindowOutOfBounds { origin: usize, k: usize, len: usize },

    #[error("horizon {k} exceeds out-of-sample length {available}")]
    HorizonTooLong { k: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {0} outside the open interval (0, 1)")]
    InvalidProbability(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("overflow at step {step}")]
    Overflow { step: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("empty table")]
    EmptyTable,

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("row counts differ across models: {0:?}")]
    MismatchedRows(Vec<usize>),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Format(String),
}
