use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature index {index} out of range for {features} features")]
    FeatureOutOfRange { index: usize, features: usize },

    #[error("classification data contains a single class")]
    SingleClass,

    #[error("too many features for exact enumeration: {0} (limit {limit})", limit = crate::attribution::EXACT_FEATURE_LIMIT)]
    TooManyFeatures(usize),

    #[error("invalid correction: {0}")]
    InvalidCorrection(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} in column `{column}` at line {line}")]
    NonNumeric {
        column: String,
        line: u64,
        value: String,
    },

    #[error("no rows left after dropping {dropped} rows with missing values")]
    EmptyAfterDrop { dropped: usize },

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category used in CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::FeatureOutOfRange { .. } => "feature_out_of_range",
            Error::SingleClass => "single_class",
            Error::TooManyFeatures(_) => "too_many_features",
            Error::InvalidCorrection(_) => "invalid_correction",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::MissingFile(_) => "missing_file",
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumeric { .. } => "non_numeric",
            Error::EmptyAfterDrop { .. } => "empty_dataset",
            Error::EmptySplit(_) => "empty_split",
            Error::Config(_) => "config",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}
