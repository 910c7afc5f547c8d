use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("invalid network: {0}")]
    Network(String),

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset too small: need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("action leaves the unit box at feature {feature} (x + z = {value})")]
    Infeasible { feature: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty buffer snapshot")]
    EmptySnapshot,

    #[error("non-finite {what} at episode {episode}, step {step}")]
    NonFinite {
        what: &'static str,
        episode: usize,
        step: usize,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}
