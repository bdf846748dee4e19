use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A program references something the evaluator cannot resolve. This
    /// always indicates a bug in a variation operator or a corrupted file.
    #[error("malformed program: {0}")]
    MalformedProgram(String),

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("failed to parse program {input:?} at byte {offset}: {reason}")]
    Parse {
        input: String,
        offset: usize,
        reason: String,
    },

    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    #[error("cannot split dataset {dataset}: {reason}")]
    Split { dataset: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incomplete result grid, missing cells: {}", missing.join(", "))]
    Aggregation { missing: Vec<String> },

    #[error("run {run} of {cell} failed: {reason}")]
    RunFailed { cell: String, run: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
