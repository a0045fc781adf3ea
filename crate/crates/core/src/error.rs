use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("protocol {protocol} in committee {committee} has conflicting dates {first} and {second}")]
    ConflictingProtocolDate {
        committee: String,
        protocol: String,
        first: String,
        second: String,
    },

    #[error("infeasible tuple generation: {0}")]
    InfeasibleTuples(String),

    #[error("embedding file: {0}")]
    Format(String),

    #[error("non-finite embedding value in row {row} ({id})")]
    NonFinite { row: usize, id: String },

    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular system at iteration {iteration}; retry with ridge > 0")]
    Singular { iteration: usize },

    #[error(
        "IRLS diverged: deviance increased for 3 consecutive iterations \
         (iteration {iteration}, deviance {deviance:.6e}, previous {previous:.6e})"
    )]
    Diverged {
        iteration: usize,
        deviance: f64,
        previous: f64,
    },

    #[error("design matrix is rank deficient: column {column} ({name}) is linearly dependent on earlier columns")]
    RankDeficient { column: usize, name: String },

    #[error("committee {committee} has {rows} rows but needs at least {needed}")]
    TooFewRows {
        committee: String,
        rows: usize,
        needed: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
