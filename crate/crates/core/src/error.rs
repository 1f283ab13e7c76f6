use std::path::PathBuf;

use thiserror::Error;

use crate::model::Role;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: reference points have {reference} coordinates, test points have {test}")]
    DimensionMismatch { reference: usize, test: usize },

    #[error("{role} dataset: point {id} has a non-finite coordinate at position {coordinate}")]
    NonFiniteInput {
        role: Role,
        id: usize,
        coordinate: usize,
    },

    #[error("{role} dataset: {message}")]
    MalformedDataset { role: Role, message: String },

    #[error("{role} dataset is empty")]
    EmptyDataset { role: Role },

    #[error("k_max = {k_max} requires more than {k_max} candidate neighbours, only {available} available")]
    KMaxTooLarge { k_max: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error(
        "no achievable threshold reaches extremeness {p_ext:e}: the most extreme score {max_threshold:.4} \
         is still reached with probability {min_probability:e}"
    )]
    UnreachableExtremeness {
        p_ext: f64,
        max_threshold: f64,
        min_probability: f64,
    },

    #[error("two-sample test needs two non-empty samples")]
    EmptySample,

    #[error("background normalisation is zero (reference size equals its pruned count)")]
    DivisionByZero,

    #[error("purity is undefined for an empty anomaly set")]
    ZeroAnomaly,

    #[error("significance is undefined for a zero background estimate")]
    ZeroBackground,

    #[error("clustering needs at least one point")]
    EmptyInput,

    #[error("density equalisation exceeded {limit} iterations")]
    NonTermination { limit: usize },

    #[error("input validation failed: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Error>),

    #[error("scenario error: {0}")]
    Spec(String),

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("report format error: {0}")]
    Report(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnreachableExtremeness { .. } => 3,
            Error::Validation(inner) if inner.iter().any(|e| e.exit_code() == 3) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
