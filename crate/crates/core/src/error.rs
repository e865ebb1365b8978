use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SscfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SscfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid K={k} for {samples} samples")]
    InvalidK { k: usize, samples: usize },
    #[error("stratum {0} has no members")]
    EmptyCluster(usize),
    #[error("rank {rank} outside [1, {k}]")]
    RankOutOfRange { rank: usize, k: usize },
    #[error("label {label} outside [0, {classes})")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("state error: {0}")]
    State(String),
    #[error("unknown structure id {0}")]
    UnknownStructure(usize),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("empty confusion matrix")]
    EmptyMatrix,
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SscfError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SscfError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 1 validation, 2 I/O, 3 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            SscfError::Io { .. } => 2,
            SscfError::Format(_) | SscfError::InvariantViolation(_) => 3,
            _ => 1,
        }
    }
}
