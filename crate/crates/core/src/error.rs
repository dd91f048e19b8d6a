use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MilError>;

#[derive(Debug, Error)]
pub enum MilError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("empty bag: {0} needs at least one instance")]
    EmptyBag(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("backward root must be a 1x1 scalar, got {0:?}")]
    NonScalarRoot((usize, usize)),

    #[error("invalid model configuration: {0}")]
    InvalidModel(String),

    #[error("IDX format error: {0}")]
    IdxFormat(String),

    #[error("IDX length error: header declares {expected} payload bytes, found {found}")]
    IdxLength { expected: usize, found: usize },

    #[error("insufficient {pool} pool: need {needed}, have {available}")]
    InsufficientPool {
        pool: String,
        needed: usize,
        available: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: ragged row with {found} columns, expected {expected}")]
    RaggedWidth {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch} on bag {bag_id}: loss = {loss}")]
    Divergence {
        epoch: usize,
        bag_id: String,
        loss: f64,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("no attention weights: {0}")]
    NoAttention(String),
}

impl MilError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MilError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        MilError::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 3 for numerical failure, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            MilError::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
