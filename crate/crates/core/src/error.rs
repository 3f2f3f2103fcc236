use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected} values, got {got}")]
    InputShape { expected: usize, got: usize },

    #[error("class index {index} out of range for {classes} classes")]
    ClassIndex { index: usize, classes: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid network: {0}")]
    Validation(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("input constraints are infeasible")]
    InfeasibleInput,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unsupported perturbation range: {0}")]
    UnsupportedRange(String),

    #[error("not enough inputs to build a hyper-input: need {needed}, have {available}")]
    InsufficientInputs { needed: usize, available: usize },

    #[error("grid of {points:.3e} points exceeds the enumeration limit")]
    IntractableGrid { points: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
