use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("batch of size {size} is too small (need at least 2)")]
    InsufficientBatch { size: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("objective diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("skeleton has {edges} edges, more than the enumeration limit of {limit}; orient edges one at a time with the bivariate tool instead")]
    TooLarge { edges: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
