use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the embedding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required file {0}")]
    MissingFile(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file} line {line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("node index {index} out of range (graph has {num_nodes} nodes)")]
    NodeIndexOutOfRange { index: usize, num_nodes: usize },

    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),

    #[error("category {value} out of range for {categories} categories")]
    CategoryOutOfRange { value: usize, categories: usize },

    #[error("degree {degree} exceeds one-hot width bound {max_degree}")]
    DegreeOutOfRange { degree: usize, max_degree: usize },

    #[error("negative edge weight {0}")]
    NegativeWeight(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("embeddings are bound to different references")]
    ReferenceMismatch,

    #[error("solver did not converge after {0} iterations")]
    NotConverged(usize),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
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
