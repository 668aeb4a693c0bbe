use std::path::PathBuf;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian: {0}")]
    Hermiticity(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("duplicate entry ({0}, {1})")]
    Duplicate(usize, usize),
    #[error("no probability mass: {0}")]
    ZeroMass(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("every singular value of the sketch was filtered out")]
    EmptySketch,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension {size} exceeds the dense oracle cap {cap}")]
    Size { size: usize, cap: usize },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
