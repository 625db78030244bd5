use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not decomposable")]
    NotDecomposable,

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPd { index: usize, pivot: f64 },

    #[error("enumeration over {0} vertices is too large (at most 6 supported)")]
    TooLarge(usize),

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("no (h, c) in [0, 20] x [0, 1] attains the requested moments: {0}")]
    Unattainable(String),

    #[error("scored graph list is empty")]
    EmptyList,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("data matrix must be column-centered before scoring")]
    NotCentered,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("no complete rows remain after discarding rows with missing values")]
    EmptyAfterFiltering,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
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
