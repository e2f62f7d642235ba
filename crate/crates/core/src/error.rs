use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The caller asked for something malformed (bad parameter, bad config key).
    Usage,
    /// Input data is missing, unparsable, or violates a dataset invariant.
    Data,
    /// The computation itself failed.
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("malformed csv {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),

    #[error("invalid sequence `{id}`: {message}")]
    InvalidSequence { id: String, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("quaternion at sample {index} has norm {norm}")]
    NonUnitQuaternion { index: usize, norm: f64 },

    #[error("fold {fold}: training split is missing class(es) {missing:?}")]
    FoldMissingClass { fold: usize, missing: Vec<String> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => ErrorKind::Usage,
            Error::Io { .. }
            | Error::Row { .. }
            | Error::Csv { .. }
            | Error::UnknownLabel(_)
            | Error::Taxonomy(_)
            | Error::InvalidSequence { .. }
            | Error::InvalidDataset(_)
            | Error::NonUnitQuaternion { .. }
            | Error::Serde(_) => ErrorKind::Data,
            Error::Shape(_)
            | Error::FoldMissingClass { .. }
            | Error::Numerical(_) => ErrorKind::Runtime,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
