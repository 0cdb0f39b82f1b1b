use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at row {row}, column {column}: cannot read {cell:?} as a number")]
    Parse {
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("responses are required for {0}")]
    MissingResponses(&'static str),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("empty neighborhood: no observation has positive kernel weight")]
    EmptyNeighborhood,

    #[error("degenerate empirical CDF: {0}")]
    DegenerateCdf(String),

    #[error("zero variance estimate: the confidence band degenerates to a point")]
    ZeroVariance,

    #[error("divergent constant: {0}")]
    Divergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("snapshot version mismatch: expected {expected}, found {found}")]
    SnapshotVersion { expected: String, found: String },

    #[error("snapshot integrity check failed: {0}")]
    Integrity(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable identifier, used by the CLI on stderr.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::Format(_) => "E_FORMAT",
            Error::Parse { .. } => "E_PARSE",
            Error::Dimension(_) => "E_DIMENSION",
            Error::Rank(_) => "E_RANK",
            Error::MissingResponses(_) => "E_MISSING_RESPONSES",
            Error::EmptyDataset => "E_EMPTY_DATASET",
            Error::EmptyNeighborhood => "E_EMPTY_NEIGHBORHOOD",
            Error::DegenerateCdf(_) => "E_DEGENERATE_CDF",
            Error::ZeroVariance => "E_ZERO_VARIANCE",
            Error::Divergence(_) => "E_DIVERGENCE",
            Error::InvalidArgument(_) => "E_INVALID_ARGUMENT",
            Error::SnapshotVersion { .. } => "E_SNAPSHOT_VERSION",
            Error::Integrity(_) => "E_INTEGRITY",
            Error::Serde(_) => "E_SERDE",
            Error::Csv(_) => "E_CSV",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
