use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset: {0}")]
    Dataset(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid link ({0}, {1}): {2}")]
    InvalidLink(usize, usize, String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("undefined quantity: {0}")]
    Undefined(String),
    #[error("not enough candidates: needed {needed}, found {found}")]
    InsufficientCandidates { needed: usize, found: usize },
    #[error("enumeration too large: {0} subsets exceeds the bound")]
    TooLarge(u128),
    #[error("model file: {0}")]
    Model(String),
    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category used in CLI error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Dataset(_) => "dataset",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::InvalidLink(..) => "invalid_link",
            Error::InvalidSplit(_) => "invalid_split",
            Error::Dimension(_) => "dimension",
            Error::Divergence { .. } => "divergence",
            Error::Config(_) => "config",
            Error::Undefined(_) => "undefined",
            Error::InsufficientCandidates { .. } => "insufficient_candidates",
            Error::TooLarge(_) => "too_large",
            Error::Model(_) => "model",
            Error::Serde(_) => "serde",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
