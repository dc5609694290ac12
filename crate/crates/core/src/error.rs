use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the fusion library.
#[derive(Debug, Error)]
pub enum FusionError {
    /// A parameter is outside its mathematical domain.
    #[error("parameter domain error: {0}")]
    Domain(String),

    /// An operation was asked of an object in an unusable state (empty samples etc).
    #[error("invalid state: {0}")]
    State(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// The graph is not connected; `vertex` is 1-based, as in edge-list files.
    #[error("graph is disconnected: vertex {vertex} is unreachable from the root")]
    Disconnected { vertex: usize },

    #[error("invalid graph: {0}")]
    Graph(String),

    /// A sampler produced a non-finite value.
    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<FusionError>,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FusionError>;

impl FusionError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FusionError::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FusionError::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips replication wrappers to find the underlying cause.
    pub fn root_cause(&self) -> &FusionError {
        match self {
            FusionError::Replication { source, .. } => source.root_cause(),
            other => other,
        }
    }
}
