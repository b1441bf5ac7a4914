use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GadError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GadError {
    #[error("edge {index}: {reason}")]
    InvalidEdge { index: usize, reason: String },

    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("degenerate label distribution: {0}")]
    DegenerateLabels(String),

    #[error("{0}")]
    InsufficientLabels(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("repeat {index}: {source}")]
    Repeat {
        index: usize,
        #[source]
        source: Box<GadError>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl GadError {
    /// Stable machine-readable error code.
    pub fn kind(&self) -> &'static str {
        match self {
            GadError::InvalidEdge { .. } => "invalid_edge",
            GadError::Parse { .. } => "parse",
            GadError::Io { .. } => "io",
            GadError::Dimension(_) => "dimension_mismatch",
            GadError::InvalidValue(_) => "invalid_value",
            GadError::DegenerateLabels(_) => "degenerate_labels",
            GadError::InsufficientLabels(_) => "insufficient_labels",
            GadError::InvalidParameter(_) => "invalid_parameter",
            GadError::UnknownFamily(_) => "unknown_family",
            GadError::Diverged(_) => "diverged",
            GadError::Repeat { source, .. } => source.kind(),
            GadError::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GadError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        GadError::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
