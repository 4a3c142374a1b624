use std::path::PathBuf;

use posrec_core::plan::Diagnostic;

pub type Result<T, E = PosrecError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum PosrecError {
    #[error(transparent)]
    Core(#[from] posrec_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("unknown op `{op}` at {path}")]
    UnknownOp { op: String, path: String },
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("{0}")]
    Usage(String),
}

impl PosrecError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PosrecError::Io { path: path.into(), source }
    }

    /// Validation diagnostics, when this error carries them.
    pub fn diagnostics(&self) -> Option<&[Diagnostic]> {
        match self {
            PosrecError::Core(posrec_core::Error::InvalidPlan(d)) => Some(d),
            _ => None,
        }
    }
}
