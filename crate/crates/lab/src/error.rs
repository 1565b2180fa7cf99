use std::path::PathBuf;

/// Failures that abort a run before a verdict is reached.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Core(#[from] mlsi_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed operator file: {0}")]
    Format(String),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration and dimension errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(e) if !is_configuration(e) => 1,
            _ => 2,
        }
    }
}

/// Core errors caused by the requested setup rather than by a failing check.
pub fn is_configuration(e: &mlsi_core::Error) -> bool {
    use mlsi_core::Error::*;
    matches!(
        e,
        InvalidParameter(_)
            | DimensionCap { .. }
            | SiteOutOfRange { .. }
            | EmptyRegion
            | Overlap
            | NotInSupport
            | DimensionMismatch(..)
            | NotHermitian(_)
            | NonCommuting(_)
            | OverlappingBoundaries
            | NegativeTime(_)
    )
}
