use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Whether a failed backend call is worth repeating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retry {
    Retryable,
    Fatal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown catalog `{0}`")]
    CatalogNotFound(String),

    #[error("label value error: {0}")]
    LabelValue(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("no valid region after {attempts} attempt(s)")]
    NoValidRegion { attempts: u32 },

    #[error("backend error ({kind:?}): {message}")]
    Backend { kind: Retry, message: String },

    #[error("generation rejected: {0}")]
    GenerationRejected(String),

    #[error("prompt error: {0}")]
    Prompt(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("invalid score map: {0}")]
    ScoreMap(String),

    #[error("nothing to process: {0}")]
    EmptyInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("output directory {0} is not empty (use --overwrite or --resume)")]
    OutputExists(PathBuf),

    #[error("png: {0}")]
    Png(#[from] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn retryable(message: impl Into<String>) -> Self {
        Error::Backend {
            kind: Retry::Retryable,
            message: message.into(),
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Error::Backend {
            kind: Retry::Fatal,
            message: message.into(),
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::Backend {
                kind: Retry::Retryable,
                ..
            }
        )
    }
}
