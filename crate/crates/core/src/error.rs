use std::path::PathBuf;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed file {}: {reason}", path.display())]
    Malformed { path: PathBuf, reason: String },

    #[error("empty valid-pixel set")]
    EmptySelection,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("manifest error at `{path}`: {reason}")]
    Manifest { path: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidImage(_) => "invalid_image",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::MissingFile(_) => "missing_file",
            Error::Malformed { .. } => "malformed_file",
            Error::EmptySelection => "empty_selection",
            Error::NonFinite(_) => "non_finite",
            Error::Manifest { .. } => "manifest",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
