use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient frames: need at least 2, got {0}")]
    InsufficientFrames(usize),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("record count mismatch: header declares {declared}, file holds {actual}")]
    CountMismatch { declared: u64, actual: u64 },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported bit depth: maxval {0} (only 255 is supported)")]
    UnsupportedDepth(u32),

    #[error("invalid event stream: {0}")]
    InvalidStream(#[from] crate::event::Violation),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("encoder regime {0} requires a pretrained encoder")]
    MissingPretrained(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
