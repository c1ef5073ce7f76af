use std::path::PathBuf;

/// Errors produced by the simulation, reconstruction and I/O routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes {0:?}, expected \"MRT1\"")]
    BadMagic([u8; 4]),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("truncated tensor file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("tensor file has {0} trailing bytes after the payload")]
    TrailingBytes(usize),
    #[error("tensor shape must have at least one dimension")]
    EmptyShape,
    #[error("non-finite value at element {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image codec error on {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("malformed manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("pair {id} failed")]
    Pair {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
