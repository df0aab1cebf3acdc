use std::path::PathBuf;

/// Errors produced by the measurement and comparison pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported or malformed format: {0}")]
    Format(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("template does not fit: {0}")]
    NoFit(String),
    #[error("document has no measurable content")]
    EmptyDocument,
    #[error("documents share no measures and cannot be compared")]
    Incomparable,
    #[error("threshold calibration failed: {0}")]
    Calibration(String),
    #[error("scale normalization failed: {0}")]
    Normalization(String),
    #[error("synthetic page layout: {0}")]
    Layout(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used for exit codes and HTTP status classes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Format(_) | Error::Validation(_) => ErrorKind::Validation,
            Error::Incomparable => ErrorKind::Validation,
            Error::Degenerate(_)
            | Error::NoFit(_)
            | Error::EmptyDocument
            | Error::Calibration(_)
            | Error::Normalization(_)
            | Error::Layout(_) => ErrorKind::Analysis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Validation,
    Analysis,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
