use scriptoria::{Error, ErrorKind};

/// Errors surfaced by the CLI and the HTTP service.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0} not found")]
    NotFound(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    /// Process exit status: 2 I/O, 3 validation, 4 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) => match e.kind() {
                ErrorKind::Io => 2,
                ErrorKind::Validation => 3,
                ErrorKind::Analysis => 4,
            },
            AppError::NotFound(_) => 2,
            AppError::BadRequest(_) => 3,
            AppError::Internal(_) => 4,
        }
    }

    /// Stable machine-readable code for API clients.
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Core(e) => match e {
                Error::Io { .. } => "io_error",
                Error::Format(_) => "invalid_format",
                Error::Validation(_) => "validation_error",
                Error::Degenerate(_) => "degenerate_input",
                Error::NoFit(_) => "template_does_not_fit",
                Error::EmptyDocument => "empty_document",
                Error::Incomparable => "incomparable_documents",
                Error::Calibration(_) => "calibration_failed",
                Error::Normalization(_) => "normalization_failed",
                Error::Layout(_) => "layout_error",
            },
            AppError::NotFound(_) => "not_found",
            AppError::BadRequest(_) => "validation_error",
            AppError::Internal(_) => "internal_error",
        }
    }

    /// HTTP status: 4xx for anything caused by the request or its data, 5xx otherwise.
    pub fn status(&self) -> u16 {
        match self {
            AppError::Core(e) => match e.kind() {
                ErrorKind::Io => 500,
                ErrorKind::Validation if matches!(e, Error::Incomparable) => 422,
                ErrorKind::Validation => 400,
                ErrorKind::Analysis => 422,
            },
            AppError::NotFound(_) => 404,
            AppError::BadRequest(_) => 400,
            AppError::Internal(_) => 500,
        }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::BadRequest(e.to_string())
    }
}
