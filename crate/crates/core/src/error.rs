use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeParseError {
    #[error("expected HH:MM, got {0:?}")]
    Format(String),
    #[error("time must be finite and non-negative, got {0}")]
    OutOfRange(f64),
}

/// Errors raised by the simulation and analysis operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("case {case_id}: missing field {field}")]
    MissingField { case_id: String, field: &'static str },
    #[error("case {case_id} cannot be assigned: {reason}")]
    UnassignableCase { case_id: String, reason: String },
    #[error("no candidate rooms")]
    EmptyRoomSet,
    #[error("case id {0} collides inconsistently")]
    DuplicateCaseId(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::PreconditionFailed(_) => "PRECONDITION_FAILED",
            Error::MissingField { .. } => "MISSING_FIELD",
            Error::UnassignableCase { .. } => "UNASSIGNABLE_CASE",
            Error::EmptyRoomSet => "EMPTY_ROOM_SET",
            Error::DuplicateCaseId(_) => "DUPLICATE_CASE_ID",
            Error::InvalidOptions(_) => "INVALID_OPTIONS",
        }
    }
}

/// Errors raised while loading or persisting files.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}:{row}: column {column}: {message}", file.display())]
    Parse {
        file: PathBuf,
        row: u64,
        column: String,
        message: String,
    },
    #[error("{}:{row}: {message}", file.display())]
    Referential { file: PathBuf, row: u64, message: String },
    #[error("{}:{row}: duplicate key {key}", file.display())]
    DuplicateKey { file: PathBuf, row: u64, key: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid options: {0}")]
    Options(String),
    #[error("unsupported format {0:?}")]
    UnsupportedFormat(String),
    #[error("unsupported format version {0:?}")]
    FormatVersion(String),
    #[error("scenario failed validation with {} violation(s)", .0.len())]
    Invalid(Vec<crate::scenario::Violation>),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Parse { .. } | IngestError::Json { .. } => "PARSE_ERROR",
            IngestError::FormatVersion(_) => "PARSE_ERROR",
            IngestError::Referential { .. } => "REFERENTIAL_ERROR",
            IngestError::DuplicateKey { .. } => "DUPLICATE_KEY",
            IngestError::Io { .. } => "IO_ERROR",
            IngestError::Options(_) => "INVALID_OPTIONS",
            IngestError::UnsupportedFormat(_) => "UNSUPPORTED_FORMAT",
            IngestError::Invalid(_) => "VALIDATION_FAILED",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
