use thiserror::Error;

/// Crate-wide error type.
///
/// The split between variants mirrors the CLI exit-code contract: everything
/// that means "your inputs are wrong" ([`Error::CorpusParse`],
/// [`Error::Validation`], [`Error::Config`], [`Error::Format`],
/// [`Error::Lookup`]) maps to exit code 1, while failures at run time
/// ([`Error::Numeric`], [`Error::Io`], [`Error::Json`]) map to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    /// A corpus / dataset line could not be decoded.
    #[error("parse error at line {line}: {message}")]
    CorpusParse { line: usize, message: String },

    /// Well-formed input that violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Inconsistent or unusable configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A resource file (vector table, checkpoint, ...) has the wrong shape.
    #[error("format error: {0}")]
    Format(String),

    /// A required lookup key is absent (vocabulary rows, sentence vectors).
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Training or inference produced non-finite numbers.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CorpusParse { .. }
            | Error::Validation(_)
            | Error::Config(_)
            | Error::Format(_)
            | Error::Lookup(_) => 1,
            Error::Numeric(_) | Error::Io(_) | Error::Json(_) => 2,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
