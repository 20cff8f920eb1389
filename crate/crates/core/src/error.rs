use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("invalid JSON in {path}: {message}")]
    Json { path: PathBuf, message: String },

    #[error("column `{column}` not found in CSV header")]
    MissingColumn { column: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown issue label `{0}`")]
    UnknownIssue(String),

    #[error("party code {0} is outside 1..=7")]
    InvalidPartyCode(i64),

    #[error("no rows survive filtering ({0})")]
    EmptyResult(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("density underflow at row {row}")]
    Underflow { row: usize },

    #[error("need at least {needed} rows, have {available}")]
    Infeasible { needed: usize, available: usize },

    #[error("component {component} lost all responsibility")]
    EmptyComponent { component: usize },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("model selection failed: {0}")]
    Selection(String),

    #[error("party group {0} has no members")]
    EmptyGroup(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input files, flags or configuration as
    /// opposed to numerical failures during fitting.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv { .. }
                | Error::Json { .. }
                | Error::MissingColumn { .. }
                | Error::Schema(_)
                | Error::UnknownIssue(_)
                | Error::InvalidArgument(_)
        )
    }

    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
            Error::Json { .. } => "json",
            Error::MissingColumn { .. } => "missing_column",
            Error::Schema(_) => "schema",
            Error::UnknownIssue(_) => "unknown_issue",
            Error::InvalidPartyCode(_) => "invalid_party_code",
            Error::EmptyResult(_) => "empty_result",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidModel(_) => "invalid_model",
            Error::NonPositiveVariance(_) => "non_positive_variance",
            Error::Underflow { .. } => "underflow",
            Error::Infeasible { .. } => "infeasible",
            Error::EmptyComponent { .. } => "empty_component",
            Error::FitFailed(_) => "fit_failed",
            Error::Selection(_) => "selection",
            Error::EmptyGroup(_) => "empty_group",
            Error::Degenerate(_) => "degenerate",
            Error::Unsupported(_) => "unsupported",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }

    /// File path associated with the error, when there is one.
    pub fn path(&self) -> Option<&std::path::Path> {
        match self {
            Error::Io { path, .. } | Error::Csv { path, .. } | Error::Json { path, .. } => {
                Some(path)
            }
            _ => None,
        }
    }
}
