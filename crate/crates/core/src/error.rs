use std::path::PathBuf;

use crate::dist::Distribution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution or function parameter lies outside its domain.
    #[error("parameter `{name}` = {value} out of domain: {reason}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("moment undefined: {0}")]
    UndefinedMoment(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The sample cannot identify the family (e.g. zero variance).
    #[error("degenerate sample: {0}")]
    FitDegenerate(String),

    #[error("not enough samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// The optimizer ran out of budget; carries the best iterate found.
    #[error("fit did not converge after {evaluations} evaluations (best: {best})")]
    FitFailed { best: Distribution, evaluations: usize },

    #[error("every candidate fit failed: {}", .0.join("; "))]
    AllFitsFailed(Vec<String>),

    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed data: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
