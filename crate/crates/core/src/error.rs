use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates the precondition of the operation it was passed to.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The generator matches the target, so the bound keeps decreasing in the
    /// ratio and no finite optimum exists.
    #[error("unbounded regularization: zero discrepancy, synthetic data can be added without limit")]
    UnboundedRegularization,

    /// The minimised quantity is monotone on the search interval.
    #[error("no interior minimum: optimum at search boundary lambda = {lambda:e} (value {value:e})")]
    BoundarySolution { lambda: f64, value: f64 },

    #[error("fit failed at lambda = {lambda:e}: {source}")]
    Fit {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("spectral fit needs at least 4 usable bins, found {found}")]
    InsufficientBins { found: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Decode { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad caller input rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument { .. } | Error::Config(_))
    }
}
