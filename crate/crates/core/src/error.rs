//! Error type shared by every module.

use thiserror::Error;

use crate::model::EstimateReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The measurement model itself is malformed (e.g. a covariance that is
    /// not positive semi-definite).
    #[error("model error: {0}")]
    Model(String),

    #[error("singular innovation covariance (condition estimate {condition:.3e})")]
    SingularInnovation { condition: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no feature is visible from the requested view")]
    Unobservable,

    #[error("{atoms} atoms exceed the enumeration capacity of {limit}")]
    Capacity { atoms: usize, limit: usize },

    #[error("range error: {0}")]
    Range(String),

    #[error("planning error: {0}")]
    Planning(String),

    /// The observation source ran dry before the tolerance was met. The
    /// report describes the state reached so far.
    #[error("observation source exhausted after {stages} stage(s)")]
    Exhausted {
        stages: usize,
        partial: Box<EstimateReport>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension { what, expected, got })
        }
    }
}
