use thiserror::Error;

use crate::conditions::ConditionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid parameter: {0}")]
    Validation(String),

    /// A time step produced a non-finite state or the implicit system lost
    /// positivity. Path drivers turn this into a blow-up event.
    #[error("state overflow during time step")]
    Overflow,

    #[error("singular linear system (zero pivot at row {row})")]
    Singular { row: usize },

    #[error("embedding constant search did not converge (best ratio found {best})")]
    NonConvergence { best: f64 },

    #[error("coercivity estimate unstable under sample doubling: {first} vs {second}")]
    UnstableEstimate { first: f64, second: f64 },

    #[error("precondition {} failed", .0.condition_id)]
    ConditionFailed(Box<ConditionReport>),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
