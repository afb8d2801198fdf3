use thiserror::Error;

use crate::walk::WalkRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {theta:?} outside the family box: {reason}")]
    ParamDomain { theta: Vec<f64>, reason: String },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("invalid site law: {0}")]
    InvalidSite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// The walk did not reach its target within the step budget. The partial
    /// record holds everything simulated so far.
    #[error("step budget of {cap} exhausted before hitting site {target}")]
    BudgetExceeded {
        cap: u64,
        target: u64,
        partial: Box<WalkRecord>,
    },

    #[error("site {0} lies outside the fixed environment")]
    OutsideEnvironment(i64),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("environment is not ballistic: {0}")]
    NonBallistic(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 1 for validation problems, 2 for numeric or budget failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParamDomain { .. }
            | Error::InvalidFamily(_)
            | Error::InvalidSite(_)
            | Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Parse(_)
            | Error::Io(_) => 1,
            Error::BudgetExceeded { .. }
            | Error::OutsideEnvironment(_)
            | Error::Overflow(_)
            | Error::NonBallistic(_)
            | Error::DegenerateData(_) => 2,
        }
    }
}
