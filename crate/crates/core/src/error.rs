//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the arguments was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Not enough data to compute the requested estimate at all.
    #[error("estimation impossible: {0}")]
    EstimationImpossible(String),

    /// The series carries no variability (singular Yule-Walker system).
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("insufficient history: need {needed} values, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    /// The simplex search exhausted its evaluation budget.
    #[error("optimizer did not converge after {evaluations} evaluations (objective {objective})")]
    NonConvergence {
        last: Vec<f64>,
        objective: f64,
        evaluations: usize,
    },

    /// Score differential has no variability; the test statistic is undefined.
    #[error("degenerate score differential: {0}")]
    DegenerateDifferential(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error at line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::EstimationImpossible(_)
            | Error::InsufficientHistory { .. }
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Config(_) => 2,
            Error::DegenerateSeries(_)
            | Error::NonConvergence { .. }
            | Error::DegenerateDifferential(_) => 3,
            Error::Io { .. } => 4,
        }
    }
}
