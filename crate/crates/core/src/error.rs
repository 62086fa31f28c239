use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("invalid parameter `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("fit did not converge after {iterations} iterations: {diagnostic}")]
    NonConvergence { iterations: usize, diagnostic: String },

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("non-finite log-posterior at initialization (offending parameter: {param})")]
    Initialization { param: String },

    #[error("need at least {needed} draws, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("convergence gate failed: {0}")]
    ConvergenceGate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { name, reason: reason.into() }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Domain { .. } | Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
            Error::InsufficientSamples { .. } => 2,
            Error::ConvergenceGate(_) => 3,
            Error::SingularDesign(_)
            | Error::NonConvergence { .. }
            | Error::Initialization { .. }
            | Error::DegenerateChain(_)
            | Error::Numerical(_) => 4,
        }
    }
}
