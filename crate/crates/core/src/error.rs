use std::fmt;

use thiserror::Error;

/// Standing assumptions a scenario must satisfy before any round runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    NonDegeneracy,
    Balanced,
    PeriodicConnectivity,
    Slater,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::NonDegeneracy => write!(f, "Assumption 1 (non-degeneracy)"),
            Assumption::Balanced => write!(f, "Assumption 2 (balanced communication)"),
            Assumption::PeriodicConnectivity => {
                write!(f, "Assumption 3 (periodic strong connectivity)")
            }
            Assumption::Slater => write!(f, "Slater condition"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DadsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported by solver: {0}")]
    Capability(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no agreement after {rounds} rounds")]
    ConvergenceFailure { rounds: usize },

    #[error("{which} violated: {detail}")]
    Assumption { which: Assumption, detail: String },

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DadsError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DadsError::InvalidInput(msg.into())
    }

    pub(crate) fn dims(what: &str, expected: usize, got: usize) -> Self {
        DadsError::InvalidInput(format!("{what}: expected dimension {expected}, got {got}"))
    }
}

pub type Result<T> = std::result::Result<T, DadsError>;
