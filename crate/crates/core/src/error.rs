use thiserror::Error;

use crate::geometry::Vector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{op} is not supported for {variant}: {reason}")]
    Unsupported {
        op: &'static str,
        variant: String,
        reason: String,
    },

    #[error("{what} did not converge after {iterations} iterations (gap {gap:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        gap: f64,
        last: Vector,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("no samples with positive residual were accepted ({drawn} drawn)")]
    NoSamples { drawn: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
