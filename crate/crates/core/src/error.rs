use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sparse matrix: {0}")]
    InvalidSparse(String),

    #[error("consensus build failed: {0}")]
    Consensus(String),

    #[error("oracle failure in block {block}: {message}")]
    Oracle { block: usize, message: String },

    #[error("point is infeasible for block {block} (violation {violation:.3e})")]
    Infeasible { block: usize, violation: f64 },

    #[error("invariant violated at iteration {iteration}: {message}")]
    InvariantViolation { iteration: usize, message: String },

    #[error("non-finite value in {context} at iteration {iteration}")]
    NonFinite { context: String, iteration: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("instance mismatch: {0}")]
    InstanceMismatch(String),

    #[error("all {0} centralized starts failed")]
    CentralizedFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
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
