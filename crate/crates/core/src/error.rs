use thiserror::Error;

use crate::solvers::EigenResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sparse structure: {0}")]
    InvalidSparse(String),

    /// The basis handed to a least-squares projection is numerically rank deficient.
    #[error("ill-conditioned basis: numerical rank {rank} of {cols} columns")]
    IllConditioned { rank: usize, cols: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("iteration diverged at iteration {iteration} with step size {step_size}")]
    Diverged { iteration: usize, step_size: f64 },

    /// Eigenpair `index` failed to converge; `partial` holds the converged prefix.
    #[error("power method: eigenpair {index} not converged within {max_iters} iterations")]
    NotConverged {
        index: usize,
        max_iters: usize,
        partial: Box<EigenResult>,
    },

    #[error("target learning error unreachable: best delta_d={best_delta_d}, delta_l={best_delta_l}")]
    TargetUnreachable {
        best_delta_d: f64,
        best_delta_l: f64,
    },

    #[error("plan does not match operator: {0}")]
    PlanMismatch(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub(crate) fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected length {expected}, got {got}"
        )));
    }
    Ok(())
}
