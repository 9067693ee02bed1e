//! Iterative learners that only touch the data through `G = AᵀA`.

mod fista;
mod gram;
mod metrics;
mod power;

pub use fista::{
    estimate_lipschitz, fista_solve, fista_solve_with, objective_value, soft_threshold,
    FistaOutcome, IterationRecord, IterationTrace, SolverConfig, StepSize, LIPSCHITZ_ITERS,
};
pub(crate) use gram::factored_middle;
pub use gram::{GramApply, GramFlow, GramOperator};
pub use metrics::{classify, learning_error, psnr, psnr_from_mse, Classification};
pub use power::{power_method, EigenResult};
