//! Low-rank-and-sparse decomposition of dense data matrices and iterative
//! learning on the factored Gram operator.
//!
//! A dense matrix `A` (`m×n`) is factored as `A ≈ D·V`, with `D` a handful of
//! normalised columns of `A` and `V` sparse. Iterative solvers that only need
//! `Gx = AᵀA x` then run on `Vᵀ(Dᵀ(D(Vx)))` instead, and the [`distexec`]
//! module replays that product across simulated workers with exact cost
//! accounting.

pub mod cssd;
pub mod datasets;
pub mod distexec;
mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod solvers;
pub mod tuner;

pub use cssd::{decompose, CssdConfig, Factorization};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, OpCounter, SparseColMatrix};
pub use solvers::{GramApply, GramOperator, SolverConfig};
