//! Dense and sparse containers plus the kernels the rest of the crate builds on.
//!
//! All kernels take an explicit [`OpCounter`]; nothing here keeps global state.

mod counter;
mod dense;
mod qr;
mod sparse;

pub use counter::OpCounter;
pub use dense::{axpy, column_norms, dense_matvec, dot, norm2, DenseMatrix};
pub use qr::{least_squares_project, PivotedQr};
pub use sparse::{sparse_matvec, SparseColMatrix};
