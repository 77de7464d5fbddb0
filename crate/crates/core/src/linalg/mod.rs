//! Sparse matrices and solvers.

pub mod dense;
pub mod ilu;
pub mod krylov;
pub mod matrix_market;
pub mod sparse;

pub use dense::{solve_dense, DenseLu};
pub use ilu::{IdentityPreconditioner, Ilu0, Preconditioner};
pub use krylov::{cg, gmres, CgOptions, GmresOptions, SolveReport};
pub use sparse::{axpy, dot, norm2, CsrMatrix, FnOperator, LinearOperator};
