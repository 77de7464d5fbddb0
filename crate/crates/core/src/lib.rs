//! Space-time finite element solver for parabolic distributed optimal control
//! with energy regularization.
//!
//! The space-time cylinder `Q = (0,1)^d` (last coordinate is time) is meshed
//! with conforming simplices. The state lives in the P1 space that vanishes on
//! the lateral boundary and at `t = 0`; the adjoint lives in the P1 space that
//! vanishes on the lateral boundary only. The discrete optimality system
//!
//! ```text
//! [ A/rho   B ] [p]   [  0 ]
//! [ B^T    -M ] [u] = [ -f ]
//! ```
//!
//! is assembled and solved with ILU(0)-preconditioned GMRES, or through the
//! Schur complement `(rho B^T A^-1 B + M) u = f` with nested CG.

pub mod adaptivity;
pub mod analysis;
pub mod assembly;
pub mod config;
pub mod dofmap;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod ocp;
pub mod output;
pub mod quadrature;
mod small;
pub mod targets;
pub mod vtk;

pub use error::{Error, Result};
pub use mesh::{BoundaryTag, Mesh, Simplex};
pub use ocp::{OcpProblem, OcpSolution, SolveMethod, SolverOptions};

pub use targets::TargetSpec;
