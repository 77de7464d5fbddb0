//! C ABI for the `stocp` solver.
//!
//! Meshes, problems and solutions are opaque handles created by `*_new`-style
//! functions and released with the matching `*_free`. Every fallible function
//! returns a [`StocpStatus`]; on failure a message is available from
//! [`stocp_last_error`] on the same thread. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stocp::analysis::{l2_error, ErrorQuadrature};
use stocp::assembly::LoadQuadrature;
use stocp::{Error, Mesh, OcpProblem, OcpSolution, SolveMethod, SolverOptions, TargetSpec};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StocpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotConverged = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StocpMethod {
    SaddleGmresIlu0 = 0,
    SchurCg = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct StocpSolveReport {
    pub iterations: usize,
    pub achieved_relative_residual: f64,
    pub true_relative_residual: f64,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Opaque mesh handle.
pub struct StocpMesh(Mesh);
/// Opaque problem handle.
pub struct StocpProblem(OcpProblem);
/// Opaque solution handle.
pub struct StocpSolution(OcpSolution);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (StocpStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> StocpStatus {
    match e {
        Error::InvalidArgument(_) | Error::UnsupportedDimension(_) | Error::PointOutside | Error::Config(_) => {
            StocpStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => StocpStatus::DimensionMismatch,
        Error::NotConverged(_) => StocpStatus::NotConverged,
        Error::ZeroPivot(_)
        | Error::SingularMatrix(_)
        | Error::NotPositiveDefinite(_)
        | Error::DegenerateSimplex(_)
        | Error::Geometry(_) => StocpStatus::Numerical,
        _ => StocpStatus::Internal,
    }
}

fn lib(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> StocpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            StocpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StocpStatus::Internal
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| (StocpStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| (StocpStatus::NullPointer, format!("{name} is null")))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err((StocpStatus::NullPointer, "buffer is null".into()));
    }
    if len < src.len() {
        return Err((StocpStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stocp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn stocp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn stocp_status_string(status: StocpStatus) -> *const c_char {
    let s: &'static str = match status {
        StocpStatus::Ok => "ok\0",
        StocpStatus::NullPointer => "null pointer\0",
        StocpStatus::InvalidArgument => "invalid argument\0",
        StocpStatus::DimensionMismatch => "dimension mismatch\0",
        StocpStatus::NotConverged => "solver did not converge\0",
        StocpStatus::Numerical => "numerical failure\0",
        StocpStatus::BufferTooSmall => "buffer too small\0",
        StocpStatus::Internal => "internal error\0",
    };
    s.as_ptr().cast()
}

/// Kuhn triangulation of `(0,1)^dim` with `cells` cells per axis.
#[no_mangle]
pub unsafe extern "C" fn stocp_mesh_kuhn(dim: usize, cells: usize, mesh: *mut *mut StocpMesh) -> StocpStatus {
    guard(|| {
        let slot = out(mesh, "mesh")?;
        let m = Mesh::kuhn(dim, cells).map_err(lib)?;
        *slot = Box::into_raw(Box::new(StocpMesh(m)));
        Ok(())
    })
}

/// One uniform refinement halving the mesh size; `refined` receives a new
/// handle.
#[no_mangle]
pub unsafe extern "C" fn stocp_mesh_refine_uniform(mesh: *const StocpMesh, refined: *mut *mut StocpMesh) -> StocpStatus {
    guard(|| {
        let m = get(mesh, "mesh")?;
        let slot = out(refined, "refined")?;
        let r = m.0.refine_uniform().map_err(lib)?;
        *slot = Box::into_raw(Box::new(StocpMesh(r)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn stocp_mesh_free(mesh: *mut StocpMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Zero for a null handle.
#[no_mangle]
pub unsafe extern "C" fn stocp_mesh_dim(mesh: *const StocpMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.dim())
}

/// Zero for a null handle.
#[no_mangle]
pub unsafe extern "C" fn stocp_mesh_n_vertices(mesh: *const StocpMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.n_vertices())
}

/// Zero for a null handle.
#[no_mangle]
pub unsafe extern "C" fn stocp_mesh_n_simplices(mesh: *const StocpMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.n_simplices())
}

/// Copies the vertex coordinates, `dim` values per vertex.
#[no_mangle]
pub unsafe extern "C" fn stocp_mesh_vertices(mesh: *const StocpMesh, buf: *mut f64, len: usize) -> StocpStatus {
    guard(|| {
        let m = &get(mesh, "mesh")?.0;
        let coords: Vec<f64> = (0..m.n_vertices()).flat_map(|i| m.vertex(i).to_vec()).collect();
        copy_out(&coords, buf, len)
    })
}

/// Assembles the optimality system on a copy of `mesh`. `target` is one of
/// `smooth`, `hat`, `cube`, `noisy`; `delta` is the noise level of `noisy`
/// and ignored otherwise.
#[no_mangle]
pub unsafe extern "C" fn stocp_problem_new(
    mesh: *const StocpMesh,
    rho: f64,
    target: *const c_char,
    delta: f64,
    problem: *mut *mut StocpProblem,
) -> StocpStatus {
    guard(|| {
        let m = get(mesh, "mesh")?;
        let slot = out(problem, "problem")?;
        if target.is_null() {
            return Err((StocpStatus::NullPointer, "target is null".into()));
        }
        let name = CStr::from_ptr(target)
            .to_str()
            .map_err(|_| (StocpStatus::InvalidArgument, "target is not UTF-8".to_string()))?;
        let noisy = matches!(name, "noisy" | "noisy_indicator");
        let spec = TargetSpec::by_name(name, m.0.dim(), noisy.then_some(delta)).map_err(lib)?;
        let p = OcpProblem::build(m.0.clone(), rho, spec, &LoadQuadrature::default()).map_err(lib)?;
        *slot = Box::into_raw(Box::new(StocpProblem(p)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn stocp_problem_free(problem: *mut StocpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Numbers of state and adjoint unknowns.
#[no_mangle]
pub unsafe extern "C" fn stocp_problem_dofs(problem: *const StocpProblem, n_state: *mut usize, n_adjoint: *mut usize) -> StocpStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        *out(n_state, "n_state")? = p.dof_x().len();
        *out(n_adjoint, "n_adjoint")? = p.dof_y().len();
        Ok(())
    })
}

/// Solves the optimality system. `tol <= 0` keeps the default tolerance.
/// A solve that stops without converging returns `NOT_CONVERGED` and still
/// stores the last iterate in `solution`.
#[no_mangle]
pub unsafe extern "C" fn stocp_problem_solve(
    problem: *const StocpProblem,
    method: StocpMethod,
    tol: f64,
    solution: *mut *mut StocpSolution,
) -> StocpStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        let slot = out(solution, "solution")?;
        *slot = ptr::null_mut();
        let mut opts = SolverOptions {
            method: match method {
                StocpMethod::SaddleGmresIlu0 => SolveMethod::SaddleGmresIlu0,
                StocpMethod::SchurCg => SolveMethod::SchurCg,
            },
            ..Default::default()
        };
        if tol > 0.0 {
            opts.tol = tol;
        }
        let sol = p.solve(&opts).map_err(lib)?;
        let converged = sol.report.converged;
        let iterations = sol.report.iterations;
        *slot = Box::into_raw(Box::new(StocpSolution(sol)));
        if converged {
            Ok(())
        } else {
            Err((StocpStatus::NotConverged, format!("stopped after {iterations} iterations")))
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn stocp_solution_free(solution: *mut StocpSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

#[no_mangle]
pub unsafe extern "C" fn stocp_solution_report(solution: *const StocpSolution, report: *mut StocpSolveReport) -> StocpStatus {
    guard(|| {
        let r = get(solution, "solution")?.0.report;
        *out(report, "report")? = StocpSolveReport {
            iterations: r.iterations,
            achieved_relative_residual: r.achieved_relative_residual,
            true_relative_residual: r.true_relative_residual,
            converged: r.converged,
            wall_time_s: r.wall_time_s,
        };
        Ok(())
    })
}

/// Copies the state unknowns (length: state unknowns).
#[no_mangle]
pub unsafe extern "C" fn stocp_solution_state(solution: *const StocpSolution, buf: *mut f64, len: usize) -> StocpStatus {
    guard(|| copy_out(&get(solution, "solution")?.0.u, buf, len))
}

/// Copies the adjoint unknowns (length: adjoint unknowns).
#[no_mangle]
pub unsafe extern "C" fn stocp_solution_adjoint(solution: *const StocpSolution, buf: *mut f64, len: usize) -> StocpStatus {
    guard(|| copy_out(&get(solution, "solution")?.0.p, buf, len))
}

/// Copies the nodal control (length: adjoint unknowns).
#[no_mangle]
pub unsafe extern "C" fn stocp_solution_control(solution: *const StocpSolution, buf: *mut f64, len: usize) -> StocpStatus {
    guard(|| copy_out(&get(solution, "solution")?.0.z_nodal, buf, len))
}

/// Copies the state on all mesh vertices, zero where constrained.
#[no_mangle]
pub unsafe extern "C" fn stocp_solution_state_on_vertices(
    problem: *const StocpProblem,
    solution: *const StocpSolution,
    buf: *mut f64,
    len: usize,
) -> StocpStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        let s = &get(solution, "solution")?.0;
        let full = p.state_on_vertices(s).map_err(lib)?;
        copy_out(&full, buf, len)
    })
}

/// Evaluates the discrete state at a point of the cylinder.
#[no_mangle]
pub unsafe extern "C" fn stocp_solution_evaluate(
    problem: *const StocpProblem,
    solution: *const StocpSolution,
    point: *const f64,
    dim: usize,
    value: *mut f64,
) -> StocpStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        let s = &get(solution, "solution")?.0;
        if point.is_null() {
            return Err((StocpStatus::NullPointer, "point is null".into()));
        }
        if dim != p.mesh().dim() {
            return Err(lib(Error::DimensionMismatch { expected: p.mesh().dim(), got: dim }));
        }
        let x = std::slice::from_raw_parts(point, dim);
        *out(value, "value")? = p.evaluate_state(s, x).map_err(lib)?;
        Ok(())
    })
}

/// `||u_h - u_bar||_{L2(Q)}` against the noise-free target. `depth` is the
/// subdivision depth used where the target is not smooth.
#[no_mangle]
pub unsafe extern "C" fn stocp_solution_l2_error(
    problem: *const StocpProblem,
    solution: *const StocpSolution,
    depth: usize,
    error: *mut f64,
) -> StocpStatus {
    guard(|| {
        let p = &get(problem, "problem")?.0;
        let s = &get(solution, "solution")?.0;
        if depth > 8 {
            return Err((StocpStatus::InvalidArgument, format!("depth {depth} exceeds 8")));
        }
        let clean = p.target().clean();
        let e = l2_error(p.mesh(), p.dof_x(), &s.u, &clean, &ErrorQuadrature::with_depth(depth)).map_err(lib)?;
        *out(error, "error")? = e;
        Ok(())
    })
}
