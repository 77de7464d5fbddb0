use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use stocp_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(stocp_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn mesh_counts_and_vertices() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(stocp_mesh_kuhn(4, 2, &mut mesh), StocpStatus::Ok);
        assert_eq!(stocp_mesh_dim(mesh), 4);
        assert_eq!(stocp_mesh_n_vertices(mesh), 81);
        assert_eq!(stocp_mesh_n_simplices(mesh), 384);
        let mut coords = vec![0.0; 81 * 4];
        assert_eq!(stocp_mesh_vertices(mesh, coords.as_mut_ptr(), coords.len()), StocpStatus::Ok);
        assert!(coords.iter().all(|&c| c == 0.0 || c == 0.5 || c == 1.0));
        assert_eq!(stocp_mesh_vertices(mesh, coords.as_mut_ptr(), 10), StocpStatus::BufferTooSmall);
        assert!(last_error().contains("324"));
        let mut fine = ptr::null_mut();
        assert_eq!(stocp_mesh_refine_uniform(mesh, &mut fine), StocpStatus::Ok);
        assert_eq!(stocp_mesh_n_vertices(fine), 625);
        stocp_mesh_free(fine);
        stocp_mesh_free(mesh);
    }
}

#[test]
fn invalid_arguments_and_nulls() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(stocp_mesh_kuhn(5, 2, &mut mesh), StocpStatus::InvalidArgument);
        assert!(mesh.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(stocp_mesh_kuhn(2, 2, ptr::null_mut()), StocpStatus::NullPointer);
        assert_eq!(stocp_mesh_n_vertices(ptr::null()), 0);
        stocp_mesh_free(ptr::null_mut());

        assert_eq!(stocp_mesh_kuhn(2, 4, &mut mesh), StocpStatus::Ok);
        let name = CString::new("nonsense").unwrap();
        let mut problem = ptr::null_mut();
        assert_eq!(stocp_problem_new(mesh, 0.1, name.as_ptr(), 0.0, &mut problem), StocpStatus::InvalidArgument);
        let smooth = CString::new("smooth").unwrap();
        assert_eq!(stocp_problem_new(mesh, -1.0, smooth.as_ptr(), 0.0, &mut problem), StocpStatus::InvalidArgument);
        assert_eq!(stocp_problem_new(mesh, 0.1, ptr::null(), 0.0, &mut problem), StocpStatus::NullPointer);
        assert!(problem.is_null());
        stocp_mesh_free(mesh);
        let s = CStr::from_ptr(stocp_status_string(StocpStatus::NotConverged));
        assert_eq!(s.to_str().unwrap(), "solver did not converge");
    }
}

#[test]
fn solve_through_the_c_interface() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(stocp_mesh_kuhn(3, 8, &mut mesh), StocpStatus::Ok);
        let smooth = CString::new("smooth").unwrap();
        let mut problem = ptr::null_mut();
        assert_eq!(stocp_problem_new(mesh, 1.0 / 64.0, smooth.as_ptr(), 0.0, &mut problem), StocpStatus::Ok);
        // the problem owns a copy of the mesh
        stocp_mesh_free(mesh);
        let (mut nx, mut ny) = (0, 0);
        assert_eq!(stocp_problem_dofs(problem, &mut nx, &mut ny), StocpStatus::Ok);
        assert_eq!((nx, ny), (392, 441));

        let mut a = ptr::null_mut();
        let mut b = ptr::null_mut();
        assert_eq!(stocp_problem_solve(problem, StocpMethod::SaddleGmresIlu0, 0.0, &mut a), StocpStatus::Ok);
        assert_eq!(stocp_problem_solve(problem, StocpMethod::SchurCg, 1e-12, &mut b), StocpStatus::Ok);
        let mut report = StocpSolveReport::default();
        assert_eq!(stocp_solution_report(a, &mut report), StocpStatus::Ok);
        assert!(report.converged && report.true_relative_residual <= 1e-6);

        let mut ua = vec![0.0; nx];
        let mut ub = vec![0.0; nx];
        assert_eq!(stocp_solution_state(a, ua.as_mut_ptr(), nx), StocpStatus::Ok);
        assert_eq!(stocp_solution_state(b, ub.as_mut_ptr(), nx), StocpStatus::Ok);
        let diff: f64 = ua.iter().zip(&ub).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let norm: f64 = ua.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(diff <= 1e-6 * norm, "{diff} vs {norm}");

        let mut p = vec![0.0; ny];
        let mut z = vec![0.0; ny];
        assert_eq!(stocp_solution_adjoint(a, p.as_mut_ptr(), ny), StocpStatus::Ok);
        assert_eq!(stocp_solution_control(a, z.as_mut_ptr(), ny), StocpStatus::Ok);
        assert!(z.iter().any(|v| *v != 0.0));

        let mut error = 0.0;
        assert_eq!(stocp_solution_l2_error(problem, a, 0, &mut error), StocpStatus::Ok);
        assert!((error - 8.9388e-2).abs() < 1e-5, "{error}");

        let mut full = vec![0.0; 729];
        assert_eq!(stocp_solution_state_on_vertices(problem, a, full.as_mut_ptr(), 729), StocpStatus::Ok);
        let mut v = 0.0;
        let x = [0.5, 0.5, 0.5];
        assert_eq!(stocp_solution_evaluate(problem, a, x.as_ptr(), 3, &mut v), StocpStatus::Ok);
        assert!(v > 0.0);
        assert_eq!(stocp_solution_evaluate(problem, a, x.as_ptr(), 2, &mut v), StocpStatus::DimensionMismatch);
        let outside = [0.5, 1.5, 0.5];
        assert_eq!(stocp_solution_evaluate(problem, a, outside.as_ptr(), 3, &mut v), StocpStatus::InvalidArgument);

        stocp_solution_free(a);
        stocp_solution_free(b);
        stocp_problem_free(problem);
    }
}

#[test]
fn generated_header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/stocp.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["stocp_mesh_kuhn", "stocp_problem_solve", "stocp_last_error", "STOCP_STATUS_NOT_CONVERGED", "typedef struct StocpProblem StocpProblem"] {
        assert!(text.contains(name), "{name}");
    }
    // compile check when a C compiler is present
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
