//! Adaptive refinement loop: solve, estimate, mark, refine.
//!
//! The element indicator is the local tracking residual
//! `eta_K = ||u_bar - u_h||_{L2(K)}`, evaluated with subdivided quadrature.

use std::time::Instant;

use serde::Serialize;

use crate::analysis::{element_errors_sq, l2_error, state_norm, ErrorQuadrature};
use crate::assembly::LoadQuadrature;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::ocp::{OcpProblem, OcpSolution, SolverOptions};
use crate::targets::TargetSpec;

/// Squared indicators `eta_K^2` for every simplex.
pub fn estimate(problem: &OcpProblem, sol: &OcpSolution, depth: usize) -> Result<Vec<f64>> {
    let full = problem.state_on_vertices(sol)?;
    element_errors_sq(problem.mesh(), &full, problem.target(), &ErrorQuadrature::with_depth(depth))
}

/// Smallest prefix of the simplices sorted by decreasing indicator (ties by
/// id) whose squared indicators sum to at least `theta` times the total.
pub fn mark_dorfler(eta_sq: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1], got {theta}")));
    }
    if let Some(e) = eta_sq.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("indicators must be nonnegative, got {e}")));
    }
    let total: f64 = eta_sq.iter().sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..eta_sq.len()).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    let goal = theta * total;
    let mut acc = 0.0;
    let mut count = 0;
    for &k in &order {
        if acc >= goal {
            break;
        }
        acc += eta_sq[k];
        count += 1;
    }
    // rounding in the running sum must not leave the goal unreached
    if acc < goal {
        count = order.len();
    }
    order.truncate(count);
    Ok(order)
}

#[derive(Clone, Debug, Serialize)]
pub struct AdaptConfig {
    pub dim: usize,
    pub target: String,
    /// Cells per axis of the initial Kuhn mesh.
    pub initial_cells: usize,
    pub theta: f64,
    /// Stop after the first level with more unknowns than this.
    pub max_dofs: usize,
    pub max_levels: usize,
    /// Fixed regularization; `None` uses `h_min^2` per level.
    pub rho: Option<f64>,
    pub estimator_depth: usize,
    pub solver: SolverOptions,
    pub load_quadrature: LoadQuadrature,
    pub error_quadrature: ErrorQuadrature,
    pub audit: bool,
}

impl AdaptConfig {
    pub fn new(dim: usize, target: &str, max_dofs: usize) -> AdaptConfig {
        AdaptConfig {
            dim,
            target: target.to_string(),
            initial_cells: 4,
            theta: 0.5,
            max_dofs,
            max_levels: 200,
            rho: None,
            estimator_depth: 4,
            solver: SolverOptions::default(),
            load_quadrature: LoadQuadrature::default(),
            error_quadrature: ErrorQuadrature::default(),
            audit: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdaptLevel {
    pub level: usize,
    pub n_simplices: usize,
    pub dofs_total: usize,
    pub dofs_x: usize,
    pub dofs_y: usize,
    pub h_min: f64,
    pub rho: f64,
    pub error_l2: f64,
    /// `sqrt(sum eta_K^2)`
    pub indicator_total: f64,
    pub marked_count: usize,
    pub iterations: usize,
    pub converged: bool,
    pub true_relative_residual: f64,
    pub state_norm: f64,
    pub stable: bool,
    pub audit_passed: Option<bool>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct AdaptState {
    pub levels: Vec<AdaptLevel>,
    pub final_mesh: Mesh,
    /// Squared indicators on `final_mesh`.
    pub final_indicators: Vec<f64>,
    /// Set when a level failed and the loop stopped early.
    pub failure: Option<String>,
}

/// Runs the adaptive loop, reporting each finished level to `on_level`.
pub fn adapt_loop_with(cfg: &AdaptConfig, mut on_level: impl FnMut(&AdaptLevel)) -> Result<AdaptState> {
    let target = TargetSpec::by_name(&cfg.target, cfg.dim, None)?;
    let clean = target.clean();
    let target_norm = target.l2_norm();
    let mut mesh = Mesh::kuhn(cfg.dim, cfg.initial_cells)?;
    let mut levels: Vec<AdaptLevel> = Vec::new();
    let mut failure = None;
    let mut last_eta = Vec::new();
    for level in 0..cfg.max_levels {
        let start = Instant::now();
        let audit_passed = if cfg.audit { Some(mesh.audit().is_ok()) } else { None };
        let h_min = mesh.h_axis_min();
        let rho = cfg.rho.unwrap_or(h_min * h_min);
        let step = (|| -> Result<_> {
            let problem = OcpProblem::build(mesh.clone(), rho, target.clone(), &cfg.load_quadrature)?;
            let sol = problem.solve(&cfg.solver)?;
            let error = l2_error(problem.mesh(), problem.dof_x(), &sol.u, &clean, &cfg.error_quadrature)?;
            let eta = estimate(&problem, &sol, cfg.estimator_depth)?;
            Ok((problem, sol, error, eta))
        })();
        let (problem, sol, error_l2, eta) = match step {
            Ok(v) => v,
            Err(e) => {
                log::error!("adaptive level {level} failed: {e}");
                failure = Some(e.to_string());
                break;
            }
        };
        let norm_u = state_norm(&problem, &sol)?;
        let data_norm = target_norm.unwrap_or(f64::INFINITY);
        let dofs_total = problem.n_unknowns();
        let done = dofs_total > cfg.max_dofs || level + 1 == cfg.max_levels;
        let marked = if done { Vec::new() } else { mark_dorfler(&eta, cfg.theta)? };
        let row = AdaptLevel {
            level,
            n_simplices: mesh.n_simplices(),
            dofs_total,
            dofs_x: problem.dof_x().len(),
            dofs_y: problem.dof_y().len(),
            h_min,
            rho,
            error_l2,
            indicator_total: eta.iter().sum::<f64>().sqrt(),
            marked_count: marked.len(),
            iterations: sol.report.iterations,
            converged: sol.report.converged,
            true_relative_residual: sol.report.true_relative_residual,
            state_norm: norm_u,
            stable: norm_u <= data_norm && error_l2 <= data_norm,
            audit_passed,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        on_level(&row);
        levels.push(row);
        last_eta = eta;
        if !sol.report.converged {
            failure = Some(format!("solver did not converge on level {level}"));
            break;
        }
        if done || marked.is_empty() {
            break;
        }
        mesh = mesh.refine_bisection(&marked)?;
    }
    Ok(AdaptState { levels, final_mesh: mesh, final_indicators: last_eta, failure })
}

pub fn adapt_loop(cfg: &AdaptConfig) -> Result<AdaptState> {
    adapt_loop_with(cfg, |_| {})
}
