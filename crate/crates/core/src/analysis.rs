//! Errors, convergence orders, and convergence studies.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::LoadQuadrature;
use crate::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::ocp::{OcpProblem, OcpSolution, SolverOptions};
use crate::quadrature;
use crate::targets::{SmoothnessClass, TargetSpec};

/// Quadrature used for `||u_h - u_bar||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorQuadrature {
    /// Subdivision depth where a discontinuous target may jump.
    pub rough_depth: usize,
    /// Subdivision depth where a continuous target may have a kink.
    pub kink_depth: usize,
    /// Base rule order on subdivided elements.
    pub rough_order: usize,
}

impl Default for ErrorQuadrature {
    fn default() -> Self {
        ErrorQuadrature { rough_depth: 6, kink_depth: 4, rough_order: 2 }
    }
}

impl ErrorQuadrature {
    /// The same depth for every non-smooth target.
    pub fn with_depth(depth: usize) -> Self {
        ErrorQuadrature { rough_depth: depth, kink_depth: depth, ..Default::default() }
    }

    pub fn depth_for(&self, target: &TargetSpec) -> usize {
        match target.smoothness_class() {
            SmoothnessClass::H12 => self.rough_depth,
            _ => self.kink_depth,
        }
    }
}

/// `||u_h - u_bar||^2_{L2(K)}` for simplex `k`; `u_vertices` holds the state on
/// all mesh vertices.
///
/// Smooth targets use a rule exact for quartics (order 3 on one red
/// refinement in 4D); elsewhere the element is subdivided selectively.
pub fn element_error_sq(
    mesh: &Mesh,
    k: usize,
    u_vertices: &[f64],
    target: &TargetSpec,
    quad: &ErrorQuadrature,
) -> Result<f64> {
    let d = mesh.dim();
    let x = mesh.simplex_coords(k);
    let vol = mesh.volume(k);
    let verts = mesh.simplex(k).vertices();
    let mut nodal = [0.0; 5];
    for (a, &v) in verts.iter().enumerate() {
        nodal[a] = u_vertices[v as usize];
    }
    let f = |p: &[f64], b: &[f64]| {
        let uh: f64 = (0..=d).map(|a| b[a] * nodal[a]).sum();
        let e = uh - target.eval(p);
        e * e
    };
    if target.is_smooth() {
        let (depth, order) = if d == 4 { (1, 3) } else { (0, 4) };
        quadrature::integrate_subdivided(&x, d, vol, depth, order, f)
    } else {
        quadrature::integrate_selective(
            &x,
            d,
            vol,
            quad.depth_for(target),
            quad.rough_order,
            |c| target.may_be_rough_on(c),
            f,
        )
    }
}

/// Squared element errors for all simplices.
pub fn element_errors_sq(
    mesh: &Mesh,
    u_vertices: &[f64],
    target: &TargetSpec,
    quad: &ErrorQuadrature,
) -> Result<Vec<f64>> {
    if u_vertices.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch { expected: mesh.n_vertices(), got: u_vertices.len() });
    }
    if target.dim() != mesh.dim() {
        return Err(Error::DimensionMismatch { expected: mesh.dim(), got: target.dim() });
    }
    (0..mesh.n_simplices())
        .into_par_iter()
        .map(|k| element_error_sq(mesh, k, u_vertices, target, quad))
        .collect()
}

/// `||u_h - u_bar||_{L2(Q)}` for the state `u` given on the unknowns of `dof_x`.
pub fn l2_error(
    mesh: &Mesh,
    dof_x: &DofMap,
    u: &[f64],
    target: &TargetSpec,
    quad: &ErrorQuadrature,
) -> Result<f64> {
    let full = dof_x.prolongate(u)?;
    let parts = element_errors_sq(mesh, &full, target, quad)?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `||u_h||_{L2(Q)} = sqrt(u^T M u)`.
pub fn state_norm(problem: &OcpProblem, sol: &OcpSolution) -> Result<f64> {
    let mu = problem.operators().m.spmv(&sol.u)?;
    Ok(mu.iter().zip(&sol.u).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
}

/// `log(e_{l-1} / e_l) / log(h_{l-1} / h_l)` for consecutive levels.
pub fn eoc_with_h(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 || errors.len() != hs.len() {
        return Err(Error::InvalidArgument("need at least two errors and matching mesh sizes".into()));
    }
    if let Some(e) = errors.iter().chain(hs).find(|&&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument(format!("errors and mesh sizes must be positive, got {e}")));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Orders for a sequence of uniformly halved meshes.
pub fn eoc(errors: &[f64]) -> Result<Vec<f64>> {
    let hs: Vec<f64> = (0..errors.len()).map(|i| 0.5f64.powi(i as i32)).collect();
    eoc_with_h(errors, &hs)
}

/// How `rho` follows the mesh size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    RhoEqH2,
    FixedRho(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyConfig {
    pub dim: usize,
    pub target: String,
    /// Noise levels; when non-empty, each level uses `h = 16 delta^2` and the
    /// noisy target, and `levels` is ignored.
    pub deltas: Vec<f64>,
    /// Cells per axis of the Kuhn mesh per level.
    pub levels: Vec<usize>,
    pub coupling: Coupling,
    pub solver: SolverOptions,
    pub load_quadrature: LoadQuadrature,
    pub error_quadrature: ErrorQuadrature,
    /// Run the conformity/volume/tag audit on every mesh.
    pub audit: bool,
}

impl StudyConfig {
    pub fn new(dim: usize, target: &str, levels: Vec<usize>) -> StudyConfig {
        StudyConfig {
            dim,
            target: target.to_string(),
            deltas: Vec::new(),
            levels,
            coupling: Coupling::RhoEqH2,
            solver: SolverOptions::default(),
            load_quadrature: LoadQuadrature::default(),
            error_quadrature: ErrorQuadrature::default(),
            audit: true,
        }
    }

    pub fn noise(deltas: Vec<f64>) -> StudyConfig {
        StudyConfig { deltas, ..StudyConfig::new(3, "noisy_indicator", Vec::new()) }
    }
}

/// One line of a convergence table.
#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub level: usize,
    pub m: usize,
    /// Axis spacing `1/m`.
    pub h: f64,
    /// Largest simplex diameter.
    pub h_diameter: f64,
    pub rho: f64,
    pub delta: Option<f64>,
    pub dofs_total: usize,
    pub dofs_x: usize,
    pub dofs_y: usize,
    pub error_l2: f64,
    pub eoc: Option<f64>,
    pub state_norm: f64,
    pub target_norm: f64,
    /// `||u_h|| <= ||u_bar||` and `||u_h - u_bar|| <= ||u_bar||`.
    pub stable: bool,
    pub audit_passed: Option<bool>,
    pub iterations: usize,
    pub converged: bool,
    pub true_relative_residual: f64,
    pub solve_time_s: f64,
    pub wall_time_s: f64,
    pub failure: Option<String>,
}

fn rho_for(coupling: &Coupling, h: f64) -> f64 {
    match coupling {
        Coupling::RhoEqH2 => h * h,
        Coupling::FixedRho(r) => *r,
    }
}

/// Cells per axis for noise level `delta` (`1/m = 16 delta^2`).
pub fn noise_level_cells(delta: f64) -> Result<usize> {
    let h = 16.0 * delta * delta;
    if !(h > 0.0) || h > 1.0 {
        return Err(Error::InvalidArgument(format!("delta = {delta} gives h = {h} outside (0, 1]")));
    }
    let m = (1.0 / h).round();
    if ((1.0 / m) - h).abs() > 1e-12 * h {
        return Err(Error::InvalidArgument(format!("16 delta^2 = {h} is not 1/m for an integer m")));
    }
    Ok(m as usize)
}

struct LevelSpec {
    m: usize,
    delta: Option<f64>,
    data: TargetSpec,
    clean: TargetSpec,
}

fn level_specs(cfg: &StudyConfig) -> Result<Vec<LevelSpec>> {
    if cfg.deltas.is_empty() {
        if cfg.levels.is_empty() {
            return Err(Error::InvalidArgument("study needs at least one level".into()));
        }
        let target = TargetSpec::by_name(&cfg.target, cfg.dim, None)?;
        cfg.levels
            .iter()
            .map(|&m| {
                if m == 0 {
                    return Err(Error::InvalidArgument("levels must be positive".into()));
                }
                Ok(LevelSpec { m, delta: None, data: target.clone(), clean: target.clean() })
            })
            .collect()
    } else {
        cfg.deltas
            .iter()
            .map(|&delta| {
                let data = TargetSpec::noisy_indicator(delta)?;
                Ok(LevelSpec { m: noise_level_cells(delta)?, delta: Some(delta), clean: data.clean(), data })
            })
            .collect()
    }
}

/// Solves one level and measures it. The error is taken against the clean
/// target; stability is checked against the data actually used.
fn run_level(cfg: &StudyConfig, level: usize, spec: &LevelSpec) -> Result<(StudyRow, OcpProblem, OcpSolution)> {
    let start = Instant::now();
    let mesh = Mesh::kuhn(cfg.dim, spec.m)?;
    let audit_passed = if cfg.audit { Some(mesh.audit().is_ok()) } else { None };
    let h = 1.0 / spec.m as f64;
    let rho = rho_for(&cfg.coupling, h);
    let h_diameter = mesh.h_max();
    let problem = OcpProblem::build(mesh, rho, spec.data.clone(), &cfg.load_quadrature)?;
    let sol = problem.solve(&cfg.solver)?;
    let error_l2 = l2_error(problem.mesh(), problem.dof_x(), &sol.u, &spec.clean, &cfg.error_quadrature)?;
    let norm_u = state_norm(&problem, &sol)?;
    let data_norm = match spec.data.l2_norm() {
        Some(n) => n,
        None => {
            let zero = vec![0.0; problem.dof_x().len()];
            l2_error(problem.mesh(), problem.dof_x(), &zero, &spec.data, &cfg.error_quadrature)?
        }
    };
    let data_error = if spec.delta.is_some() {
        l2_error(problem.mesh(), problem.dof_x(), &sol.u, &spec.data, &cfg.error_quadrature)?
    } else {
        error_l2
    };
    let target_norm = spec.clean.l2_norm().unwrap_or(data_norm);
    let row = StudyRow {
        level,
        m: spec.m,
        h,
        h_diameter,
        rho,
        delta: spec.delta,
        dofs_total: problem.n_unknowns(),
        dofs_x: problem.dof_x().len(),
        dofs_y: problem.dof_y().len(),
        error_l2,
        eoc: None,
        state_norm: norm_u,
        target_norm,
        stable: norm_u <= data_norm && data_error <= data_norm,
        audit_passed,
        iterations: sol.report.iterations,
        converged: sol.report.converged,
        true_relative_residual: sol.report.true_relative_residual,
        solve_time_s: sol.report.wall_time_s,
        wall_time_s: start.elapsed().as_secs_f64(),
        failure: None,
    };
    Ok((row, problem, sol))
}

/// Runs all levels in order, passing each finished row to `on_row`. A failing
/// level is recorded in its row and the study continues.
pub fn run_study_with(cfg: &StudyConfig, mut on_row: impl FnMut(&StudyRow)) -> Result<Vec<StudyRow>> {
    let specs = level_specs(cfg)?;
    let mut rows: Vec<StudyRow> = Vec::with_capacity(specs.len());
    for (level, spec) in specs.iter().enumerate() {
        let mut row = match run_level(cfg, level, spec) {
            Ok((row, _, _)) => row,
            Err(e) => {
                log::error!("level {level} (m = {}) failed: {e}", spec.m);
                let h = 1.0 / spec.m as f64;
                StudyRow {
                    level,
                    m: spec.m,
                    h,
                    h_diameter: f64::NAN,
                    rho: rho_for(&cfg.coupling, h),
                    delta: spec.delta,
                    dofs_total: 0,
                    dofs_x: 0,
                    dofs_y: 0,
                    error_l2: f64::NAN,
                    eoc: None,
                    state_norm: f64::NAN,
                    target_norm: f64::NAN,
                    stable: false,
                    audit_passed: None,
                    iterations: 0,
                    converged: false,
                    true_relative_residual: f64::NAN,
                    solve_time_s: 0.0,
                    wall_time_s: 0.0,
                    failure: Some(e.to_string()),
                }
            }
        };
        if let Some(prev) = rows.last() {
            row.eoc = eoc_with_h(&[prev.error_l2, row.error_l2], &[prev.h, row.h])
                .ok()
                .map(|v| v[0]);
        }
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn run_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    run_study_with(cfg, |_| {})
}

/// Noise study with `h = 16 delta^2`, `rho = h^2`, errors against the clean
/// indicator.
pub fn run_noise_study(deltas: &[f64], solver: &SolverOptions) -> Result<Vec<StudyRow>> {
    let mut cfg = StudyConfig::noise(deltas.to_vec());
    cfg.solver = *solver;
    run_study(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofmap::SpaceRole;

    #[test]
    fn eoc_examples() {
        assert_eq!(eoc(&[1.0, 0.5, 0.25]).unwrap(), vec![1.0, 1.0]);
        let smooth = eoc(&[4.4352e-4, 1.0600e-4]).unwrap()[0];
        assert_eq!(format!("{smooth:.2}"), "2.06");
        let rough = eoc(&[5.2425e-2, 3.7079e-2]).unwrap()[0];
        assert_eq!(format!("{rough:.2}"), "0.50");
        assert!(eoc(&[1.0, 0.0]).is_err());
        assert!(eoc(&[1.0]).is_err());
        assert!(eoc(&[-1.0, 0.5]).is_err());
    }

    #[test]
    fn zero_state_error_is_target_norm() {
        let mesh = Mesh::kuhn(3, 4).unwrap();
        let x = DofMap::new(&mesh, SpaceRole::X);
        let zero = vec![0.0; x.len()];
        let t = TargetSpec::smooth(2).unwrap();
        let e = l2_error(&mesh, &x, &zero, &t, &ErrorQuadrature::default()).unwrap();
        assert!((e - 0.5f64.powf(1.5)).abs() < 1e-3, "{e}");
        let z = TargetSpec::custom("zero", 3, crate::targets::SmoothnessClass::H2, |_| 0.0).unwrap();
        assert_eq!(l2_error(&mesh, &x, &zero, &z, &ErrorQuadrature::default()).unwrap(), 0.0);
    }

    #[test]
    fn exact_for_functions_in_the_discrete_space() {
        let mesh = std::sync::Arc::new(Mesh::kuhn(3, 4).unwrap());
        let x = DofMap::new(&mesh, SpaceRole::X);
        let hat = TargetSpec::hat(3).unwrap();
        let full: Vec<f64> = (0..mesh.n_vertices()).map(|v| hat.eval(mesh.vertex(v))).collect();
        let (m2, f2) = (mesh.clone(), full.clone());
        let interp = TargetSpec::custom("interpolated_hat", 3, crate::targets::SmoothnessClass::H2, move |p| {
            let (k, b) = m2.locate(p).unwrap();
            m2.simplex(k).vertices().iter().zip(&b).map(|(&v, l)| l * f2[v as usize]).sum()
        })
        .unwrap();
        let u = x.restrict(&full).unwrap();
        let e = l2_error(&mesh, &x, &u, &interp, &ErrorQuadrature::default()).unwrap();
        assert!(e < 1e-12, "{e}");
        assert!(l2_error(&mesh, &x, &u, &hat, &ErrorQuadrature::with_depth(3)).unwrap() > 1e-3);
    }

    #[test]
    fn discontinuous_error_quadrature_self_converges() {
        let mesh = Mesh::kuhn(3, 3).unwrap();
        let x = DofMap::new(&mesh, SpaceRole::X);
        let t = TargetSpec::cube_indicator(3).unwrap();
        let zero = vec![0.0; x.len()];
        let e: Vec<f64> = (4..=6)
            .map(|depth| l2_error(&mesh, &x, &zero, &t, &ErrorQuadrature::with_depth(depth)).unwrap())
            .collect();
        assert!((e[2] - e[1]).abs() <= 0.25 * (e[1] - e[0]).abs() + 1e-15, "{e:?}");
    }

    #[test]
    fn noise_cells() {
        assert_eq!(noise_level_cells(0.125).unwrap(), 4);
        assert_eq!(noise_level_cells(0.0625).unwrap(), 16);
        assert!(noise_level_cells(0.1).is_err());
        assert!(noise_level_cells(1.0).is_err());
    }

    #[test]
    fn small_study_rows() {
        let mut cfg = StudyConfig::new(2, "smooth", vec![2, 4, 8]);
        cfg.error_quadrature = ErrorQuadrature::with_depth(3);
        let mut seen = 0;
        let rows = run_study_with(&cfg, |_| seen += 1).unwrap();
        assert_eq!(seen, 3);
        assert!(rows[0].eoc.is_none() && rows[1].eoc.is_some());
        for r in &rows {
            assert_eq!(r.rho / (r.h * r.h), 1.0);
            assert!(r.stable && r.audit_passed == Some(true));
        }
        assert!(rows.windows(2).all(|w| w[1].error_l2 < w[0].error_l2));
    }
}
