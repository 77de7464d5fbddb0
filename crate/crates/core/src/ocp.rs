//! Discrete optimality system: assembly of the saddle-point problem, solvers,
//! and post-processing of state, adjoint, and control.

use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_form, AssembledOperators, Form, LoadQuadrature};
use crate::dofmap::{DofMap, SpaceRole};
use crate::error::{Error, Result};
use crate::linalg::{
    cg, gmres, norm2, CgOptions, CsrMatrix, FnOperator, GmresOptions, IdentityPreconditioner,
    Ilu0, LinearOperator, Preconditioner, SolveReport,
};
use crate::mesh::Mesh;
use crate::targets::TargetSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// ILU(0)-preconditioned GMRES on the full block system.
    #[default]
    SaddleGmresIlu0,
    /// CG on `(rho B^T A^-1 B + M) u = f` with inner CG solves for `A`.
    SchurCg,
}

impl FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saddle_gmres_ilu0" | "gmres" => Ok(SolveMethod::SaddleGmresIlu0),
            "schur_cg" | "cg" => Ok(SolveMethod::SchurCg),
            _ => Err(Error::InvalidArgument(format!("unknown solve method '{s}'"))),
        }
    }
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveMethod::SaddleGmresIlu0 => "saddle_gmres_ilu0",
            SolveMethod::SchurCg => "schur_cg",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: SolveMethod,
    /// Reduction of the preconditioned residual.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Target for `||b - K x|| / ||b||`. GMRES is restarted with a tighter
    /// tolerance until this holds or the tolerance reaches `1e-15`.
    pub true_residual_tol: f64,
    /// Tolerance of the inner `A` solves on the Schur path.
    pub inner_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SolveMethod::SaddleGmresIlu0,
            tol: 1e-8,
            restart: 100,
            max_iter: 10_000,
            true_residual_tol: 1e-6,
            inner_tol: 1e-10,
        }
    }
}

/// The discrete problem for one mesh, target, and regularization parameter.
pub struct OcpProblem {
    mesh: Mesh,
    rho: f64,
    target: TargetSpec,
    dof_x: DofMap,
    dof_y: DofMap,
    ops: AssembledOperators,
    a_ilu: OnceLock<Option<Ilu0>>,
}

impl std::fmt::Debug for OcpProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OcpProblem")
            .field("dim", &self.mesh.dim())
            .field("rho", &self.rho)
            .field("target", &self.target.name())
            .field("dofs_x", &self.dof_x.len())
            .field("dofs_y", &self.dof_y.len())
            .finish()
    }
}

/// Result of a solve. Vectors are indexed by unknowns of the respective space.
#[derive(Clone, Debug, Serialize)]
pub struct OcpSolution {
    /// State, length `M_X`.
    pub u: Vec<f64>,
    /// Adjoint, length `M_Y`.
    pub p: Vec<f64>,
    /// Control as a dual vector `-A p / rho`, length `M_Y`.
    pub z_dual: Vec<f64>,
    /// Mass-matrix Riesz lift of `z_dual` on `Y_h`.
    pub z_nodal: Vec<f64>,
    pub report: SolveReport,
    pub method: SolveMethod,
}

impl OcpProblem {
    pub fn build(mesh: Mesh, rho: f64, target: TargetSpec, quad: &LoadQuadrature) -> Result<OcpProblem> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        if target.dim() != mesh.dim() {
            return Err(Error::DimensionMismatch { expected: mesh.dim(), got: target.dim() });
        }
        let dof_x = DofMap::new(&mesh, SpaceRole::X);
        let dof_y = DofMap::new(&mesh, SpaceRole::Y);
        let ops = AssembledOperators::assemble(&mesh, &dof_x, &dof_y, &target, quad)?;
        Ok(OcpProblem { mesh, rho, target, dof_x, dof_y, ops, a_ilu: OnceLock::new() })
    }

    /// The same problem with another regularization parameter.
    pub fn with_rho(&self, rho: f64) -> Result<OcpProblem> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        Ok(OcpProblem {
            mesh: self.mesh.clone(),
            rho,
            target: self.target.clone(),
            dof_x: self.dof_x.clone(),
            dof_y: self.dof_y.clone(),
            ops: self.ops.clone(),
            a_ilu: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn dof_x(&self) -> &DofMap {
        &self.dof_x
    }

    pub fn dof_y(&self) -> &DofMap {
        &self.dof_y
    }

    pub fn operators(&self) -> &AssembledOperators {
        &self.ops
    }

    pub fn n_unknowns(&self) -> usize {
        self.dof_x.len() + self.dof_y.len()
    }

    /// `[[A/rho, B], [B^T, -M]]` with unknowns ordered `[p; u]`.
    pub fn saddle_matrix(&self) -> CsrMatrix {
        let o = &self.ops;
        CsrMatrix::block_2x2(&o.a.scaled(1.0 / self.rho), &o.b, &o.b.transpose(), &o.m.scaled(-1.0))
            .expect("block shapes follow the dof maps")
    }

    /// `(0; -f)`
    pub fn saddle_rhs(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.dof_y.len()];
        r.extend(self.ops.f.iter().map(|v| -v));
        r
    }

    fn a_preconditioner(&self) -> &dyn Preconditioner {
        match self.a_ilu.get_or_init(|| Ilu0::new(&self.ops.a).ok()) {
            Some(ilu) => ilu,
            None => &IdentityPreconditioner,
        }
    }

    /// Solves `A p = r` to the inner tolerance.
    pub fn solve_a(&self, r: &[f64], tol: f64) -> Result<Vec<f64>> {
        let (p, rep) = cg(&self.ops.a, self.a_preconditioner(), r, None, &CgOptions { tol, max_iter: 10_000 })?;
        if !rep.converged {
            return Err(Error::NotConverged(format!(
                "inner A solve stopped at relative residual {:.3e}",
                rep.achieved_relative_residual
            )));
        }
        Ok(p)
    }

    /// `S~ u = B^T A^-1 B u`
    pub fn apply_s_tilde(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply_s_tilde_with(u, SolverOptions::default().inner_tol)
    }

    pub fn apply_s_tilde_with(&self, u: &[f64], inner_tol: f64) -> Result<Vec<f64>> {
        if u.len() != self.dof_x.len() {
            return Err(Error::DimensionMismatch { expected: self.dof_x.len(), got: u.len() });
        }
        let bu = self.ops.b.spmv(u)?;
        let w = self.solve_a(&bu, inner_tol)?;
        self.ops.b.spmv_transpose(&w)
    }

    /// Gradient `(rho S~ + M) u - f` of the reduced cost
    /// `1/2 u^T (rho S~ + M) u - f^T u`.
    pub fn reduced_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let su = self.apply_s_tilde(u)?;
        let mu = self.ops.m.spmv(u)?;
        Ok(su.iter().zip(&mu).zip(&self.ops.f).map(|((s, m), f)| self.rho * s + m - f).collect())
    }

    pub fn reduced_cost(&self, u: &[f64]) -> Result<f64> {
        let su = self.apply_s_tilde(u)?;
        let mu = self.ops.m.spmv(u)?;
        Ok(u.iter()
            .zip(su.iter().zip(&mu))
            .zip(&self.ops.f)
            .map(|((ui, (s, m)), f)| 0.5 * ui * (self.rho * s + m) - f * ui)
            .sum())
    }

    /// Relative block residuals `||A p / rho + B u|| / ||f||` and
    /// `||B^T p - M u + f|| / ||f||`.
    pub fn block_residuals(&self, u: &[f64], p: &[f64]) -> Result<(f64, f64)> {
        let o = &self.ops;
        let ap = o.a.spmv(p)?;
        let bu = o.b.spmv(u)?;
        let r1: Vec<f64> = ap.iter().zip(&bu).map(|(a, b)| a / self.rho + b).collect();
        let btp = o.b.spmv_transpose(p)?;
        let mu = o.m.spmv(u)?;
        let r2: Vec<f64> = btp.iter().zip(&mu).zip(&o.f).map(|((b, m), f)| b - m + f).collect();
        let nf = norm2(&o.f);
        let scale = if nf == 0.0 { 1.0 } else { nf };
        Ok((norm2(&r1) / scale, norm2(&r2) / scale))
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<OcpSolution> {
        let start = Instant::now();
        let (u, p, mut report) = match opts.method {
            SolveMethod::SaddleGmresIlu0 => self.solve_saddle(opts)?,
            SolveMethod::SchurCg => self.solve_schur(opts)?,
        };
        let z_dual: Vec<f64> = self.ops.a.spmv(&p)?.iter().map(|v| -v / self.rho).collect();
        let z_nodal = self.lift_to_nodal(&z_dual)?;
        report.wall_time_s = start.elapsed().as_secs_f64();
        Ok(OcpSolution { u, p, z_dual, z_nodal, report, method: opts.method })
    }

    fn solve_saddle(&self, opts: &SolverOptions) -> Result<(Vec<f64>, Vec<f64>, SolveReport)> {
        let k = self.saddle_matrix();
        let b = self.saddle_rhs();
        let ilu = match Ilu0::new(&k) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("ILU(0) breakdown ({e}); falling back to unpreconditioned GMRES");
                None
            }
        };
        let prec: &dyn Preconditioner = match &ilu {
            Some(f) => f,
            None => &IdentityPreconditioner,
        };
        let mut z = vec![0.0; b.len()];
        prec.apply(&b, &mut z);
        let initial = norm2(&z);

        let mut tol = opts.tol;
        let mut x: Option<Vec<f64>> = None;
        let mut total = 0;
        let mut report;
        loop {
            let inner_tol = match &x {
                // relative to the warm-start residual
                Some(xv) => {
                    let mut r = vec![0.0; b.len()];
                    k.apply(xv, &mut r);
                    r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
                    prec.apply(&r, &mut z);
                    (tol * initial / norm2(&z).max(f64::MIN_POSITIVE)).min(0.5)
                }
                None => tol,
            };
            let gopts = GmresOptions {
                tol: inner_tol,
                restart: opts.restart,
                max_iter: opts.max_iter.saturating_sub(total).max(1),
            };
            let (xn, rep) = gmres(&k, prec, &b, x.as_deref(), &gopts)?;
            total += rep.iterations;
            x = Some(xn);
            report = rep;
            if !rep.converged
                || rep.true_relative_residual <= opts.true_residual_tol
                || tol <= 1e-15
                || total >= opts.max_iter
            {
                break;
            }
            let factor = opts.true_residual_tol / rep.true_relative_residual / 10.0;
            tol = (tol * factor.min(0.1)).max(1e-15);
            log::debug!("true residual {:.2e}; tightening GMRES tolerance to {tol:.1e}", rep.true_relative_residual);
        }
        let x = x.expect("at least one GMRES run");
        let mut r = vec![0.0; b.len()];
        k.apply(&x, &mut r);
        r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
        prec.apply(&r, &mut z);
        report.iterations = total;
        report.achieved_relative_residual = if initial == 0.0 { 0.0 } else { norm2(&z) / initial };
        let ny = self.dof_y.len();
        Ok((x[ny..].to_vec(), x[..ny].to_vec(), report))
    }

    fn solve_schur(&self, opts: &SolverOptions) -> Result<(Vec<f64>, Vec<f64>, SolveReport)> {
        let rho = self.rho;
        let o = &self.ops;
        let failure = std::sync::Mutex::new(None::<Error>);
        let op = FnOperator::new(self.dof_x.len(), |u: &[f64], out: &mut [f64]| {
            match self.apply_s_tilde_with(u, opts.inner_tol) {
                Ok(s) => {
                    o.m.spmv_into(u, out);
                    out.iter_mut().zip(&s).for_each(|(y, si)| *y += rho * si);
                }
                Err(e) => {
                    *failure.lock().unwrap() = Some(e);
                    out.iter_mut().for_each(|y| *y = 0.0);
                }
            }
        });
        let diag: Vec<f64> = (0..o.m.nrows()).map(|i| 1.0 / o.m.get(i, i)).collect();
        let jacobi = JacobiPreconditioner(diag);
        let copts = CgOptions { tol: opts.tol, max_iter: opts.max_iter };
        let (u, report) = cg(&op, &jacobi, &o.f, None, &copts)?;
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        let bu = o.b.spmv(&u)?;
        let w = self.solve_a(&bu, opts.inner_tol)?;
        let p: Vec<f64> = w.iter().map(|v| -rho * v).collect();
        let mut report = report;
        let k = self.saddle_matrix();
        let b = self.saddle_rhs();
        let mut x = p.clone();
        x.extend_from_slice(&u);
        let kx = k.spmv(&x)?;
        let r: f64 = kx.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
        let nb = norm2(&b);
        report.true_relative_residual = if nb == 0.0 { r } else { r / nb };
        Ok((u, p, report))
    }

    /// Solves `M_Y z = z_dual` with the mass matrix of `Y_h`.
    pub fn lift_to_nodal(&self, z_dual: &[f64]) -> Result<Vec<f64>> {
        let my = assemble_form(&self.mesh, &self.dof_y, &self.dof_y, Form::Mass)?;
        let diag: Vec<f64> = (0..my.nrows()).map(|i| 1.0 / my.get(i, i)).collect();
        let (z, _) = cg(&my, &JacobiPreconditioner(diag), z_dual, None, &CgOptions { tol: 1e-12, max_iter: 10_000 })?;
        Ok(z)
    }

    /// State values on all mesh vertices (zeros on constrained vertices).
    pub fn state_on_vertices(&self, sol: &OcpSolution) -> Result<Vec<f64>> {
        self.dof_x.prolongate(&sol.u)
    }

    /// P1 interpolation of the state at `point`.
    pub fn evaluate_state(&self, sol: &OcpSolution, point: &[f64]) -> Result<f64> {
        let (k, bary) = self.mesh.locate(point)?;
        let d = self.mesh.dim();
        Ok(self.mesh.simplex(k).vertices()[..=d]
            .iter()
            .zip(&bary)
            .map(|(&v, &l)| self.dof_x.dof(v as usize).map_or(0.0, |i| l * sol.u[i]))
            .sum())
    }
}

struct JacobiPreconditioner(Vec<f64>);

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().zip(r.iter().zip(&self.0)).for_each(|(zi, (ri, di))| *zi = ri * di);
    }
}
