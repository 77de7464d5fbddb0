use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

use super::ilu::Preconditioner;
use super::sparse::{axpy, dot, norm2, LinearOperator};

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-8, restart: 100, max_iter: 10_000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-10, max_iter: 10_000 }
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Residual reduction measured by the solver (preconditioned for GMRES).
    pub achieved_relative_residual: f64,
    /// `||b - A x|| / ||b||`, recomputed at the end.
    pub true_relative_residual: f64,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Orthogonality loss (estimated as `eps * ||w_before|| / ||w_after||`)
/// above which a second Gram-Schmidt pass is made.
const REORTH_THRESHOLD: f64 = 1e-8;

fn true_residual(a: &dyn LinearOperator, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    a.apply(x, &mut ax);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
    let nb = norm2(b);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

/// Restarted GMRES with left preconditioning, modified Gram-Schmidt, and
/// Givens rotations. Convergence is declared when the preconditioned residual
/// drops below `tol` times its initial value.
pub fn gmres(
    a: &dyn LinearOperator,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &GmresOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if opts.restart == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("GMRES needs restart > 0 and tol > 0".into()));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => return Err(Error::DimensionMismatch { expected: n, got: x0.len() }),
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    if norm2(b) == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        let report = SolveReport { converged: true, wall_time_s: start.elapsed().as_secs_f64(), ..Default::default() };
        return Ok((x, report));
    }

    let restart = opts.restart.min(n.max(1));
    let mut tmp = vec![0.0; n];
    let mut w = vec![0.0; n];
    let precond_residual = |x: &[f64], tmp: &mut Vec<f64>, out: &mut Vec<f64>| {
        a.apply(x, tmp);
        for (t, bi) in tmp.iter_mut().zip(b) {
            *t = bi - *t;
        }
        m.apply(tmp, out);
    };

    let mut r = vec![0.0; n];
    precond_residual(&x, &mut tmp, &mut r);
    let beta0 = norm2(&r);
    let target = opts.tol * beta0;
    let mut iterations = 0;
    let mut rel = if beta0 == 0.0 { 0.0 } else { 1.0 };
    let mut converged = beta0 == 0.0;

    let mut v: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut h = vec![vec![0.0; restart]; restart + 1];
    let mut cs = vec![0.0; restart];
    let mut sn = vec![0.0; restart];
    let mut g = vec![0.0; restart + 1];

    while !converged && iterations < opts.max_iter {
        let beta = norm2(&r);
        if beta <= target {
            converged = true;
            rel = beta / beta0;
            break;
        }
        v.clear();
        v.push(r.iter().map(|ri| ri / beta).collect());
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            a.apply(&v[k], &mut tmp);
            m.apply(&tmp, &mut w);
            let before = norm2(&w);
            for j in 0..=k {
                let hj = dot(&w, &v[j]);
                h[j][k] = hj;
                axpy(-hj, &v[j], &mut w);
            }
            let mut after = norm2(&w);
            if after > 0.0 && f64::EPSILON * before / after > REORTH_THRESHOLD {
                for j in 0..=k {
                    let c = dot(&w, &v[j]);
                    h[j][k] += c;
                    axpy(-c, &v[j], &mut w);
                }
                after = norm2(&w);
            }
            h[k + 1][k] = after;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            let breakdown = after <= f64::EPSILON * before.max(f64::MIN_POSITIVE);
            if g[k + 1].abs() <= target || iterations >= opts.max_iter || breakdown {
                break;
            }
            v.push(w.iter().map(|wi| wi / after).collect());
        }
        // back substitution on the triangular system
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &v[j], &mut x);
        }
        precond_residual(&x, &mut tmp, &mut r);
        let actual = norm2(&r);
        rel = actual / beta0;
        if actual <= target {
            converged = true;
        } else if k_used == 0 {
            break;
        }
    }

    let report = SolveReport {
        iterations,
        achieved_relative_residual: rel,
        true_relative_residual: true_residual(a, &x, b),
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((x, report))
}

/// Preconditioned conjugate gradients. Non-positive curvature `p^T A p <= 0`
/// aborts with [`Error::NotPositiveDefinite`].
pub fn cg(
    a: &dyn LinearOperator,
    m: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => return Err(Error::DimensionMismatch { expected: n, got: x0.len() }),
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let nb = norm2(b);
    if nb == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        let report = SolveReport { converged: true, wall_time_s: start.elapsed().as_secs_f64(), ..Default::default() };
        return Ok((x, report));
    }
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = norm2(&r) / nb;
    let mut converged = rel <= opts.tol;
    while !converged && iterations < opts.max_iter {
        a.apply(&p, &mut ap);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) {
            return Err(Error::NotPositiveDefinite(curv));
        }
        let alpha = rz / curv;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iterations += 1;
        rel = norm2(&r) / nb;
        if rel <= opts.tol {
            converged = true;
            break;
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let report = SolveReport {
        iterations,
        achieved_relative_residual: rel,
        true_relative_residual: true_residual(a, &x, b),
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ilu::{IdentityPreconditioner, Ilu0};
    use crate::linalg::sparse::CsrMatrix;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn gmres_identity_converges_immediately() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let (x, rep) = gmres(&a, &IdentityPreconditioner, &b, None, &GmresOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
        assert!(x.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-14));
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = laplace_1d(4, 0.0);
        let b = vec![0.0; 4];
        let (x, rep) = gmres(&a, &IdentityPreconditioner, &b, Some(&[1.0; 4]), &GmresOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
        let (x, rep) = cg(&a, &IdentityPreconditioner, &b, None, &CgOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gmres_nonsymmetric_with_restarts() {
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i > 0 {
                t.push((i, i - 1, -1.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.spmv(&xs).unwrap();
        let opts = GmresOptions { tol: 1e-10, restart: 5, max_iter: 1000 };
        let (x, rep) = gmres(&a, &IdentityPreconditioner, &b, None, &opts).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.true_relative_residual < 1e-9);
        assert!(x.iter().zip(&xs).all(|(p, q)| (p - q).abs() < 1e-8));
        let ilu = Ilu0::new(&a).unwrap();
        let (_, rep2) = gmres(&a, &ilu, &b, None, &opts).unwrap();
        assert!(rep2.converged && rep2.iterations <= 2);
    }

    #[test]
    fn gmres_reports_non_convergence() {
        let a = laplace_1d(200, 0.0);
        let b = vec![1.0; 200];
        let opts = GmresOptions { tol: 1e-12, restart: 3, max_iter: 6 };
        let (_, rep) = gmres(&a, &IdentityPreconditioner, &b, None, &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 6);
    }

    #[test]
    fn cg_solves_spd() {
        let a = laplace_1d(50, 0.01);
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 50.0).collect();
        let b = a.spmv(&xs).unwrap();
        let (x, rep) = cg(&a, &IdentityPreconditioner, &b, None, &CgOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(x.iter().zip(&xs).all(|(p, q)| (p - q).abs() < 1e-8));
    }

    #[test]
    fn cg_detects_indefinite() {
        let a = CsrMatrix::diagonal(&[1.0, -1.0]);
        let r = cg(&a, &IdentityPreconditioner, &[1.0, 1.0], None, &CgOptions::default());
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }
}
