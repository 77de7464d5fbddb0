//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use stocp::Mesh;

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        assert!(piv.abs() > 1e-300, "singular");
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &bi)| {
        let mut row = r.clone();
        row.push(bi);
        row
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Barycentric gradients (rows) and volume of simplex `k` from the inverse
/// of the matrix with rows `[1, x_a]`.
pub fn element_data(mesh: &Mesh, k: usize) -> (Vec<Vec<f64>>, f64) {
    let d = mesh.dim();
    let verts = mesh.simplex(k).vertices();
    let t: Vec<Vec<f64>> = verts
        .iter()
        .map(|&v| {
            let mut row = vec![1.0];
            row.extend_from_slice(mesh.vertex(v as usize));
            row
        })
        .collect();
    let inv = invert(&t);
    // lambda_a(x) = sum_j inv[j][a] * [1, x]_j
    let grads = (0..=d).map(|a| (1..=d).map(|j| inv[j][a]).collect()).collect();
    let jac: Vec<Vec<f64>> = (1..=d).map(|r| (0..d).map(|c| t[r][c + 1] - t[0][c + 1]).collect()).collect();
    (grads, det(&jac).abs() / factorial(d))
}

pub fn det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut s = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(c, p);
            s = -s;
        }
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
        s *= m[c][c];
    }
    s
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Space {
    /// Zero on the lateral boundary and at `t = 0`.
    X,
    /// Zero on the lateral boundary.
    Y,
    /// No constraints.
    Free,
}

/// Unknown numbers per vertex, in increasing vertex order.
pub fn numbering(mesh: &Mesh, space: Space) -> Vec<Option<usize>> {
    let d = mesh.dim();
    let mut next = 0;
    (0..mesh.n_vertices())
        .map(|v| {
            let x = mesh.vertex(v);
            let lateral = x[..d - 1].iter().any(|&c| c == 0.0 || c == 1.0);
            let fixed = match space {
                Space::X => lateral || x[d - 1] == 0.0,
                Space::Y => lateral,
                Space::Free => false,
            };
            if fixed {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bilinear {
    /// `(grad_x u, grad_x q)`
    Stiffness,
    /// `(d_t u, q) + (grad_x u, grad_x q)`
    Transport,
    /// `(u, q)`
    Mass,
}

/// Dense matrix by summing element contributions; rows are test functions.
pub fn dense_oracle(mesh: &Mesh, rows: Space, cols: Space, form: Bilinear) -> Vec<Vec<f64>> {
    let d = mesh.dim();
    let rn = numbering(mesh, rows);
    let cn = numbering(mesh, cols);
    let nr = rn.iter().flatten().count();
    let nc = cn.iter().flatten().count();
    let mut out = vec![vec![0.0; nc]; nr];
    for k in 0..mesh.n_simplices() {
        let (g, vol) = element_data(mesh, k);
        let verts = mesh.simplex(k).vertices();
        for (a, &va) in verts.iter().enumerate() {
            let Some(i) = rn[va as usize] else { continue };
            for (b, &vb) in verts.iter().enumerate() {
                let Some(j) = cn[vb as usize] else { continue };
                let grad_x: f64 = (0..d - 1).map(|c| g[a][c] * g[b][c]).sum();
                // int lambda_a lambda_b = d! (1 + [a = b]) vol / (d + 2)!
                let mass = factorial(d) * if a == b { 2.0 } else { 1.0 } * vol / factorial(d + 2);
                // int lambda_a = d! vol / (d + 1)!
                let mean = factorial(d) * vol / factorial(d + 1);
                out[i][j] += match form {
                    Bilinear::Stiffness => vol * grad_x,
                    Bilinear::Transport => g[b][d - 1] * mean + vol * grad_x,
                    Bilinear::Mass => mass,
                };
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| {
            assert_eq!(r.len(), s.len());
            r.iter().zip(s).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

/// `log(e0 / e1) / log(h0 / h1)`
pub fn rate(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}
