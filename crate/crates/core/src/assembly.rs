//! P1 finite element matrices and load vectors.
//!
//! With `grad_x` the spatial part of the gradient (time component dropped):
//!
//! * `A_ij = sum_K |K| grad_x phi_i . grad_x phi_j` on `Y_h x Y_h`,
//! * `B_ij = sum_K int_K dt phi_j phi_i + |K| grad_x phi_j . grad_x phi_i`
//!   with test functions from `Y_h` (rows) and trial functions from `X_h`,
//! * `M_ij = sum_K |K| (1 + delta_ij) / ((d+1)(d+2))`,
//! * `f_i = int_Q u_bar phi_i`.
//!
//! Matrices are assembled row by row: every row sums its element
//! contributions in increasing element order, so the result does not depend
//! on the number of worker threads.

use rayon::prelude::*;

use crate::dofmap::DofMap;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::linalg::sparse::DROP_TOL;
use crate::mesh::Mesh;
use crate::quadrature::{self, SimplexCoords};
use crate::small::{det_and_inverse, factorial, SmallMat, MAX_DIM};
use crate::targets::TargetSpec;

/// Affine map data of one simplex.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub dim: usize,
    /// Columns are the edges `x_i - x_0`.
    pub jacobian: SmallMat,
    pub inverse_transpose: SmallMat,
    pub volume: f64,
    /// Gradients of the barycentric coordinates.
    pub grads: [[f64; MAX_DIM]; MAX_DIM + 1],
}

impl ElementGeometry {
    pub fn from_coords(x: &SimplexCoords, dim: usize) -> Option<ElementGeometry> {
        let mut jacobian = [[0.0; MAX_DIM]; MAX_DIM];
        for (r, row) in jacobian.iter_mut().enumerate().take(dim) {
            for c in 0..dim {
                row[c] = x[c + 1][r] - x[0][r];
            }
        }
        let (det, inv) = det_and_inverse(&jacobian, dim)?;
        let mut inverse_transpose = [[0.0; MAX_DIM]; MAX_DIM];
        let mut grads = [[0.0; MAX_DIM]; MAX_DIM + 1];
        for i in 0..dim {
            for j in 0..dim {
                inverse_transpose[i][j] = inv[j][i];
                grads[i + 1][j] = inv[i][j];
                grads[0][j] -= inv[i][j];
            }
        }
        Some(ElementGeometry {
            dim,
            jacobian,
            inverse_transpose,
            volume: det.abs() / factorial(dim) as f64,
            grads,
        })
    }

    /// `grad_x phi_a . grad_x phi_b`
    #[inline]
    pub fn spatial_dot(&self, a: usize, b: usize) -> f64 {
        let (ga, gb) = (&self.grads[a], &self.grads[b]);
        (0..self.dim - 1).map(|s| ga[s] * gb[s]).sum()
    }

    #[inline]
    pub fn time_derivative(&self, a: usize) -> f64 {
        self.grads[a][self.dim - 1]
    }
}

/// Barycentric gradients and volume of simplex `k`.
pub fn p1_gradients(mesh: &Mesh, k: usize) -> Result<ElementGeometry> {
    let d = mesh.dim();
    let x = mesh.simplex_coords(k);
    let h = mesh.diameter(k);
    match ElementGeometry::from_coords(&x, d) {
        Some(g) if g.volume >= 1e-14 * h.powi(d as i32) => Ok(g),
        _ => Err(Error::DegenerateSimplex(k)),
    }
}

/// The bilinear forms available for assembly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    /// Spatial stiffness (the `A` form).
    Stiffness,
    /// Time derivative plus spatial stiffness (the `B` form).
    Transport,
    /// Time derivative part of `B` only.
    TimeDerivative,
    Mass,
}

impl Form {
    /// Element contribution for test function `a` and trial function `b`.
    #[inline]
    pub fn local(self, g: &ElementGeometry, a: usize, b: usize) -> f64 {
        let d = g.dim as f64;
        match self {
            Form::Stiffness => g.volume * g.spatial_dot(a, b),
            Form::TimeDerivative => g.time_derivative(b) * g.volume / (d + 1.0),
            Form::Transport => {
                g.time_derivative(b) * g.volume / (d + 1.0) + g.volume * g.spatial_dot(a, b)
            }
            Form::Mass => {
                let delta = if a == b { 2.0 } else { 1.0 };
                g.volume * delta / ((d + 1.0) * (d + 2.0))
            }
        }
    }
}

/// Simplices incident to each vertex, in increasing simplex order, with the
/// local index of the vertex.
#[derive(Clone, Debug)]
pub struct VertexElements {
    offsets: Vec<usize>,
    entries: Vec<(u32, u8)>,
}

impl VertexElements {
    pub fn new(mesh: &Mesh) -> VertexElements {
        let n = mesh.n_vertices();
        let mut offsets = vec![0usize; n + 1];
        for s in mesh.simplices() {
            for &v in s.vertices() {
                offsets[v as usize + 1] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut next = offsets.clone();
        let mut entries = vec![(0u32, 0u8); offsets[n]];
        for (k, s) in mesh.simplices().iter().enumerate() {
            for (a, &v) in s.vertices().iter().enumerate() {
                entries[next[v as usize]] = (k as u32, a as u8);
                next[v as usize] += 1;
            }
        }
        VertexElements { offsets, entries }
    }

    #[inline]
    pub fn of(&self, v: usize) -> &[(u32, u8)] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }
}

fn check_geometry(mesh: &Mesh) -> Result<()> {
    (0..mesh.n_simplices())
        .into_par_iter()
        .try_for_each(|k| p1_gradients(mesh, k).map(|_| ()))
}

fn assemble_with(
    mesh: &Mesh,
    adj: &VertexElements,
    rows: &DofMap,
    cols: &DofMap,
    form: Form,
) -> CsrMatrix {
    let d = mesh.dim();
    let row_data: Vec<(Vec<u32>, Vec<f64>)> = (0..rows.len())
        .into_par_iter()
        .map(|r| {
            let v = rows.vertex(r);
            let mut buf: Vec<(u32, f64)> = Vec::with_capacity(adj.of(v).len() * (d + 1));
            for &(k, a) in adj.of(v) {
                let k = k as usize;
                let g = ElementGeometry::from_coords(&mesh.simplex_coords(k), d)
                    .expect("geometry checked before assembly");
                for (b, &w) in mesh.simplex(k).vertices().iter().enumerate() {
                    if let Some(c) = cols.dof(w as usize) {
                        buf.push((c as u32, form.local(&g, a as usize, b)));
                    }
                }
            }
            // stable: equal columns keep element order
            buf.sort_by_key(|e| e.0);
            let mut c_out = Vec::with_capacity(buf.len() / 2);
            let mut v_out = Vec::with_capacity(buf.len() / 2);
            let mut i = 0;
            while i < buf.len() {
                let c = buf[i].0;
                let mut s = 0.0;
                while i < buf.len() && buf[i].0 == c {
                    s += buf[i].1;
                    i += 1;
                }
                if s.abs() >= DROP_TOL {
                    c_out.push(c);
                    v_out.push(s);
                }
            }
            (c_out, v_out)
        })
        .collect();
    let nnz = row_data.iter().map(|r| r.0.len()).sum();
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    offsets.push(0);
    let mut col_indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    for (c, v) in row_data {
        col_indices.extend_from_slice(&c);
        values.extend_from_slice(&v);
        offsets.push(values.len());
    }
    CsrMatrix::from_raw(rows.len(), cols.len(), offsets, col_indices, values)
        .expect("assembled rows are sorted")
}

/// Assembles `form` with rows from `rows` and columns from `cols`.
pub fn assemble_form(mesh: &Mesh, rows: &DofMap, cols: &DofMap, form: Form) -> Result<CsrMatrix> {
    check_geometry(mesh)?;
    Ok(assemble_with(mesh, &VertexElements::new(mesh), rows, cols, form))
}

pub fn assemble_a(mesh: &Mesh, dof_y: &DofMap) -> Result<CsrMatrix> {
    assemble_form(mesh, dof_y, dof_y, Form::Stiffness)
}

pub fn assemble_b(mesh: &Mesh, dof_x: &DofMap, dof_y: &DofMap) -> Result<CsrMatrix> {
    assemble_form(mesh, dof_y, dof_x, Form::Transport)
}

pub fn assemble_m(mesh: &Mesh, dof_x: &DofMap) -> Result<CsrMatrix> {
    assemble_form(mesh, dof_x, dof_x, Form::Mass)
}

/// How the load vector integrals are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LoadQuadrature {
    /// Rule order for smooth targets.
    pub smooth_order: usize,
    /// Subdivision depth and base order for non-smooth targets.
    pub rough_depth: usize,
    pub rough_order: usize,
}

impl Default for LoadQuadrature {
    fn default() -> Self {
        LoadQuadrature { smooth_order: 3, rough_depth: 4, rough_order: 2 }
    }
}

/// `int_K u_bar phi_a` for every local basis function of simplex `k`.
pub fn element_load(
    mesh: &Mesh,
    k: usize,
    target: &TargetSpec,
    quad: &LoadQuadrature,
) -> Result<[f64; MAX_DIM + 1]> {
    let d = mesh.dim();
    let x = mesh.simplex_coords(k);
    let vol = mesh.volume(k);
    let mut out = [0.0; MAX_DIM + 1];
    let mut visit = |p: &[f64], b: &[f64], w: f64| {
        let u = target.eval(p);
        if u != 0.0 {
            for a in 0..=d {
                out[a] += w * u * b[a];
            }
        }
    };
    if target.is_smooth() {
        quadrature::visit_points(&x, d, vol, 0, quad.smooth_order, |_| false, &mut visit)?;
    } else {
        quadrature::visit_points(
            &x,
            d,
            vol,
            quad.rough_depth,
            quad.rough_order,
            |c| target.may_be_rough_on(c),
            &mut visit,
        )?;
    }
    Ok(out)
}

/// Load vector on the unknowns of `dofs`.
pub fn assemble_load(
    mesh: &Mesh,
    dofs: &DofMap,
    target: &TargetSpec,
    quad: &LoadQuadrature,
) -> Result<Vec<f64>> {
    if target.dim() != mesh.dim() {
        return Err(Error::DimensionMismatch { expected: mesh.dim(), got: target.dim() });
    }
    let local: Vec<[f64; MAX_DIM + 1]> = (0..mesh.n_simplices())
        .into_par_iter()
        .map(|k| element_load(mesh, k, target, quad))
        .collect::<Result<_>>()?;
    let mut f = vec![0.0; dofs.len()];
    for (k, vals) in local.iter().enumerate() {
        for (a, &v) in mesh.simplex(k).vertices().iter().enumerate() {
            if let Some(i) = dofs.dof(v as usize) {
                f[i] += vals[a];
            }
        }
    }
    Ok(f)
}

/// The matrices and load vector of one discrete problem.
#[derive(Clone, Debug)]
pub struct AssembledOperators {
    /// `M_Y x M_Y`
    pub a: CsrMatrix,
    /// `M_Y x M_X`
    pub b: CsrMatrix,
    /// `M_X x M_X`
    pub m: CsrMatrix,
    /// length `M_X`
    pub f: Vec<f64>,
}

impl AssembledOperators {
    pub fn assemble(
        mesh: &Mesh,
        dof_x: &DofMap,
        dof_y: &DofMap,
        target: &TargetSpec,
        quad: &LoadQuadrature,
    ) -> Result<AssembledOperators> {
        check_geometry(mesh)?;
        let adj = VertexElements::new(mesh);
        let a = assemble_with(mesh, &adj, dof_y, dof_y, Form::Stiffness);
        let b = assemble_with(mesh, &adj, dof_y, dof_x, Form::Transport);
        let m = assemble_with(mesh, &adj, dof_x, dof_x, Form::Mass);
        let f = assemble_load(mesh, dof_x, target, quad)?;
        Ok(AssembledOperators { a, b, m, f })
    }
}
