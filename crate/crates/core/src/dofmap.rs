//! Vertex-to-unknown numbering for the state space `X_h` and the adjoint
//! space `Y_h`.
//!
//! `X_h` vanishes on the lateral boundary and at `t = 0`; `Y_h` vanishes on
//! the lateral boundary only. Vertices at `t = 1` are unknowns in both.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum SpaceRole {
    X,
    Y,
}

const CONSTRAINED: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct DofMap {
    role: SpaceRole,
    vertex_to_dof: Vec<u32>,
    dof_to_vertex: Vec<u32>,
}

impl DofMap {
    /// Numbers the free vertices of `mesh` in increasing vertex order.
    pub fn new(mesh: &Mesh, role: SpaceRole) -> DofMap {
        let n = mesh.n_vertices();
        let mut vertex_to_dof = vec![CONSTRAINED; n];
        let mut dof_to_vertex = Vec::with_capacity(n);
        for (v, slot) in vertex_to_dof.iter_mut().enumerate() {
            let (lateral, initial, _) = mesh.vertex_boundary(v);
            let constrained = match role {
                SpaceRole::X => lateral || initial,
                SpaceRole::Y => lateral,
            };
            if !constrained {
                *slot = dof_to_vertex.len() as u32;
                dof_to_vertex.push(v as u32);
            }
        }
        DofMap { role, vertex_to_dof, dof_to_vertex }
    }

    /// A map without constraints (every vertex is an unknown).
    pub fn free(mesh: &Mesh, role: SpaceRole) -> DofMap {
        let n = mesh.n_vertices() as u32;
        DofMap {
            role,
            vertex_to_dof: (0..n).collect(),
            dof_to_vertex: (0..n).collect(),
        }
    }

    pub fn role(&self) -> SpaceRole {
        self.role
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.dof_to_vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_vertex.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_to_dof.len()
    }

    /// Unknown index of vertex `v`, `None` when constrained.
    #[inline]
    pub fn dof(&self, v: usize) -> Option<usize> {
        match self.vertex_to_dof[v] {
            CONSTRAINED => None,
            d => Some(d as usize),
        }
    }

    #[inline]
    pub fn vertex(&self, dof: usize) -> usize {
        self.dof_to_vertex[dof] as usize
    }

    /// Picks the unknowns out of a vector indexed by vertex.
    pub fn restrict(&self, v_free: &[f64]) -> Result<Vec<f64>> {
        if v_free.len() != self.n_vertices() {
            return Err(Error::DimensionMismatch { expected: self.n_vertices(), got: v_free.len() });
        }
        Ok(self.dof_to_vertex.iter().map(|&v| v_free[v as usize]).collect())
    }

    /// Extends a vector of unknowns by zeros on constrained vertices.
    pub fn prolongate(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: v.len() });
        }
        let mut out = vec![0.0; self.n_vertices()];
        for (&vert, &val) in self.dof_to_vertex.iter().zip(v) {
            out[vert as usize] = val;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_on_small_kuhn_meshes() {
        let mesh = Mesh::kuhn(2, 2).unwrap();
        let y = DofMap::new(&mesh, SpaceRole::Y);
        let x = DofMap::new(&mesh, SpaceRole::X);
        assert_eq!(mesh.n_vertices(), 9);
        assert_eq!(y.len(), 3);
        assert_eq!(x.len(), 2);
        // the free Y vertices form the x = 1/2 column
        for d in 0..y.len() {
            assert_eq!(mesh.vertex(y.vertex(d))[0], 0.5);
        }
    }

    #[test]
    fn counts_follow_the_grid_formula() {
        for (d, m) in [(2, 4), (3, 2), (3, 5), (4, 3)] {
            let mesh = Mesh::kuhn(d, m).unwrap();
            let y = DofMap::new(&mesh, SpaceRole::Y);
            let x = DofMap::new(&mesh, SpaceRole::X);
            // enumerate by coordinates
            let interior = |c: f64| c > 0.0 && c < 1.0;
            let mut ny = 0;
            let mut nx = 0;
            for v in 0..mesh.n_vertices() {
                let p = mesh.vertex(v);
                if p[..d - 1].iter().all(|&c| interior(c)) {
                    ny += 1;
                    if p[d - 1] > 0.0 {
                        nx += 1;
                    }
                }
            }
            assert_eq!(y.len(), ny);
            assert_eq!(x.len(), nx);
            assert_eq!(ny, (m + 1) * (m - 1).pow(d as u32 - 1));
            assert_eq!(nx, m * (m - 1).pow(d as u32 - 1));
            assert!(x.len() < y.len() && y.len() < mesh.n_vertices());
        }
    }

    #[test]
    fn terminal_vertices_are_free() {
        let mesh = Mesh::kuhn(3, 4).unwrap();
        let x = DofMap::new(&mesh, SpaceRole::X);
        let v = (0..mesh.n_vertices())
            .find(|&v| mesh.vertex(v) == [0.5, 0.5, 1.0])
            .unwrap();
        assert!(x.dof(v).is_some());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let mesh = Mesh::kuhn(2, 2).unwrap();
        let x = DofMap::new(&mesh, SpaceRole::X);
        assert!(x.restrict(&[1.0; 3]).is_err());
        assert!(x.prolongate(&[1.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn restrict_inverts_prolongate(vals in proptest::collection::vec(-10.0f64..10.0, 36)) {
            let mesh = Mesh::kuhn(3, 3).unwrap();
            for role in [SpaceRole::X, SpaceRole::Y] {
                let map = DofMap::new(&mesh, role);
                let w = &vals[..map.len()];
                let p = map.prolongate(w).unwrap();
                prop_assert_eq!(map.restrict(&p).unwrap(), w.to_vec());
                for v in 0..mesh.n_vertices() {
                    let (lat, init, _) = mesh.vertex_boundary(v);
                    let constrained = lat || (role == SpaceRole::X && init);
                    if constrained {
                        prop_assert_eq!(p[v], 0.0);
                    }
                }
                prop_assert!(map.prolongate(&vec![0.0; map.len()]).unwrap().iter().all(|&x| x == 0.0));
            }
        }
    }
}
