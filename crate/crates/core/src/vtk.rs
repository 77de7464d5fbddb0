//! Legacy ASCII VTK export.
//!
//! Triangles and tetrahedra are written as they are. A four-dimensional mesh
//! is cut by the hyperplane `t = 0.5` and the resulting polytopes are split
//! into tetrahedra; point data is interpolated linearly along cut edges and
//! cell data is inherited from the parent pentatope.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::ocp::{OcpProblem, OcpSolution};

const VTK_TRIANGLE: u8 = 5;
const VTK_TETRA: u8 = 10;

pub const SLICE_TIME: f64 = 0.5;

/// `u`, `p` and `z_nodal` on all vertices.
pub fn solution_fields(problem: &OcpProblem, sol: &OcpSolution) -> Result<Vec<(String, Vec<f64>)>> {
    Ok(vec![
        ("u".into(), problem.dof_x().prolongate(&sol.u)?),
        ("p".into(), problem.dof_y().prolongate(&sol.p)?),
        ("z_nodal".into(), problem.dof_y().prolongate(&sol.z_nodal)?),
    ])
}

/// Linear cell geometry in three space coordinates.
#[derive(Clone, Debug, Default)]
pub struct VtkGrid {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_type: u8,
    /// For each point, `(a, b, s)`: the point is `(1 - s) x_a + s x_b`.
    pub point_source: Vec<(usize, usize, f64)>,
    /// Parent simplex of each cell.
    pub cell_source: Vec<usize>,
}

impl VtkGrid {
    pub fn from_mesh(mesh: &Mesh) -> Result<VtkGrid> {
        match mesh.dim() {
            2 | 3 => {
                let points = (0..mesh.n_vertices())
                    .map(|i| {
                        let x = mesh.vertex(i);
                        [x[0], x[1], if mesh.dim() == 3 { x[2] } else { 0.0 }]
                    })
                    .collect();
                Ok(VtkGrid {
                    points,
                    cells: mesh.simplices().iter().map(|s| s.vertices().iter().map(|&v| v as usize).collect()).collect(),
                    cell_type: if mesh.dim() == 2 { VTK_TRIANGLE } else { VTK_TETRA },
                    point_source: (0..mesh.n_vertices()).map(|i| (i, i, 0.0)).collect(),
                    cell_source: (0..mesh.n_simplices()).collect(),
                })
            }
            4 => slice_4d(mesh, SLICE_TIME),
            d => Err(Error::UnsupportedDimension(d)),
        }
    }

    fn interpolate(&self, field: &[f64]) -> Vec<f64> {
        self.point_source.iter().map(|&(a, b, s)| (1.0 - s) * field[a] + s * field[b]).collect()
    }
}

/// Cuts every pentatope with `t = time`.
pub fn slice_4d(mesh: &Mesh, time: f64) -> Result<VtkGrid> {
    if mesh.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: mesh.dim() });
    }
    let tol = 1e-12;
    let mut grid = VtkGrid { cell_type: VTK_TETRA, ..Default::default() };
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut facets_done: HashMap<[u32; 4], ()> = HashMap::new();
    let mut point = |grid: &mut VtkGrid, a: usize, b: usize| -> usize {
        let key = (a.min(b), a.max(b));
        *index.entry(key).or_insert_with(|| {
            let (a, b) = key;
            let (ta, tb) = (mesh.vertex(a)[3], mesh.vertex(b)[3]);
            let s = if a == b { 0.0 } else { (time - ta) / (tb - ta) };
            let (xa, xb) = (mesh.vertex(a), mesh.vertex(b));
            grid.points.push([0, 1, 2].map(|i| (1.0 - s) * xa[i] + s * xb[i]));
            grid.point_source.push((a, b, s));
            grid.points.len() - 1
        })
    };
    for (k, simplex) in mesh.simplices().iter().enumerate() {
        let vs: Vec<usize> = simplex.vertices().iter().map(|&v| v as usize).collect();
        let (mut on, mut above, mut below) = (Vec::new(), Vec::new(), Vec::new());
        for &v in &vs {
            let t = mesh.vertex(v)[3];
            if (t - time).abs() <= tol {
                on.push(v);
            } else if t > time {
                above.push(v);
            } else {
                below.push(v);
            }
        }
        if on.len() == 4 {
            // shared facet: emit once
            let mut key = [on[0] as u32, on[1] as u32, on[2] as u32, on[3] as u32];
            key.sort_unstable();
            if facets_done.insert(key, ()).is_none() {
                let tet = on.iter().map(|&v| point(&mut grid, v, v)).collect();
                grid.cells.push(tet);
                grid.cell_source.push(k);
            }
            continue;
        }
        if above.is_empty() || below.is_empty() {
            continue;
        }
        let (small, large) = if above.len() <= below.len() { (&above, &below) } else { (&below, &above) };
        let on_pts: Vec<usize> = on.iter().map(|&v| point(&mut grid, v, v)).collect();
        let mut tets: Vec<Vec<usize>> = Vec::new();
        match (on.len(), small.len(), large.len()) {
            // one edge endpoint against a larger side: a tetrahedron
            (0, 1, 4) | (1, 1, 3) | (2, 1, 2) | (3, 1, 1) => {
                let mut t = on_pts.clone();
                t.extend(large.iter().map(|&b| point(&mut grid, small[0], b)));
                tets.push(t);
            }
            // pyramid over the quadrilateral cut from a 2-2 tetrahedron
            (1, 2, 2) => {
                let q = [
                    point(&mut grid, small[0], large[0]),
                    point(&mut grid, small[0], large[1]),
                    point(&mut grid, small[1], large[1]),
                    point(&mut grid, small[1], large[0]),
                ];
                tets.push(vec![on_pts[0], q[0], q[1], q[2]]);
                tets.push(vec![on_pts[0], q[0], q[2], q[3]]);
            }
            // triangular prism
            (0, 2, 3) => {
                let a: Vec<usize> = large.iter().map(|&b| point(&mut grid, small[0], b)).collect();
                let b: Vec<usize> = large.iter().map(|&v| point(&mut grid, small[1], v)).collect();
                tets.push(vec![a[0], a[1], a[2], b[2]]);
                tets.push(vec![a[0], a[1], b[1], b[2]]);
                tets.push(vec![a[0], b[0], b[1], b[2]]);
            }
            _ => {}
        }
        for t in tets {
            grid.cells.push(t);
            grid.cell_source.push(k);
        }
    }
    Ok(grid)
}

/// Writes `mesh` with vertex fields and simplex fields.
pub fn write_vtk(
    mesh: &Mesh,
    title: &str,
    point_data: &[(String, Vec<f64>)],
    cell_data: &[(String, Vec<f64>)],
    w: &mut impl Write,
) -> Result<()> {
    for (name, v) in point_data {
        if v.len() != mesh.n_vertices() {
            return Err(Error::InvalidArgument(format!(
                "point field '{name}' has {} values for {} vertices",
                v.len(),
                mesh.n_vertices()
            )));
        }
    }
    for (name, v) in cell_data {
        if v.len() != mesh.n_simplices() {
            return Err(Error::InvalidArgument(format!(
                "cell field '{name}' has {} values for {} simplices",
                v.len(),
                mesh.n_simplices()
            )));
        }
    }
    let grid = VtkGrid::from_mesh(mesh)?;
    let title: String = title.chars().filter(|c| *c != '\n').take(250).collect();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", grid.points.len())?;
    for p in &grid.points {
        writeln!(w, "{:e} {:e} {:e}", p[0], p[1], p[2])?;
    }
    let size: usize = grid.cells.iter().map(|c| c.len() + 1).sum();
    writeln!(w, "CELLS {} {}", grid.cells.len(), size)?;
    for c in &grid.cells {
        write!(w, "{}", c.len())?;
        for v in c {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {}", grid.cells.len())?;
    for _ in &grid.cells {
        writeln!(w, "{}", grid.cell_type)?;
    }
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", grid.points.len())?;
        for (name, v) in point_data {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for x in grid.interpolate(v) {
                writeln!(w, "{x:e}")?;
            }
        }
    }
    if !cell_data.is_empty() {
        writeln!(w, "CELL_DATA {}", grid.cells.len())?;
        for (name, v) in cell_data {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for &k in &grid.cell_source {
                writeln!(w, "{:e}", v[k])?;
            }
        }
    }
    Ok(())
}
