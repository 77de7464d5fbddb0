//! Conforming simplicial meshes of the unit space-time hypercube.
//!
//! Meshes start from the Kuhn (Freudenthal) triangulation of a uniform grid:
//! every grid cell is split into `d!` simplices, one per path from the low to
//! the high cell corner. Local refinement uses tagged newest-vertex bisection
//! (Maubach's rule): a simplex `(x0, .., xd; k)` is split at the edge
//! `x0 -- xk`, and its children carry tag `k - 1` (or `d` once `k` reaches 1).
//! Kuhn simplices are created with tag `d`, so their first refinement edge is
//! the cell diagonal, which is the longest edge.
//!
//! All vertices are dyadic rationals and are stored as exact integer
//! numerators over `2^DYADIC_BITS`; midpoints are therefore deduplicated
//! without any floating-point tolerance.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::small::{determinant, factorial, MAX_DIM};

/// Denominator exponent of the dyadic vertex coordinates.
pub const DYADIC_BITS: u32 = 48;
const DYADIC_ONE: u64 = 1 << DYADIC_BITS;

/// Exact dyadic coordinates, numerators over `2^DYADIC_BITS`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicPoint(pub [u64; MAX_DIM]);

impl DyadicPoint {
    fn midpoint(&self, other: &DyadicPoint) -> Result<DyadicPoint> {
        let mut out = [0u64; MAX_DIM];
        for (k, o) in out.iter_mut().enumerate() {
            let sum = self.0[k] + other.0[k];
            if sum & 1 == 1 {
                return Err(Error::MeshCorruption(
                    "refinement exceeded dyadic coordinate resolution".into(),
                ));
            }
            *o = sum / 2;
        }
        Ok(DyadicPoint(out))
    }

    fn to_coords(self) -> [f64; MAX_DIM] {
        let mut c = [0.0; MAX_DIM];
        for (k, v) in c.iter_mut().enumerate() {
            *v = self.0[k] as f64 / DYADIC_ONE as f64;
        }
        c
    }
}

/// A simplex with its vertices in bisection order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Simplex {
    vertices: [u32; MAX_DIM + 1],
    n_vertices: u8,
    tag: u8,
    level: u16,
}

impl Simplex {
    pub fn new(vertices: &[u32], tag: u8, level: u16) -> Self {
        let mut v = [u32::MAX; MAX_DIM + 1];
        v[..vertices.len()].copy_from_slice(vertices);
        Simplex {
            vertices: v,
            n_vertices: vertices.len() as u8,
            tag,
            level,
        }
    }

    #[inline]
    pub fn vertices(&self) -> &[u32] {
        &self.vertices[..self.n_vertices as usize]
    }

    /// Local vertex indices of the edge this simplex is bisected at.
    pub fn refinement_edge(&self) -> (usize, usize) {
        (0, self.tag as usize)
    }

    pub fn tag(&self) -> u8 {
        self.tag
    }

    /// Number of bisections separating this simplex from the initial mesh.
    pub fn level(&self) -> u16 {
        self.level
    }

    fn bisect(&self, dim: usize, mid: u32) -> (Simplex, Simplex) {
        let k = self.tag as usize;
        let x = self.vertices();
        let next_tag = if k > 1 { k - 1 } else { dim } as u8;
        let mut a = [u32::MAX; MAX_DIM + 1];
        let mut b = [u32::MAX; MAX_DIM + 1];
        // (x0, .., x_{k-1}, z, x_{k+1}, .., xd) and (x1, .., xk, z, x_{k+1}, .., xd)
        a[..k].copy_from_slice(&x[..k]);
        a[k] = mid;
        b[..k].copy_from_slice(&x[1..=k]);
        b[k] = mid;
        for j in k + 1..=dim {
            a[j] = x[j];
            b[j] = x[j];
        }
        let mk = |v: [u32; MAX_DIM + 1]| Simplex {
            vertices: v,
            n_vertices: self.n_vertices,
            tag: next_tag,
            level: self.level + 1,
        };
        (mk(a), mk(b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum BoundaryTag {
    Lateral,
    Initial,
    Terminal,
    Interior,
}

/// Sorted vertex ids of a `(d-1)`-facet, padded with `u32::MAX`.
pub type FacetKey = [u32; MAX_DIM];

/// Boundary classification of all facets of a mesh.
#[derive(Clone, Debug)]
pub struct FacetTags {
    boundary: Vec<(FacetKey, BoundaryTag)>,
    interior_count: usize,
}

impl FacetTags {
    /// Tag of a facet given by its vertex ids (any order). Facets that are
    /// not on the boundary are reported as `Interior`.
    pub fn tag(&self, facet: &[u32]) -> BoundaryTag {
        let key = facet_key(facet);
        match self.boundary.binary_search_by(|(k, _)| k.cmp(&key)) {
            Ok(i) => self.boundary[i].1,
            Err(_) => BoundaryTag::Interior,
        }
    }

    pub fn boundary_facets(&self) -> &[(FacetKey, BoundaryTag)] {
        &self.boundary
    }

    pub fn count(&self, tag: BoundaryTag) -> usize {
        if tag == BoundaryTag::Interior {
            self.interior_count
        } else {
            self.boundary.iter().filter(|(_, t)| *t == tag).count()
        }
    }
}

fn facet_key(facet: &[u32]) -> FacetKey {
    let mut key = [u32::MAX; MAX_DIM];
    key[..facet.len()].copy_from_slice(facet);
    key[..facet.len()].sort_unstable();
    key
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum MeshOrigin {
    Kuhn { cells_per_axis: usize },
    Refined,
}

/// Summary produced by [`Mesh::audit`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct MeshAudit {
    pub interior_facets: usize,
    pub boundary_facets: usize,
    pub volume_sum: f64,
}

/// A conforming simplicial mesh of `(0,1)^d`. Immutable after construction.
#[derive(Debug)]
pub struct Mesh {
    dim: usize,
    points: Vec<DyadicPoint>,
    coords: Vec<[f64; MAX_DIM]>,
    simplices: Vec<Simplex>,
    origin: MeshOrigin,
    h_max: f64,
    facet_tags: OnceLock<FacetTags>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Mesh {
            dim: self.dim,
            points: self.points.clone(),
            coords: self.coords.clone(),
            simplices: self.simplices.clone(),
            origin: self.origin,
            h_max: self.h_max,
            facet_tags: OnceLock::new(),
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (2..=4).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(factorial(n));
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
    }
    out
}

fn permutation_rank(p: &[usize]) -> usize {
    let n = p.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = p[i + 1..].iter().filter(|&&q| q < p[i]).count();
        rank += smaller * factorial(n - 1 - i);
    }
    rank
}

impl Mesh {
    /// Kuhn triangulation of `(0,1)^d` with `m` cells per axis:
    /// `(m+1)^d` vertices and `d! m^d` simplices.
    pub fn kuhn(d: usize, m: usize) -> Result<Mesh> {
        check_dim(d)?;
        if m == 0 {
            return Err(Error::InvalidArgument("cells per axis must be positive".into()));
        }
        let n1 = m + 1;
        let nv = n1.pow(d as u32);
        let step = DYADIC_ONE as u128;
        let mut points = Vec::with_capacity(nv);
        for idx in 0..nv {
            let mut p = [0u64; MAX_DIM];
            let mut r = idx;
            for c in p.iter_mut().take(d) {
                let i = (r % n1) as u128;
                r /= n1;
                // exact when m is a power of two; otherwise rounded to the dyadic grid
                *c = ((i * step + (m as u128) / 2) / m as u128) as u64;
            }
            points.push(DyadicPoint(p));
        }
        let coords = kuhn_coords(d, m, nv);
        let perms = permutations(d);
        let strides: Vec<usize> = (0..d).map(|k| n1.pow(k as u32)).collect();
        let ncell = m.pow(d as u32);
        let mut simplices = Vec::with_capacity(ncell * perms.len());
        let mut verts = [0u32; MAX_DIM + 1];
        for cell in 0..ncell {
            let mut base = 0;
            let mut r = cell;
            for s in &strides {
                base += (r % m) * s;
                r /= m;
            }
            for perm in &perms {
                let mut v = base;
                verts[0] = v as u32;
                for (j, &axis) in perm.iter().enumerate() {
                    v += strides[axis];
                    verts[j + 1] = v as u32;
                }
                simplices.push(Simplex::new(&verts[..=d], d as u8, 0));
            }
        }
        Ok(Mesh {
            dim: d,
            points,
            coords,
            simplices,
            origin: MeshOrigin::Kuhn { cells_per_axis: m },
            h_max: (d as f64).sqrt() / m as f64,
            facet_tags: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn n_simplices(&self) -> usize {
        self.simplices.len()
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn simplex(&self, k: usize) -> &Simplex {
        &self.simplices[k]
    }

    /// Coordinates of vertex `i`; the last entry is time.
    #[inline]
    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i][..self.dim]
    }

    pub fn dyadic_vertex(&self, i: usize) -> DyadicPoint {
        self.points[i]
    }

    pub fn origin(&self) -> MeshOrigin {
        self.origin
    }

    /// Largest simplex diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Axis scale `1/m` of Kuhn meshes; for refined meshes the smallest
    /// `diameter / sqrt(d)` over all simplices.
    pub fn h_axis_min(&self) -> f64 {
        match self.origin {
            MeshOrigin::Kuhn { cells_per_axis } => 1.0 / cells_per_axis as f64,
            MeshOrigin::Refined => {
                let dmin = (0..self.n_simplices())
                    .map(|k| self.diameter(k))
                    .fold(f64::INFINITY, f64::min);
                dmin / (self.dim as f64).sqrt()
            }
        }
    }

    /// Vertex coordinates of simplex `k`, padded to `MAX_DIM + 1` rows.
    #[inline]
    pub fn simplex_coords(&self, k: usize) -> [[f64; MAX_DIM]; MAX_DIM + 1] {
        let mut out = [[0.0; MAX_DIM]; MAX_DIM + 1];
        for (row, &v) in out.iter_mut().zip(self.simplices[k].vertices()) {
            *row = self.coords[v as usize];
        }
        out
    }

    pub fn signed_volume(&self, k: usize) -> f64 {
        let x = self.simplex_coords(k);
        let d = self.dim;
        let mut j = [[0.0; MAX_DIM]; MAX_DIM];
        for r in 0..d {
            for c in 0..d {
                j[r][c] = x[c + 1][r] - x[0][r];
            }
        }
        determinant(&j, d) / factorial(d) as f64
    }

    pub fn volume(&self, k: usize) -> f64 {
        self.signed_volume(k).abs()
    }

    pub fn diameter(&self, k: usize) -> f64 {
        let x = self.simplex_coords(k);
        let mut best: f64 = 0.0;
        for a in 0..=self.dim {
            for b in a + 1..=self.dim {
                let l2: f64 = (0..self.dim).map(|c| (x[a][c] - x[b][c]).powi(2)).sum();
                best = best.max(l2);
            }
        }
        best.sqrt()
    }

    /// Shape quality `inradius / diameter` of simplex `k`.
    pub fn quality(&self, k: usize) -> f64 {
        let d = self.dim;
        let x = self.simplex_coords(k);
        let mut area_sum = 0.0;
        for skip in 0..=d {
            let rows: Vec<usize> = (0..=d).filter(|&r| r != skip).collect();
            // Gram determinant of the facet edge vectors
            let mut g = [[0.0; MAX_DIM]; MAX_DIM];
            for a in 1..d {
                for b in 1..d {
                    g[a - 1][b - 1] = (0..d)
                        .map(|c| (x[rows[a]][c] - x[rows[0]][c]) * (x[rows[b]][c] - x[rows[0]][c]))
                        .sum();
                }
            }
            area_sum += determinant(&g, d - 1).max(0.0).sqrt() / factorial(d - 1) as f64;
        }
        let inradius = d as f64 * self.volume(k) / area_sum;
        inradius / self.diameter(k)
    }

    pub fn min_quality(&self) -> f64 {
        (0..self.n_simplices())
            .map(|k| self.quality(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Sum of simplex volumes (Neumaier-compensated).
    pub fn total_volume(&self) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in 0..self.n_simplices() {
            let v = self.volume(k);
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    /// Boundary tags of all facets, computed on first use.
    pub fn facet_tags(&self) -> Result<&FacetTags> {
        if let Some(t) = self.facet_tags.get() {
            return Ok(t);
        }
        let tags = classify_boundary(self)?;
        Ok(self.facet_tags.get_or_init(|| tags))
    }

    /// Which boundary parts vertex `i` lies on, derived from its exact
    /// coordinates: `(lateral, initial, terminal)`.
    pub fn vertex_boundary(&self, i: usize) -> (bool, bool, bool) {
        let p = &self.points[i].0;
        let d = self.dim;
        let lateral = p[..d - 1].iter().any(|&c| c == 0 || c == DYADIC_ONE);
        (lateral, p[d - 1] == 0, p[d - 1] == DYADIC_ONE)
    }

    /// Checks conformity, the volume partition of the unit cube and tag
    /// completeness.
    pub fn audit(&self) -> Result<MeshAudit> {
        let tags = self.facet_tags()?;
        if tags.boundary.iter().any(|(_, t)| *t == BoundaryTag::Interior) {
            return Err(Error::MeshCorruption("boundary facet tagged Interior".into()));
        }
        let volume_sum = self.total_volume();
        if (volume_sum - 1.0).abs() > 1e-12 {
            return Err(Error::MeshCorruption(format!(
                "simplex volumes sum to {volume_sum}, expected 1"
            )));
        }
        for k in 0..self.n_simplices() {
            if self.volume(k) <= 0.0 {
                return Err(Error::DegenerateSimplex(k));
            }
        }
        Ok(MeshAudit {
            interior_facets: tags.interior_count,
            boundary_facets: tags.boundary.len(),
            volume_sum,
        })
    }

    /// Index of a simplex containing `point` together with its barycentric
    /// coordinates.
    pub fn locate(&self, point: &[f64]) -> Result<(usize, [f64; MAX_DIM + 1])> {
        let d = self.dim;
        if point.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: point.len() });
        }
        if point.iter().any(|&c| !(0.0..=1.0).contains(&c) || c.is_nan()) {
            return Err(Error::PointOutside);
        }
        if let MeshOrigin::Kuhn { cells_per_axis: m } = self.origin {
            let mut cell = 0;
            let mut stride = 1;
            let mut frac = [0.0; MAX_DIM];
            for c in 0..d {
                let s = point[c] * m as f64;
                let i = (s.floor() as usize).min(m - 1);
                frac[c] = s - i as f64;
                cell += i * stride;
                stride *= m;
            }
            let mut perm: Vec<usize> = (0..d).collect();
            perm.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
            let k = cell * factorial(d) + permutation_rank(&perm);
            let bary = self.barycentric(k, point);
            return Ok((k, bary));
        }
        let tol = 1e-12;
        for k in 0..self.n_simplices() {
            let x = self.simplex_coords(k);
            let outside_box = (0..d).any(|c| {
                let lo = x[..=d].iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
                let hi = x[..=d].iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
                point[c] < lo - tol || point[c] > hi + tol
            });
            if outside_box {
                continue;
            }
            let bary = self.barycentric(k, point);
            if bary[..=d].iter().all(|&b| b >= -tol) {
                return Ok((k, bary));
            }
        }
        Err(Error::PointOutside)
    }

    /// Barycentric coordinates of `point` with respect to simplex `k`.
    pub fn barycentric(&self, k: usize, point: &[f64]) -> [f64; MAX_DIM + 1] {
        let d = self.dim;
        let x = self.simplex_coords(k);
        let mut j = [[0.0; MAX_DIM]; MAX_DIM];
        for r in 0..d {
            for c in 0..d {
                j[r][c] = x[c + 1][r] - x[0][r];
            }
        }
        let (_, inv) = crate::small::det_and_inverse(&j, d).expect("non-degenerate simplex");
        let mut out = [0.0; MAX_DIM + 1];
        let mut s = 0.0;
        for i in 0..d {
            let mut v = 0.0;
            for c in 0..d {
                v += inv[i][c] * (point[c] - x[0][c]);
            }
            out[i + 1] = v;
            s += v;
        }
        out[0] = 1.0 - s;
        out
    }

    /// One uniform refinement step halving the mesh size.
    ///
    /// Kuhn meshes are rebuilt with twice as many cells per axis; other
    /// meshes receive `d` sweeps of bisection of every simplex.
    pub fn refine_uniform(&self) -> Result<Mesh> {
        match self.origin {
            MeshOrigin::Kuhn { cells_per_axis } => Mesh::kuhn(self.dim, 2 * cells_per_axis),
            MeshOrigin::Refined => {
                let mut mesh = self.clone();
                for _ in 0..self.dim {
                    let all: Vec<usize> = (0..mesh.n_simplices()).collect();
                    mesh = mesh.refine_bisection(&all)?;
                }
                Ok(mesh)
            }
        }
    }

    /// Bisects every marked simplex and closes the result to a conforming
    /// mesh by bisecting simplices with hanging edge midpoints.
    pub fn refine_bisection(&self, marked: &[usize]) -> Result<Mesh> {
        let n = self.n_simplices();
        if let Some(&bad) = marked.iter().find(|&&k| k >= n) {
            return Err(Error::InvalidArgument(format!("simplex id {bad} out of range")));
        }
        if marked.is_empty() {
            return Ok(self.clone());
        }
        let d = self.dim;
        let mut points = self.points.clone();
        let mut lookup: HashMap<DyadicPoint, u32> =
            points.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();
        let mut current = self.simplices.clone();
        let mut flags = vec![false; n];
        for &k in marked {
            flags[k] = true;
        }
        let cap = 100 * n;
        let mut bisections = 0usize;
        loop {
            let mut next = Vec::with_capacity(current.len() + flags.iter().filter(|&&f| f).count());
            for (s, &flag) in current.iter().zip(&flags) {
                if !flag {
                    next.push(*s);
                    continue;
                }
                let (a, b) = s.refinement_edge();
                let pa = points[s.vertices()[a] as usize];
                let pb = points[s.vertices()[b] as usize];
                let mid = pa.midpoint(&pb)?;
                let id = *lookup.entry(mid).or_insert_with(|| {
                    points.push(mid);
                    (points.len() - 1) as u32
                });
                let (c0, c1) = s.bisect(d, id);
                next.push(c0);
                next.push(c1);
                bisections += 1;
            }
            if bisections > cap {
                return Err(Error::MeshCorruption(
                    "bisection closure did not terminate".into(),
                ));
            }
            current = next;
            flags = current
                .iter()
                .map(|s| has_hanging_edge(s, &points, &lookup))
                .collect::<Result<Vec<bool>>>()?;
            if !flags.iter().any(|&f| f) {
                break;
            }
        }
        let coords: Vec<[f64; MAX_DIM]> = points.iter().map(|p| p.to_coords()).collect();
        let mut mesh = Mesh {
            dim: d,
            points,
            coords,
            simplices: current,
            origin: MeshOrigin::Refined,
            h_max: 0.0,
            facet_tags: OnceLock::new(),
        };
        mesh.h_max = (0..mesh.n_simplices())
            .map(|k| mesh.diameter(k))
            .fold(0.0, f64::max);
        Ok(mesh)
    }
}

fn kuhn_coords(d: usize, m: usize, nv: usize) -> Vec<[f64; MAX_DIM]> {
    let n1 = m + 1;
    (0..nv)
        .map(|idx| {
            let mut c = [0.0; MAX_DIM];
            let mut r = idx;
            for v in c.iter_mut().take(d) {
                *v = (r % n1) as f64 / m as f64;
                r /= n1;
            }
            c
        })
        .collect()
}

fn has_hanging_edge(
    s: &Simplex,
    points: &[DyadicPoint],
    lookup: &HashMap<DyadicPoint, u32>,
) -> Result<bool> {
    let v = s.vertices();
    for a in 0..v.len() {
        for b in a + 1..v.len() {
            let mid = points[v[a] as usize].midpoint(&points[v[b] as usize])?;
            if lookup.contains_key(&mid) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Tags every facet with exactly one incident simplex as lateral, initial
/// or terminal boundary; facets shared by two simplices are interior.
pub fn classify_boundary(mesh: &Mesh) -> Result<FacetTags> {
    let d = mesh.dim;
    let mut facets: Vec<FacetKey> = Vec::with_capacity(mesh.n_simplices() * (d + 1));
    let mut buf = [0u32; MAX_DIM];
    for s in &mesh.simplices {
        let v = s.vertices();
        for skip in 0..=d {
            let mut j = 0;
            for (i, &vi) in v.iter().enumerate() {
                if i != skip {
                    buf[j] = vi;
                    j += 1;
                }
            }
            facets.push(facet_key(&buf[..d]));
        }
    }
    facets.sort_unstable();
    let mut boundary = Vec::new();
    let mut interior_count = 0;
    let mut i = 0;
    while i < facets.len() {
        let mut j = i + 1;
        while j < facets.len() && facets[j] == facets[i] {
            j += 1;
        }
        match j - i {
            1 => {
                let key = facets[i];
                let tag = tag_boundary_facet(mesh, &key[..d]).ok_or_else(|| {
                    Error::Geometry(format!(
                        "facet {:?} has one incident simplex but lies on no boundary face",
                        &key[..d]
                    ))
                })?;
                boundary.push((key, tag));
            }
            2 => interior_count += 1,
            c => {
                return Err(Error::MeshCorruption(format!(
                    "facet {:?} shared by {c} simplices",
                    &facets[i][..d]
                )))
            }
        }
        i = j;
    }
    Ok(FacetTags { boundary, interior_count })
}

fn tag_boundary_facet(mesh: &Mesh, facet: &[u32]) -> Option<BoundaryTag> {
    let d = mesh.dim;
    let on_plane = |axis: usize, value: u64| {
        facet.iter().all(|&v| mesh.points[v as usize].0[axis] == value)
    };
    if (0..d - 1).any(|axis| on_plane(axis, 0) || on_plane(axis, DYADIC_ONE)) {
        Some(BoundaryTag::Lateral)
    } else if on_plane(d - 1, 0) {
        Some(BoundaryTag::Initial)
    } else if on_plane(d - 1, DYADIC_ONE) {
        Some(BoundaryTag::Terminal)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kuhn_counts() {
        let m = Mesh::kuhn(2, 1).unwrap();
        assert_eq!((m.n_vertices(), m.n_simplices()), (4, 2));
        assert!((m.total_volume() - 1.0).abs() < 1e-15);
        let m = Mesh::kuhn(3, 2).unwrap();
        assert_eq!((m.n_vertices(), m.n_simplices()), (27, 48));
        let m = Mesh::kuhn(4, 2).unwrap();
        assert_eq!((m.n_vertices(), m.n_simplices()), (81, 384));
        // independent volume sum: |det| of the edge matrix of every simplex
        let mut vol = 0.0;
        for k in 0..m.n_simplices() {
            let x = m.simplex_coords(k);
            let mut a = [[0.0; 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    a[r][c] = x[r + 1][c] - x[0][c];
                }
            }
            vol += determinant(&a, 4).abs() / 24.0;
        }
        assert!((vol - 1.0).abs() < 1e-12);
        assert_eq!(m.h_max(), 1.0);
    }

    #[test]
    fn kuhn_rejects_bad_input() {
        assert!(matches!(Mesh::kuhn(5, 2), Err(Error::UnsupportedDimension(5))));
        assert!(matches!(Mesh::kuhn(1, 2), Err(Error::UnsupportedDimension(1))));
        assert!(Mesh::kuhn(3, 0).is_err());
    }

    #[test]
    fn uniform_refinement_of_kuhn() {
        let m = Mesh::kuhn(2, 2).unwrap().refine_uniform().unwrap();
        assert!((m.h_max() - 2.0f64.sqrt() / 4.0).abs() < 1e-15);
        let m = Mesh::kuhn(3, 1).unwrap().refine_uniform().unwrap();
        assert_eq!(m.n_simplices(), 48);
        m.audit().unwrap();
    }

    #[test]
    fn uniform_refinement_of_refined_mesh_halves_diameters() {
        for d in 2..=4 {
            let base = Mesh::kuhn(d, 1).unwrap().refine_bisection(&[0]).unwrap();
            let fine = base.refine_uniform().unwrap();
            fine.audit().unwrap();
            assert_eq!(fine.n_simplices(), base.n_simplices() << d);
            assert!(fine.h_max() < base.h_max());
        }
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = Mesh::kuhn(3, 2).unwrap();
        let r = m.refine_bisection(&[]).unwrap();
        assert_eq!(r.simplices(), m.simplices());
        assert_eq!(r.n_vertices(), m.n_vertices());
    }

    #[test]
    fn bisecting_both_triangles() {
        let m = Mesh::kuhn(2, 1).unwrap().refine_bisection(&[0, 1]).unwrap();
        assert_eq!(m.n_simplices(), 4);
        assert_eq!(m.n_vertices(), 5);
        m.audit().unwrap();
    }

    #[test]
    fn single_tetrahedron_closure_is_conforming() {
        let m = Mesh::kuhn(3, 1).unwrap().refine_bisection(&[2]).unwrap();
        m.audit().unwrap();
        assert!(m.n_simplices() > 6);
    }

    #[test]
    fn out_of_range_mark_rejected() {
        let m = Mesh::kuhn(2, 1).unwrap();
        assert!(m.refine_bisection(&[5]).is_err());
    }

    #[test]
    fn boundary_tags_on_unit_square() {
        let m = Mesh::kuhn(2, 1).unwrap();
        let tags = m.facet_tags().unwrap();
        // vertex ids: 0=(0,0), 1=(1,0), 2=(0,1), 3=(1,1); time is the second axis
        assert_eq!(tags.tag(&[0, 2]), BoundaryTag::Lateral);
        assert_eq!(tags.tag(&[0, 1]), BoundaryTag::Initial);
        assert_eq!(tags.tag(&[2, 3]), BoundaryTag::Terminal);
        assert_eq!(tags.tag(&[0, 3]), BoundaryTag::Interior);
    }

    #[test]
    fn initial_facet_count_matches_enumeration() {
        for (d, m) in [(2, 2), (3, 2), (3, 3), (4, 2)] {
            let mesh = Mesh::kuhn(d, m).unwrap();
            let tags = mesh.facet_tags().unwrap();
            // enumerate facets with every vertex at t = 0 directly
            let mut expected = 0;
            for s in mesh.simplices() {
                let v = s.vertices();
                for skip in 0..=d {
                    if v.iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .all(|(_, &vi)| mesh.vertex(vi as usize)[d - 1] == 0.0)
                    {
                        expected += 1;
                    }
                }
            }
            let formula = factorial(d - 1) * m.pow(d as u32 - 1);
            assert_eq!(tags.count(BoundaryTag::Initial), expected);
            assert_eq!(expected, formula);
        }
    }

    #[test]
    fn locate_kuhn_and_refined() {
        let mesh = Mesh::kuhn(3, 4).unwrap();
        let refined = mesh.refine_bisection(&[0, 7, 100]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            for m in [&mesh, &refined] {
                let (k, bary) = m.locate(&p).unwrap();
                assert!(bary.iter().take(4).all(|&b| b > -1e-12), "{k}");
                let x = m.simplex_coords(k);
                for c in 0..3 {
                    let rec: f64 = (0..4).map(|i| bary[i] * x[i][c]).sum();
                    assert!((rec - p[c]).abs() < 1e-12);
                }
            }
        }
        assert!(matches!(mesh.locate(&[0.5, 1.5, 0.5]), Err(Error::PointOutside)));
    }

    #[test]
    fn random_bisection_keeps_quality_bounded() {
        for d in 2..=4 {
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
            let mut mesh = Mesh::kuhn(d, 2).unwrap();
            let mut floor = f64::INFINITY;
            for round in 0..10 {
                let marks: Vec<usize> = (0..mesh.n_simplices())
                    .filter(|_| rng.gen_bool(0.1))
                    .collect();
                mesh = mesh.refine_bisection(&marks).unwrap();
                mesh.audit().unwrap();
                let q = mesh.min_quality();
                if round < 2 {
                    floor = floor.min(q);
                } else {
                    assert!(q >= floor * (1.0 - 1e-12), "d={d} round {round}: {q} < {floor}");
                }
            }
        }
    }

    #[test]
    fn permutation_ranks_roundtrip() {
        for (i, p) in permutations(4).iter().enumerate() {
            assert_eq!(permutation_rank(p), i);
        }
    }
}
