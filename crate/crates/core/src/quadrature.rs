//! Symmetric quadrature rules on simplices and recursive red subdivision
//! for integrands that are only piecewise smooth.
//!
//! Rules are stored in barycentric coordinates with weights summing to the
//! reference-simplex volume `1/d!`. All points lie strictly inside the
//! simplex, so integrands may jump across element faces.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::small::{factorial, MAX_DIM};

/// Barycentric coordinates of a quadrature point (first `d+1` entries used).
pub type Bary = [f64; MAX_DIM + 1];

/// Vertex coordinates of a simplex (first `d+1` rows, first `d` columns used).
pub type SimplexCoords = [[f64; MAX_DIM]; MAX_DIM + 1];

#[derive(Clone, Debug)]
pub struct QuadRule {
    dim: usize,
    order: usize,
    points: Vec<Bary>,
    weights: Vec<f64>,
}

impl QuadRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Bary] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies the rule on the reference simplex spanned by the origin and
    /// the unit vectors; `f` receives the Cartesian point.
    pub fn integrate_reference(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut x = [0.0; MAX_DIM];
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| {
                x[..self.dim].copy_from_slice(&b[1..=self.dim]);
                w * f(&x[..self.dim])
            })
            .sum()
    }
}

/// Points of the orbit of `bary` under all permutations of its entries.
fn orbit(bary: &[f64]) -> Vec<Bary> {
    let n = bary.len();
    let mut out: Vec<Bary> = Vec::new();
    for perm in crate::mesh::permutations(n) {
        let mut p = [0.0; MAX_DIM + 1];
        for (i, &j) in perm.iter().enumerate() {
            p[i] = bary[j];
        }
        if !out.iter().any(|q| q[..n] == p[..n]) {
            out.push(p);
        }
    }
    out
}

fn build(dim: usize, order: usize, orbits: &[(&[f64], f64)]) -> QuadRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (bary, w) in orbits {
        for p in orbit(bary) {
            points.push(p);
            weights.push(*w);
        }
    }
    let rule = QuadRule { dim, order, points, weights };
    let err = monomial_error(&rule, order);
    assert!(err < 1e-12, "quadrature rule d={dim} order={order} fails exactness ({err:e})");
    rule
}

fn s1(d: usize, a: f64) -> Vec<f64> {
    let mut v = vec![a; d + 1];
    v[0] = 1.0 - d as f64 * a;
    v
}

fn make_rule(dim: usize, order: usize) -> QuadRule {
    let centroid = vec![1.0 / (dim + 1) as f64; dim + 1];
    let vol = 1.0 / factorial(dim) as f64;
    match (dim, order) {
        (_, 1) => build(dim, 1, &[(&centroid, vol)]),
        (2, 2) => build(2, 2, &[(&s1(2, 1.0 / 6.0), 1.0 / 6.0)]),
        (2, 3) | (2, 4) => build(
            2,
            order,
            &[
                (&s1(2, 0.445_948_490_915_965), 0.223_381_589_678_011 / 2.0),
                (&s1(2, 0.091_576_213_509_771), 0.109_951_743_655_322 / 2.0),
            ],
        ),
        (3, 2) => build(3, 2, &[(&s1(3, 0.138_196_601_125_010_515_18), 1.0 / 24.0)]),
        (3, 3) => build(
            3,
            3,
            &[
                (&s1(3, 0.1), 0.016_369_233_213_599_006_407),
                (&s1(3, 0.327_648_508_860_636_276_29), 0.025_297_433_453_067_660_259),
            ],
        ),
        (3, 4) => {
            let a3 = 0.454_496_295_874_350_4;
            build(
                3,
                4,
                &[
                    (&s1(3, 0.092_735_250_310_891_2), 0.012_248_840_519_393_66),
                    (&s1(3, 0.310_885_919_263_300_6), 0.018_781_320_953_002_64),
                    (&[a3, a3, 0.5 - a3, 0.5 - a3], 0.007_091_003_462_846_911),
                ],
            )
        }
        (4, 2) => build(4, 2, &[(&s1(4, 0.118_350_341_907_227_396_73), 1.0 / 120.0)]),
        (4, 3) => {
            let (c, r) = (0.4, 1.0 / 15.0);
            build(
                4,
                3,
                &[
                    (&s1(4, 0.118_350_341_907_227_396_73), 0.004_896_817_214_849_756_059_1),
                    (&[c, c, r, r, r], 0.001_718_258_059_241_788_637_1),
                ],
            )
        }
        _ => unreachable!(),
    }
}

const MAX_ORDER: [usize; 5] = [0, 0, 4, 4, 3];

/// Symmetric rule on the reference `d`-simplex integrating every polynomial
/// of total degree `<= order` exactly.
pub fn rule(dim: usize, order: usize) -> Result<&'static QuadRule> {
    static RULES: OnceLock<Vec<Vec<QuadRule>>> = OnceLock::new();
    if !(2..=4).contains(&dim) || order == 0 || order > MAX_ORDER[dim] {
        return Err(Error::UnsupportedQuadrature { dim, order });
    }
    let table = RULES.get_or_init(|| {
        (0..=4)
            .map(|d| {
                if d < 2 {
                    Vec::new()
                } else {
                    (1..=MAX_ORDER[d]).map(|o| make_rule(d, o)).collect()
                }
            })
            .collect()
    });
    Ok(&table[dim][order - 1])
}

/// Exact integral of `x^alpha` over the reference simplex:
/// `alpha! / (|alpha| + d)!`.
pub fn monomial_integral(alpha: &[usize]) -> f64 {
    let d = alpha.len();
    let s: usize = alpha.iter().sum();
    // ratio of factorials computed as a product to stay finite
    let num: f64 = alpha.iter().map(|&a| factorial(a) as f64).product();
    let den: f64 = (1..=s + d).map(|k| k as f64).product();
    num / den
}

/// Largest relative error of `rule` over all monomials of degree `<= order`.
pub fn monomial_error(rule: &QuadRule, order: usize) -> f64 {
    let d = rule.dim;
    let mut worst: f64 = 0.0;
    let mut alpha = vec![0usize; d];
    loop {
        if alpha.iter().sum::<usize>() <= order {
            let q = rule.integrate_reference(|x| {
                x.iter().zip(&alpha).map(|(xi, &a)| xi.powi(a as i32)).product()
            });
            let exact = monomial_integral(&alpha);
            worst = worst.max((q - exact).abs() / exact);
        }
        // odometer over 0..=order per axis
        let mut i = 0;
        loop {
            if i == d {
                return worst;
            }
            alpha[i] += 1;
            if alpha[i] <= order {
                break;
            }
            alpha[i] = 0;
            i += 1;
        }
    }
}

/// Barycentric vertex coordinates of the `2^d` children of the red
/// (Freudenthal) subdivision of a `d`-simplex.
///
/// The children are the Kuhn simplices of the doubled grid that lie inside
/// the doubled reference Kuhn simplex `{1 >= y_0 >= .. >= y_{d-1} >= 0}`.
pub fn red_children(dim: usize) -> &'static [[Bary; MAX_DIM + 1]] {
    static CHILDREN: OnceLock<Vec<Vec<[Bary; MAX_DIM + 1]>>> = OnceLock::new();
    &CHILDREN.get_or_init(|| (0..=MAX_DIM).map(build_children).collect())[dim]
}

fn build_children(d: usize) -> Vec<[Bary; MAX_DIM + 1]> {
    if d < 2 {
        return Vec::new();
    }
    let perms = crate::mesh::permutations(d);
    let mut out = Vec::new();
    for corner in 0..(1usize << d) {
        for perm in &perms {
            let mut y = [0i32; MAX_DIM];
            for (c, v) in y.iter_mut().enumerate().take(d) {
                *v = ((corner >> c) & 1) as i32;
            }
            let mut verts = [[0i32; MAX_DIM]; MAX_DIM + 1];
            verts[0] = y;
            for (j, &axis) in perm.iter().enumerate() {
                y[axis] += 1;
                verts[j + 1] = y;
            }
            let inside = verts[..=d].iter().all(|v| {
                v[0] <= 2 && v[d - 1] >= 0 && (1..d).all(|c| v[c - 1] >= v[c])
            });
            if !inside {
                continue;
            }
            let mut child = [[0.0; MAX_DIM + 1]; MAX_DIM + 1];
            for (row, v) in child.iter_mut().zip(&verts[..=d]) {
                row[0] = 1.0 - v[0] as f64 / 2.0;
                for j in 1..d {
                    row[j] = (v[j - 1] - v[j]) as f64 / 2.0;
                }
                row[d] = v[d - 1] as f64 / 2.0;
            }
            out.push(child);
        }
    }
    debug_assert_eq!(out.len(), 1 << d);
    out
}

/// Cell of the recursion: vertices in Cartesian and in parent-barycentric
/// coordinates.
#[derive(Clone, Copy)]
struct Cell {
    x: SimplexCoords,
    b: [Bary; MAX_DIM + 1],
}

fn child_cell(parent: &Cell, lam: &[Bary; MAX_DIM + 1], dim: usize) -> Cell {
    let mut c = Cell {
        x: [[0.0; MAX_DIM]; MAX_DIM + 1],
        b: [[0.0; MAX_DIM + 1]; MAX_DIM + 1],
    };
    for i in 0..=dim {
        for j in 0..=dim {
            let l = lam[i][j];
            if l != 0.0 {
                for k in 0..dim {
                    c.x[i][k] += l * parent.x[j][k];
                }
                for k in 0..=dim {
                    c.b[i][k] += l * parent.b[j][k];
                }
            }
        }
    }
    c
}

fn apply_rule<V>(cell: &Cell, dim: usize, volume: f64, rule: &QuadRule, visit: &mut V)
where
    V: FnMut(&[f64], &[f64], f64),
{
    let scale = volume * factorial(dim) as f64;
    for (q, w) in rule.points.iter().zip(&rule.weights) {
        let mut x = [0.0; MAX_DIM];
        let mut b = [0.0; MAX_DIM + 1];
        for i in 0..=dim {
            let l = q[i];
            for k in 0..dim {
                x[k] += l * cell.x[i][k];
            }
            for k in 0..=dim {
                b[k] += l * cell.b[i][k];
            }
        }
        visit(&x[..dim], &b[..=dim], scale * w);
    }
}

fn recurse<V, S>(
    cell: &Cell,
    dim: usize,
    volume: f64,
    depth: usize,
    rule: &QuadRule,
    split: &mut S,
    visit: &mut V,
) where
    V: FnMut(&[f64], &[f64], f64),
    S: FnMut(&SimplexCoords) -> bool,
{
    if depth == 0 || !split(&cell.x) {
        return apply_rule(cell, dim, volume, rule, visit);
    }
    let child_volume = volume / (1u64 << dim) as f64;
    for lam in red_children(dim) {
        let child = child_cell(cell, lam, dim);
        recurse(&child, dim, child_volume, depth - 1, rule, split, visit);
    }
}

fn root_cell(x: &SimplexCoords, dim: usize) -> Cell {
    let mut b = [[0.0; MAX_DIM + 1]; MAX_DIM + 1];
    for (i, row) in b.iter_mut().enumerate().take(dim + 1) {
        row[i] = 1.0;
    }
    Cell { x: *x, b }
}

/// Calls `visit(point, bary, weight)` for every quadrature point of the
/// selectively subdivided simplex `x`. A child is subdivided further (up to
/// `depth` levels) only while `split` reports that it may be non-smooth.
/// `bary` is relative to the original simplex and the weights include the
/// child volumes.
pub fn visit_points<V, S>(
    x: &SimplexCoords,
    dim: usize,
    volume: f64,
    depth: usize,
    order: usize,
    mut split: S,
    mut visit: V,
) -> Result<()>
where
    V: FnMut(&[f64], &[f64], f64),
    S: FnMut(&SimplexCoords) -> bool,
{
    let rule = rule(dim, order)?;
    recurse(&root_cell(x, dim), dim, volume, depth, rule, &mut split, &mut visit);
    Ok(())
}

/// Integrates `f` over the simplex with vertices `x` (volume `volume`) by
/// red-subdividing it `depth` times into `2^(d*depth)` children and applying
/// `rule(d, order)` on each child.
///
/// `f` receives the Cartesian point and its barycentric coordinates with
/// respect to the original simplex.
pub fn integrate_subdivided<F>(
    x: &SimplexCoords,
    dim: usize,
    volume: f64,
    depth: usize,
    order: usize,
    f: F,
) -> Result<f64>
where
    F: FnMut(&[f64], &[f64]) -> f64,
{
    integrate_selective(x, dim, volume, depth, order, |_| true, f)
}

/// Like [`integrate_subdivided`], but a child is only subdivided further
/// while `split` reports that the integrand may be non-smooth on it.
pub fn integrate_selective<F, S>(
    x: &SimplexCoords,
    dim: usize,
    volume: f64,
    depth: usize,
    order: usize,
    split: S,
    mut f: F,
) -> Result<f64>
where
    F: FnMut(&[f64], &[f64]) -> f64,
    S: FnMut(&SimplexCoords) -> bool,
{
    // Neumaier summation keeps deep subdivisions accurate
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    visit_points(x, dim, volume, depth, order, split, |p, b, w| {
        let term = w * f(p, b);
        let t = sum + term;
        comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
        sum = t;
    })?;
    Ok(sum + comp)
}
