use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows at or above this count are processed in parallel by `spmv`.
const PAR_ROWS: usize = 1 << 14;

/// Entries with magnitude below this are not stored.
pub const DROP_TOL: f64 = 1e-300;

/// Compressed sparse row matrix with strictly increasing column indices in
/// every row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

/// Something that can be applied to a vector.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl CsrMatrix {
    /// Validates and wraps raw CSR arrays.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 || row_offsets[0] != 0 {
            return Err(Error::InvalidArgument("row offsets do not match row count".into()));
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidArgument("inconsistent CSR array lengths".into()));
        }
        for i in 0..nrows {
            let (s, e) = (row_offsets[i], row_offsets[i + 1]);
            if s > e {
                return Err(Error::InvalidArgument(format!("row {i} has negative length")));
            }
            let cols = &col_indices[s..e];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c as usize >= ncols) {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: column indices not strictly increasing or out of range"
                )));
            }
        }
        Ok(CsrMatrix { nrows, ncols, row_offsets, col_indices, values })
    }

    /// Sums duplicate entries in index order and drops (near-)zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|&&(i, j, _)| i >= nrows || j >= ncols) {
            return Err(Error::InvalidArgument(format!("entry ({i}, {j}) out of range")));
        }
        let mut t: Vec<(usize, usize, f64)> = triplets.to_vec();
        // stable sort keeps insertion order among duplicates
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        let mut k = 0;
        while k < t.len() {
            let (i, j, mut v) = t[k];
            k += 1;
            while k < t.len() && t[k].0 == i && t[k].1 == j {
                v += t[k].2;
                k += 1;
            }
            if v.abs() >= DROP_TOL {
                col_indices.push(j as u32);
                values.push(v);
                row_offsets[i + 1] += 1;
            }
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(CsrMatrix { nrows, ncols, row_offsets, col_indices, values })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n as u32).collect(),
            values: d.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Removes stored entries below [`DROP_TOL`] in magnitude.
    pub fn drop_zeros(mut self) -> Self {
        let mut w = 0;
        let mut new_offsets = vec![0usize; self.nrows + 1];
        for i in 0..self.nrows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                if self.values[k].abs() >= DROP_TOL {
                    self.values[w] = self.values[k];
                    self.col_indices[w] = self.col_indices[k];
                    w += 1;
                }
            }
            new_offsets[i + 1] = w;
        }
        self.values.truncate(w);
        self.col_indices.truncate(w);
        self.row_offsets = new_offsets;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch { expected: self.ncols, got: x.len() });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without dimension checks beyond debug assertions.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        let row = |i: usize| {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_indices[k] as usize];
            }
            acc
        };
        if self.nrows >= PAR_ROWS {
            y.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
                for (r, yi) in chunk.iter_mut().enumerate() {
                    *yi = row(c * 4096 + r);
                }
            });
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    /// `y = A^T x`, accumulated row by row in index order.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch { expected: self.nrows, got: x.len() });
        }
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c as usize] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut cols = vec![0u32; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (ci, vi) = self.row(i);
            for (&c, &v) in ci.iter().zip(vi) {
                let p = next[c as usize];
                cols[p] = i as u32;
                vals[p] = v;
                next[c as usize] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices: cols,
            values: vals,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                row[j as usize] = x;
            }
        }
        d
    }

    /// Largest entrywise difference to `other`, or `None` if the shapes differ.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> Option<f64> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return None;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut a, mut b) = (0, 0);
            while a < ca.len() || b < cb.len() {
                let ja = ca.get(a).copied().unwrap_or(u32::MAX);
                let jb = cb.get(b).copied().unwrap_or(u32::MAX);
                let diff = if ja == jb {
                    a += 1;
                    b += 1;
                    va[a - 1] - vb[b - 1]
                } else if ja < jb {
                    a += 1;
                    va[a - 1]
                } else {
                    b += 1;
                    vb[b - 1]
                };
                worst = worst.max(diff.abs());
            }
        }
        Some(worst)
    }

    /// Keeps the rows and columns selected by `row_map`/`col_map`
    /// (`Some(new_index)`), renumbering them.
    pub fn submatrix(
        &self,
        row_map: &[Option<usize>],
        col_map: &[Option<usize>],
        nrows: usize,
        ncols: usize,
    ) -> CsrMatrix {
        let mut rows: Vec<(usize, usize)> = row_map
            .iter()
            .enumerate()
            .filter_map(|(old, new)| new.map(|n| (n, old)))
            .collect();
        rows.sort_unstable();
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for &(_, old) in &rows {
            entries.clear();
            let (c, v) = self.row(old);
            for (&j, &x) in c.iter().zip(v) {
                if let Some(nj) = col_map[j as usize] {
                    entries.push((nj as u32, x));
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            for &(j, x) in &entries {
                col_indices.push(j);
                values.push(x);
            }
            row_offsets.push(values.len());
        }
        CsrMatrix { nrows, ncols, row_offsets, col_indices, values }
    }

    /// Stacks `[[a, b], [c, d]]` into one matrix; `None` blocks are zero.
    pub fn block_2x2(
        a: &CsrMatrix,
        b: &CsrMatrix,
        c: &CsrMatrix,
        d: &CsrMatrix,
    ) -> Result<CsrMatrix> {
        if a.nrows != b.nrows || c.nrows != d.nrows || a.ncols != c.ncols || b.ncols != d.ncols {
            return Err(Error::InvalidArgument("block shapes are inconsistent".into()));
        }
        let n1 = a.ncols as u32;
        let nrows = a.nrows + c.nrows;
        let ncols = a.ncols + b.ncols;
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        row_offsets.push(0);
        let nnz = a.nnz() + b.nnz() + c.nnz() + d.nnz();
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (left, right) in [(a, b), (c, d)] {
            for i in 0..left.nrows {
                let (cl, vl) = left.row(i);
                col_indices.extend_from_slice(cl);
                values.extend_from_slice(vl);
                let (cr, vr) = right.row(i);
                col_indices.extend(cr.iter().map(|&j| j + n1));
                values.extend_from_slice(vr);
                row_offsets.push(values.len());
            }
        }
        Ok(CsrMatrix { nrows, ncols, row_offsets, col_indices, values })
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y)
    }
}

/// Wraps a closure as a square operator.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnOperator { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}
