use crate::error::{Error, Result};

use super::sparse::CsrMatrix;

/// Applies an approximate inverse.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Incomplete LU factorization with the sparsity pattern of the input.
/// `L` has unit diagonal; both factors share the CSR storage.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Ilu0> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument("ILU(0) needs a square matrix".into()));
        }
        let offsets = a.row_offsets().to_vec();
        let cols = a.col_indices().to_vec();
        let mut vals = a.values().to_vec();
        let mut diag = vec![NONE; n];
        let mut iw = vec![NONE; n];
        for i in 0..n {
            let (s, e) = (offsets[i], offsets[i + 1]);
            for k in s..e {
                iw[cols[k] as usize] = k;
            }
            for idx in s..e {
                let k = cols[idx] as usize;
                if k >= i {
                    break;
                }
                let l = vals[idx] / vals[diag[k]];
                vals[idx] = l;
                for jdx in diag[k] + 1..offsets[k + 1] {
                    let p = iw[cols[jdx] as usize];
                    if p != NONE {
                        vals[p] -= l * vals[jdx];
                    }
                }
            }
            let d = iw[i];
            let scale = vals[s..e].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if d == NONE || vals[d].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::ZeroPivot(i));
            }
            diag[i] = d;
            for k in s..e {
                iw[cols[k] as usize] = NONE;
            }
        }
        let lu = CsrMatrix::from_raw(n, n, offsets, cols, vals)?;
        Ok(Ilu0 { lu, diag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Solves `L U z = r`.
    pub fn solve_into(&self, r: &[f64], z: &mut [f64]) {
        let n = self.len();
        let offs = self.lu.row_offsets();
        let cols = self.lu.col_indices();
        let vals = self.lu.values();
        for i in 0..n {
            let mut acc = r[i];
            for k in offs[i]..self.diag[i] {
                acc -= vals[k] * z[cols[k] as usize];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag[i] + 1..offs[i + 1] {
                acc -= vals[k] * z[cols[k] as usize];
            }
            z[i] = acc / vals[self.diag[i]];
        }
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve_into(r, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_tridiagonal() {
        // no fill-in, so ILU(0) equals LU
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -2.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let ilu = Ilu0::new(&a).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let b = a.spmv(&x).unwrap();
        let mut z = vec![0.0; n];
        ilu.apply(&b, &mut z);
        for (zi, xi) in z.iter().zip(&x) {
            assert!((zi - xi).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(matches!(Ilu0::new(&a), Err(Error::ZeroPivot(0))));
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)])
            .unwrap();
        assert!(matches!(Ilu0::new(&b), Err(Error::ZeroPivot(1))));
    }
}
