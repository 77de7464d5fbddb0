//! Fixed-capacity dense helpers for element-level geometry (d <= 4).

pub(crate) const MAX_DIM: usize = 4;

pub(crate) type SmallMat = [[f64; MAX_DIM]; MAX_DIM];

/// LU with partial pivoting on the leading `n x n` block. Returns the
/// determinant and the inverse, or `None` when a pivot vanishes exactly.
pub(crate) fn det_and_inverse(a: &SmallMat, n: usize) -> Option<(f64, SmallMat)> {
    let mut m = *a;
    let mut inv = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in inv.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col] == 0.0 {
            return None;
        }
        if piv != col {
            m.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for k in 0..n {
            m[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for k in 0..n {
                        m[r][k] -= f * m[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    Some((det, inv))
}

pub(crate) fn determinant(a: &SmallMat, n: usize) -> f64 {
    let mut m = *a;
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    det
}

pub(crate) fn factorial(n: usize) -> usize {
    (1..=n).product()
}
