//! MatrixMarket coordinate and array formats.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::sparse::CsrMatrix;

pub fn write_matrix<W: Write>(mut w: W, a: &CsrMatrix) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (c, v) = a.row(i);
        for (&j, &x) in c.iter().zip(v) {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, x)?;
        }
    }
    Ok(())
}

pub fn write_vector<W: Write>(mut w: W, x: &[f64]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", x.len())?;
    for v in x {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

fn data_lines<R: BufRead>(r: R) -> Result<(String, Vec<String>)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))??;
    let mut out = Vec::new();
    for l in lines {
        let l = l?;
        let t = l.trim();
        if !t.is_empty() && !t.starts_with('%') {
            out.push(t.to_string());
        }
    }
    Ok((header.to_lowercase(), out))
}

fn num<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    s.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad or missing {what}")))
}

/// Reads a real coordinate matrix (`general` or `symmetric`).
pub fn read_matrix<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let (header, lines) = data_lines(r)?;
    if !header.starts_with("%%matrixmarket matrix coordinate") {
        return Err(Error::Parse("expected a coordinate MatrixMarket matrix".into()));
    }
    let symmetric = header.contains("symmetric");
    let mut it = lines.iter();
    let size = it.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let mut s = size.split_whitespace();
    let nrows: usize = num(s.next(), "row count")?;
    let ncols: usize = num(s.next(), "column count")?;
    let nnz: usize = num(s.next(), "entry count")?;
    let mut t = Vec::with_capacity(nnz);
    for line in it {
        let mut f = line.split_whitespace();
        let i: usize = num(f.next(), "row index")?;
        let j: usize = num(f.next(), "column index")?;
        let v: f64 = num(f.next(), "value")?;
        if i == 0 || j == 0 {
            return Err(Error::Parse("indices are 1-based".into()));
        }
        t.push((i - 1, j - 1, v));
        if symmetric && i != j {
            t.push((j - 1, i - 1, v));
        }
    }
    let entries = if symmetric { t.iter().filter(|e| e.0 >= e.1).count() } else { t.len() };
    if entries != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {entries}")));
    }
    CsrMatrix::from_triplets(nrows, ncols, &t).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads a dense column vector in array format.
pub fn read_vector<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let (header, lines) = data_lines(r)?;
    if !header.starts_with("%%matrixmarket matrix array") {
        return Err(Error::Parse("expected an array MatrixMarket vector".into()));
    }
    let mut it = lines.iter();
    let size = it.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let mut s = size.split_whitespace();
    let n: usize = num(s.next(), "row count")?;
    let c: usize = num(s.next(), "column count")?;
    if c != 1 {
        return Err(Error::Parse("expected a single column".into()));
    }
    let x: Vec<f64> = it.map(|l| num(Some(l.as_str()), "value")).collect::<Result<_>>()?;
    if x.len() != n {
        return Err(Error::Parse(format!("expected {n} values, found {}", x.len())));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let a = CsrMatrix::from_triplets(3, 2, &[(0, 1, 1.0 / 3.0), (2, 0, -1e-17), (1, 1, 7.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a).unwrap();
        let b = read_matrix(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_input_expanded() {
        let s = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 2.0\n2 1 -1.0\n";
        let a = read_matrix(s.as_bytes()).unwrap();
        assert_eq!(a.to_dense(), vec![vec![2.0, -1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn vector_round_trip_and_errors() {
        let x = vec![0.1, -2.5, 1e300];
        let mut buf = Vec::new();
        write_vector(&mut buf, &x).unwrap();
        assert_eq!(read_vector(buf.as_slice()).unwrap(), x);
        assert!(read_vector("%%MatrixMarket matrix array real general\n3 1\n1\n".as_bytes()).is_err());
        assert!(read_matrix("garbage".as_bytes()).is_err());
    }
}
