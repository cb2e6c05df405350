//! Minimal dense matrix types: general rectangular storage, symmetric
//! storage, and the observation matrix. Row-major throughout.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {rows}x{cols} = {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn col_vec(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// `self * v` for a vector of length `cols`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self^T * v` for a vector of length `rows`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let w = v[r];
            for (o, a) in out.iter_mut().zip(row) {
                *o += w * a;
            }
        }
        out
    }

    /// `self^T * self` as a dense `cols x cols` symmetric matrix.
    pub fn gram(&self) -> SymMatrix {
        let k = self.cols;
        let mut g = SymMatrix::zeros(k);
        for a in 0..k {
            for b in a..k {
                let mut s = 0.0;
                for r in 0..self.rows {
                    s += self.get(r, a) * self.get(r, b);
                }
                g.set_sym(a, b, s);
            }
        }
        g
    }
}

/// Dense symmetric matrix; both triangles are stored and kept equal exactly
/// by writing through [`SymMatrix::set_sym`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.set_sym(i, i, 1.0);
        }
        m
    }

    /// Builds from an upper-triangle generator `f(j, k)` with `j <= k`.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for j in 0..dim {
            for k in j..dim {
                m.set_sym(j, k, f(j, k));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.dim + k]
    }

    #[inline]
    pub fn set_sym(&mut self, j: usize, k: usize, v: f64) {
        self.data[j * self.dim + k] = v;
        self.data[k * self.dim + j] = v;
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|j| self.get(j, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Lower-triangular Cholesky factor; fails if not positive definite.
    pub fn cholesky(&self) -> Result<Matrix> {
        let n = self.dim;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "matrix is not positive definite (pivot {d} at {j})"
                )));
            }
            let dj = d.sqrt();
            l.set(j, j, dj);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / dj);
            }
        }
        Ok(l)
    }
}

/// Solves the `k x k` system `a x = b` in place by Gaussian elimination with
/// partial pivoting. `a` is row-major and is destroyed.
pub fn solve_in_place(a: &mut [f64], b: &mut [f64], k: usize) -> Result<()> {
    assert_eq!(a.len(), k * k);
    assert_eq!(b.len(), k);
    for col in 0..k {
        let mut piv = col;
        let mut best = a[col * k + col].abs();
        for r in (col + 1)..k {
            let v = a[r * k + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::RankDeficient);
        }
        if piv != col {
            for c in 0..k {
                a.swap(col * k + c, piv * k + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * k + col];
        for r in (col + 1)..k {
            let m = a[r * k + col] / d;
            if m == 0.0 {
                continue;
            }
            for c in col..k {
                a[r * k + c] -= m * a[col * k + c];
            }
            b[r] -= m * b[col];
        }
    }
    for col in (0..k).rev() {
        let mut s = b[col];
        for c in (col + 1)..k {
            s -= a[col * k + c] * b[c];
        }
        b[col] = s / a[col * k + col];
    }
    Ok(())
}

/// Observation matrix: `n` samples (rows) of `p` features (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewSamples { context: "data matrix rows", min: 2, got: n });
        }
        if p == 0 {
            return Err(Error::Shape("data matrix needs at least one column".into()));
        }
        if data.len() != n * p {
            return Err(Error::Shape(format!(
                "expected {n}x{p} = {} values, got {}",
                n * p,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "data matrix" });
        }
        Ok(DataMatrix { n, p, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn col_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for i in 0..self.n {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        let inv = 1.0 / self.n as f64;
        for v in &mut m {
            *v *= inv;
        }
        m
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Sub-matrix of the given row range (used by sample splitting).
    pub fn row_slice(&self, rows: std::ops::Range<usize>) -> Result<DataMatrix> {
        let sel = &self.data[rows.start * self.p..rows.end * self.p];
        DataMatrix::new(rows.len(), self.p, sel.to_vec())
    }

    /// Reordered copy with rows permuted by `order`.
    pub fn permuted_rows(&self, order: &[usize]) -> Result<DataMatrix> {
        assert_eq!(order.len(), self.n);
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        DataMatrix::new(self.n, self.p, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![5.0, 10.0];
        solve_in_place(&mut a, &mut b, 2).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_singular_fails() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_in_place(&mut a, &mut b, 2).is_err());
    }

    #[test]
    fn cholesky_roundtrip() {
        let mut s = SymMatrix::zeros(3);
        s.set_sym(0, 0, 4.0);
        s.set_sym(1, 1, 5.0);
        s.set_sym(2, 2, 6.0);
        s.set_sym(0, 1, 1.0);
        s.set_sym(0, 2, 0.5);
        s.set_sym(1, 2, 0.25);
        let l = s.cholesky().unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let mut v = 0.0;
                for q in 0..3 {
                    v += l.get(j, q) * l.get(k, q);
                }
                assert!((v - s.get(j, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn data_matrix_validation() {
        assert!(DataMatrix::new(1, 2, vec![0.0, 1.0]).is_err());
        assert!(DataMatrix::new(2, 2, vec![0.0, 1.0, 2.0]).is_err());
        assert!(DataMatrix::new(2, 2, vec![0.0, 1.0, 2.0, f64::NAN]).is_err());
        let d = DataMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.col_means(), vec![2.0, 3.0]);
        assert_eq!(d.col_vec(1), vec![2.0, 4.0]);
    }

    #[test]
    fn symmetric_by_construction() {
        let m = SymMatrix::from_upper_fn(4, |j, k| (j * 10 + k) as f64);
        for j in 0..4 {
            for k in 0..4 {
                assert_eq!(m.get(j, k), m.get(k, j));
            }
        }
    }
}
