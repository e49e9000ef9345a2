use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Wraps column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrix::from_col_major",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from a slice of rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    context: "DenseMatrix::from_rows",
                    expected: c,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[i + j * rows] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r + c * self.rows]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r + c * self.rows] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn frobenius_norm(&self) -> f64 {
        super::norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        super::all_finite(&self.data)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matmul",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other.get(k, j);
                if b == 0.0 {
                    continue;
                }
                let ac = &self.data[k * self.rows..(k + 1) * self.rows];
                for (o, a) in oc.iter_mut().zip(ac) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                context: "t_matmul",
                expected: self.rows,
                found: other.rows,
            });
        }
        Ok(Self::from_fn(self.cols, other.cols, |i, j| {
            super::dot(self.col(i), other.col(j))
        }))
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                context: "matmul_t",
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for k in 0..self.cols {
            let ac = self.col(k);
            for j in 0..other.rows {
                let b = other.get(j, k);
                if b == 0.0 {
                    continue;
                }
                let oc = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (o, a) in oc.iter_mut().zip(ac) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `selfᵀ self`.
    pub fn gram(&self) -> Self {
        self.t_matmul(self).expect("gram shapes agree")
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        super::axpy(alpha, &other.data, &mut self.data);
    }

    pub fn add_diagonal(&mut self, alpha: f64) {
        for i in 0..self.rows.min(self.cols) {
            let v = self.get(i, i);
            self.set(i, i, v + alpha);
        }
    }

    /// Cholesky factor `L` (lower triangular) of a symmetric positive
    /// definite matrix.
    pub fn cholesky(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::InvalidArgument("cholesky of non-square matrix".into()));
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular(format!(
                    "matrix not positive definite at pivot {j} ({d:e})"
                )));
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(l)
    }

    /// Solves `X · S = self` for `X` with `S` symmetric positive definite.
    pub fn solve_spd_right(&self, s: &Self) -> Result<Self> {
        if s.rows != self.cols {
            return Err(Error::DimensionMismatch {
                context: "solve_spd_right",
                expected: s.rows,
                found: self.cols,
            });
        }
        let l = s.cholesky()?;
        let n = s.rows;
        let mut out = Self::zeros(self.rows, n);
        let mut w = vec![0.0; n];
        // S = L Lᵀ; each row x of X solves L Lᵀ xᵀ = mᵀ.
        for r in 0..self.rows {
            for i in 0..n {
                let mut v = self.get(r, i);
                for k in 0..i {
                    v -= l.get(i, k) * w[k];
                }
                w[i] = v / l.get(i, i);
            }
            for i in (0..n).rev() {
                let mut v = w[i];
                for k in i + 1..n {
                    v -= l.get(k, i) * out.get(r, k);
                }
                out.set(r, i, v / l.get(i, i));
            }
        }
        Ok(out)
    }
}

/// Column-wise Kronecker product: column `r` of the output is
/// `kron(a[:, r], b[:, r])`, with the `b` index varying fastest.
pub fn khatri_rao(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "khatri_rao column count",
            expected: a.cols(),
            found: b.cols(),
        });
    }
    let (ia, ib) = (a.rows(), b.rows());
    let mut out = DenseMatrix::zeros(ia * ib, a.cols());
    for r in 0..a.cols() {
        let (ac, bc) = (a.col(r), b.col(r));
        let oc = &mut out.as_mut_slice()[r * ia * ib..(r + 1) * ia * ib];
        for (i, &av) in ac.iter().enumerate() {
            for (j, &bv) in bc.iter().enumerate() {
                oc[i * ib + j] = av * bv;
            }
        }
    }
    Ok(out)
}

/// Element-wise product.
pub fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidArgument(format!(
            "hadamard shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .collect();
    DenseMatrix::from_col_major(a.rows(), a.cols(), data)
}
