use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;

/// Triplet form used for serialization: `(row, col, value)` in row-major
/// sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTriplets {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

/// Sparse matrix stored in compressed-row form built from canonical triplets.
///
/// Row-major ordering with sorted columns makes every product accumulate in
/// one fixed order, so repeated runs agree bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SparseTriplets", into = "SparseTriplets")]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from triplets in any order. Duplicates, out-of-range
    /// indices and non-finite values are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::InvalidSparse(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidSparse(format!(
                    "non-finite value at ({r}, {c})"
                )));
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = entries
            .windows(2)
            .find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
        {
            return Err(Error::InvalidSparse(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, alpha: f64) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![alpha; n],
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let v = m.get(r, c);
                if v != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), entries).expect("dense entries are canonical")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Checked product `Ax` (or `Aᵀx` when `transpose` is set).
    pub fn spmv(&self, x: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if transpose {
            check_len("spmv (transpose)", self.rows, x.len())?;
            let mut out = vec![0.0; self.cols];
            self.mul_t_add(x, &mut out);
            Ok(out)
        } else {
            check_len("spmv", self.cols, x.len())?;
            let mut out = vec![0.0; self.rows];
            self.mul_add(x, &mut out);
            Ok(out)
        }
    }

    /// `out ← out + Ax`. Lengths are the caller's responsibility.
    pub fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            *o += acc;
        }
    }

    /// `out ← out + Aᵀx`.
    pub fn mul_t_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &xr) in x.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += v * xr;
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_add(x, &mut out);
        out
    }

    pub fn mul_t(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.mul_t_add(x, &mut out);
        out
    }

    /// Squared column norms, i.e. the diagonal of `AᵀA`.
    pub fn col_sq_norms(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.cols];
        for (_, c, v) in self.triplets() {
            d[c] += v * v;
        }
        d
    }

    /// True when no row holds more than one nonzero, which makes `AᵀA`
    /// diagonal.
    pub fn has_disjoint_columns(&self) -> bool {
        (0..self.rows).all(|r| self.row_ptr[r + 1] - self.row_ptr[r] <= 1)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m.set(r, c, v);
        }
        m
    }

    pub fn to_triplets(&self) -> SparseTriplets {
        SparseTriplets {
            rows: self.rows,
            cols: self.cols,
            entries: self.triplets().collect(),
        }
    }
}

impl TryFrom<SparseTriplets> for SparseMatrix {
    type Error = Error;

    fn try_from(t: SparseTriplets) -> Result<Self> {
        Self::from_triplets(t.rows, t.cols, t.entries)
    }
}

impl From<SparseMatrix> for SparseTriplets {
    fn from(m: SparseMatrix) -> Self {
        m.to_triplets()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero_products() {
        let id = SparseMatrix::identity(2);
        assert_eq!(id.spmv(&[3.0, -1.0], false).unwrap(), vec![3.0, -1.0]);
        let z = SparseMatrix::zeros(3, 2);
        assert_eq!(z.spmv(&[4.0, 5.0], false).unwrap(), vec![0.0; 3]);
        assert_eq!(z.spmv(&[1.0, 2.0, 3.0], true).unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn hand_expanded_product() {
        // [[1,2],[0,3]]
        let a = SparseMatrix::from_triplets(2, 2, vec![(1, 1, 3.0), (0, 0, 1.0), (0, 1, 2.0)])
            .unwrap();
        assert_eq!(a.spmv(&[1.0, 1.0], false).unwrap(), vec![3.0, 3.0]);
        assert_eq!(a.spmv(&[1.0, 1.0], true).unwrap(), vec![1.0, 5.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = SparseMatrix::identity(3);
        assert!(matches!(
            a.spmv(&[1.0], false),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(a.spmv(&[1.0, 2.0], true).is_err());
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn canonical_order_is_unique() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0)])
            .unwrap();
        let b = SparseMatrix::from_triplets(2, 3, vec![(1, 0, 3.0), (1, 2, 1.0), (0, 1, 2.0)])
            .unwrap();
        assert_eq!(a, b);
        let t: Vec<_> = a.triplets().collect();
        assert_eq!(t, vec![(0, 1, 2.0), (1, 0, 3.0), (1, 2, 1.0)]);
    }

    #[test]
    fn serde_round_trip() {
        let a = SparseMatrix::from_triplets(3, 2, vec![(0, 1, -1.0), (2, 0, 0.5)]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let b: SparseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
