//! Compressed sparse row matrices for node features and propagation operators.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major sparse matrix.
///
/// `indptr[r]..indptr[r + 1]` addresses the column indices and values of row `r`;
/// column indices within a row are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from per-row `(column, value)` lists. Zero values are dropped.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Dimension(format!(
                        "row {r} repeats column {}",
                        w[0].0
                    )));
                }
            }
            for (c, v) in row {
                if c >= cols {
                    return Err(Error::Dimension(format!(
                        "row {r} column {c} out of range for width {cols}"
                    )));
                }
                if v != T::zero() {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            rows: indptr.len() - 1,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(dense: &Array2<T>) -> Self {
        let rows = dense
            .outer_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != T::zero())
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_rows(dense.ncols(), rows).expect("dense rows are well formed")
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

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (idx, vals) = self.row(r);
        match idx.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                out[[r, c]] = v;
            }
        }
        out
    }

    /// Scales every row to unit L1 norm; all-zero rows are left untouched.
    pub fn row_normalize_l1(&mut self) {
        for r in 0..self.rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            let norm: T = self.values[span.clone()].iter().map(|v| v.abs()).sum();
            if norm > T::zero() {
                for v in &mut self.values[span] {
                    *v = *v / norm;
                }
            }
        }
    }

    /// Dense product `self · rhs`.
    pub fn mul_dense(&self, rhs: &Array2<T>) -> Array2<T> {
        assert_eq!(self.cols, rhs.nrows(), "sparse-dense product shape");
        let k = rhs.ncols();
        let mut out = Array2::zeros((self.rows, k));
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            let mut acc = out.row_mut(r);
            for (&c, &v) in idx.iter().zip(vals) {
                acc.scaled_add(v, &rhs.row(c));
            }
        }
        out
    }

    /// Dense product `selfᵀ · rhs` without materialising the transpose.
    pub fn transpose_mul_dense(&self, rhs: &Array2<T>) -> Array2<T> {
        assert_eq!(
            self.rows,
            rhs.nrows(),
            "transposed sparse-dense product shape"
        );
        let k = rhs.ncols();
        let mut out = Array2::zeros((self.cols, k));
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            let src = rhs.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                out.row_mut(c).scaled_add(v, &src);
            }
        }
        out
    }

    /// Sparse product `self · rhs`.
    pub fn mul_sparse(&self, rhs: &CsrMatrix<T>) -> CsrMatrix<T> {
        assert_eq!(self.cols, rhs.rows, "sparse-sparse product shape");
        let mut acc = vec![T::zero(); rhs.cols];
        let mut touched = vec![false; rhs.cols];
        let mut rows = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut cols_hit = Vec::new();
            let (idx, vals) = self.row(r);
            for (&k, &a) in idx.iter().zip(vals) {
                let (ridx, rvals) = rhs.row(k);
                for (&c, &b) in ridx.iter().zip(rvals) {
                    if !touched[c] {
                        touched[c] = true;
                        cols_hit.push(c);
                    }
                    acc[c] = acc[c] + a * b;
                }
            }
            let row: Vec<(usize, T)> = cols_hit
                .iter()
                .map(|&c| {
                    let v = acc[c];
                    acc[c] = T::zero();
                    touched[c] = false;
                    (c, v)
                })
                .collect();
            rows.push(row);
        }
        CsrMatrix::from_rows(rhs.cols, rows).expect("product rows are well formed")
    }

    pub fn cast<U: Scalar>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}
