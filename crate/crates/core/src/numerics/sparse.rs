//! Coordinate-list sparse matrices for the normalized adjacency.
//!
//! Entries are kept sorted by (row, col) and iterated in that order, which
//! fixes the accumulation order of every product.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Builds a sparse matrix from coordinate entries. Coordinates must be
    /// unique and in range; when `symmetric` is set, entry (i, j) must be
    /// mirrored by (j, i) with an equal value.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> Result<Self> {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 && window[0].1 == window[1].1 {
                return Err(Error::Schema(format!(
                    "duplicate sparse coordinate ({}, {})",
                    window[0].0, window[0].1
                )));
            }
        }
        for &(r, c, v) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::Schema(format!(
                    "sparse coordinate ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite sparse value {v} at ({r}, {c})"
                )));
            }
        }
        if symmetric {
            if rows != cols {
                return Err(Error::Schema(format!(
                    "symmetric flag on non-square {rows}x{cols} matrix"
                )));
            }
            for &(r, c, v) in &entries {
                let mirror = entries
                    .binary_search_by_key(&(c, r), |&(er, ec, _)| (er, ec))
                    .map(|idx| entries[idx].2);
                match mirror {
                    Ok(mv) if mv == v => {}
                    _ => {
                        return Err(Error::Schema(format!(
                            "symmetric matrix missing mirror of ({r}, {c})"
                        )))
                    }
                }
            }
        }
        Ok(SparseMatrix {
            rows,
            cols,
            entries,
            symmetric,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
            symmetric: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(row, col), |&(r, c, _)| (r, c))
            .map(|idx| self.entries[idx].2)
            .unwrap_or(0.0)
    }

    /// `self * d` for a dense right operand.
    pub fn matmul_dense(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != d.rows() {
            return Err(Error::Dimension {
                op: "sparse_dense_matmul",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: d.rows(),
                rhs_cols: d.cols(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, d.cols());
        for &(r, c, v) in &self.entries {
            let src = d.row(c);
            let dst = out.row_mut(r);
            for (o, &s) in dst.iter_mut().zip(src) {
                *o += v * s;
            }
        }
        Ok(out)
    }

    /// `self^T * d`; the gradient of `matmul_dense` with respect to its dense
    /// operand. Equals `matmul_dense` when the matrix is symmetric.
    pub fn transpose_matmul_dense(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != d.rows() {
            return Err(Error::Dimension {
                op: "sparse_transpose_dense_matmul",
                lhs_rows: self.cols,
                lhs_cols: self.rows,
                rhs_rows: d.rows(),
                rhs_cols: d.cols(),
            });
        }
        let mut out = DenseMatrix::zeros(self.cols, d.cols());
        for &(r, c, v) in &self.entries {
            let src = d.row(r);
            let dst = out.row_mut(c);
            for (o, &s) in dst.iter_mut().zip(src) {
                *o += v * s;
            }
        }
        Ok(out)
    }

    pub fn densify(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            out.set(r, c, v);
        }
        out
    }
}
