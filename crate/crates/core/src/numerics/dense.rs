//! Row-major dense matrices and the elementwise/softmax kernels.
//!
//! Every constructor and operation enforces the finiteness invariant: no
//! NaN/Inf ever leaves this module. Reductions run in ascending index order.

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Elementwise nonlinearities used by the network layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Relu,
    Sigmoid,
    Exp,
    Log,
}

impl ElementwiseOp {
    fn name(self) -> &'static str {
        match self {
            ElementwiseOp::Relu => "relu",
            ElementwiseOp::Sigmoid => "sigmoid",
            ElementwiseOp::Exp => "exp",
            ElementwiseOp::Log => "log",
        }
    }

    /// Scalar derivative dy/dx given the input `x` and output `y = op(x)`.
    /// The relu subgradient at exactly 0 is 0.
    pub fn grad(self, x: f64, y: f64) -> f64 {
        match self {
            ElementwiseOp::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ElementwiseOp::Sigmoid => y * (1.0 - y),
            ElementwiseOp::Exp => y,
            ElementwiseOp::Log => 1.0 / x,
        }
    }
}

/// Numerically safe sigmoid (never overflows `exp`).
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, validating length and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Numerical(format!(
                "dense matrix: data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        let m = DenseMatrix { rows, cols, data };
        m.check_finite("new")?;
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from explicit rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::Numerical(format!(
                    "dense matrix: ragged rows ({} vs {})",
                    row.len(),
                    n_cols
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(n_rows, n_cols, data)
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    fn check_finite(&self, op: &'static str) -> Result<()> {
        for (idx, &v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain {
                    op,
                    row: idx / self.cols.max(1),
                    col: idx % self.cols.max(1),
                    value: v,
                });
            }
        }
        Ok(())
    }

    fn dim_error(&self, op: &'static str, rhs: &DenseMatrix) -> Error {
        Error::Dimension {
            op,
            lhs_rows: self.rows,
            lhs_cols: self.cols,
            rhs_rows: rhs.rows,
            rhs_cols: rhs.cols,
        }
    }

    /// Standard matrix product. Inner accumulation runs over ascending `k`
    /// with per-row output accumulators, so the summation order is fixed.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(self.dim_error("matmul", rhs));
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = rhs.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        let m = DenseMatrix {
            rows: self.rows,
            cols: rhs.cols,
            data: out,
        };
        m.check_finite("matmul")?;
        Ok(m)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with("add", rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with("sub", rhs, |a, b| a - b)
    }

    pub fn hadamard(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with("hadamard", rhs, |a, b| a * b)
    }

    fn zip_with(
        &self,
        op: &'static str,
        rhs: &DenseMatrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseMatrix> {
        if self.shape() != rhs.shape() {
            return Err(self.dim_error(op, rhs));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let m = DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        };
        m.check_finite(op)?;
        Ok(m)
    }

    pub fn scale(&self, factor: f64) -> Result<DenseMatrix> {
        let m = DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * factor).collect(),
        };
        m.check_finite("scale")?;
        Ok(m)
    }

    /// Adds `self + grad` in place; shapes must match.
    pub fn add_assign(&mut self, rhs: &DenseMatrix) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(self.dim_error("add_assign", rhs));
        }
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        self.check_finite("add_assign")
    }

    /// Adds a `1 x cols` row vector to every row (bias broadcast).
    pub fn add_row_vector(&self, bias: &DenseMatrix) -> Result<DenseMatrix> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(self.dim_error("add_row_vector", bias));
        }
        let mut out = self.clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            for (o, &b) in row.iter_mut().zip(&bias.data) {
                *o += b;
            }
        }
        out.check_finite("add_row_vector")?;
        Ok(out)
    }

    /// Column sums as a `1 x cols` matrix (bias gradients).
    pub fn column_sums(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        DenseMatrix {
            rows: 1,
            cols: self.cols,
            data: out,
        }
    }

    /// Applies a nonlinearity elementwise. `log` requires strictly positive
    /// entries and reports the first offending coordinate.
    pub fn apply(&self, op: ElementwiseOp) -> Result<DenseMatrix> {
        let mut data = Vec::with_capacity(self.data.len());
        for (idx, &v) in self.data.iter().enumerate() {
            let y = match op {
                ElementwiseOp::Relu => v.max(0.0),
                ElementwiseOp::Sigmoid => sigmoid(v),
                ElementwiseOp::Exp => v.exp(),
                ElementwiseOp::Log => {
                    if v <= 0.0 {
                        return Err(Error::Domain {
                            op: "log",
                            row: idx / self.cols.max(1),
                            col: idx % self.cols.max(1),
                            value: v,
                        });
                    }
                    v.ln()
                }
            };
            data.push(y);
        }
        let m = DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        };
        m.check_finite(op.name())?;
        Ok(m)
    }

    /// Copies the listed rows into a new matrix, in the given order.
    pub fn gather_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Adds row `r` of `src` into row `indices[r]` of `self`.
    pub fn scatter_rows_add(&mut self, indices: &[usize], src: &DenseMatrix) -> Result<()> {
        if src.rows != indices.len() || src.cols != self.cols {
            return Err(self.dim_error("scatter_rows_add", src));
        }
        for (r, &i) in indices.iter().enumerate() {
            let dst = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &v) in dst.iter_mut().zip(src.row(r)) {
                *o += v;
            }
        }
        Ok(())
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn concat_cols(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(self.dim_error("concat_cols", rhs));
        }
        let cols = self.cols + rhs.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(rhs.row(i));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Splits columns at `at` into `(left, right)`.
    pub fn split_cols(&self, at: usize) -> Result<(DenseMatrix, DenseMatrix)> {
        if at > self.cols {
            return Err(Error::Numerical(format!(
                "split_cols: split point {} beyond {} columns",
                at, self.cols
            )));
        }
        let mut left = Vec::with_capacity(self.rows * at);
        let mut right = Vec::with_capacity(self.rows * (self.cols - at));
        for i in 0..self.rows {
            let row = self.row(i);
            left.extend_from_slice(&row[..at]);
            right.extend_from_slice(&row[at..]);
        }
        Ok((
            DenseMatrix {
                rows: self.rows,
                cols: at,
                data: left,
            },
            DenseMatrix {
                rows: self.rows,
                cols: self.cols - at,
                data: right,
            },
        ))
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, &v| acc.max(v.abs()))
    }
}

/// Row-wise softmax over contiguous column blocks.
///
/// `block_bounds` must partition `[0, cols)` exactly: sorted, gap-free,
/// non-overlapping, each non-empty. Each output row then sums to 1 within
/// every block. Uses the max-shift trick so large logits cannot overflow.
pub fn softmax_blocks(m: &DenseMatrix, block_bounds: &[(usize, usize)]) -> Result<DenseMatrix> {
    validate_blocks(block_bounds, m.cols())?;
    let mut out = m.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        for &(start, end) in block_bounds {
            let block = &mut row[start..end];
            let max = block.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut sum = 0.0;
            for v in block.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in block.iter_mut() {
                *v /= sum;
            }
        }
    }
    out.check_finite("softmax_blocks")?;
    Ok(out)
}

pub(crate) fn validate_blocks(block_bounds: &[(usize, usize)], cols: usize) -> Result<()> {
    let mut expect = 0;
    for &(start, end) in block_bounds {
        if start != expect || end <= start {
            return Err(Error::Schema(format!(
                "blocks must partition columns [0, {}): got block ({}, {}) where {} was expected",
                cols, start, end, expect
            )));
        }
        expect = end;
    }
    if expect != cols {
        return Err(Error::Schema(format!(
            "blocks cover columns [0, {}) but the matrix has {} columns",
            expect, cols
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_preserves_operand() {
        let m = DenseMatrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 4.0]]).unwrap();
        let id = DenseMatrix::identity(2);
        assert_eq!(id.matmul(&m).unwrap(), m);
    }

    #[test]
    fn matmul_matches_hand_multiplication() {
        // [[1,2],[3,4]] x [[5],[6]] = [[17],[39]]
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "unexpected message: {msg}");
        match err {
            Error::Dimension { .. } => {}
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn relu_clamps_negatives() {
        let m = DenseMatrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        let r = m.apply(ElementwiseOp::Relu).unwrap();
        assert_eq!(r.data(), &[0.0, 2.0]);
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let m = DenseMatrix::from_rows(&[vec![0.0]]).unwrap();
        let s = m.apply(ElementwiseOp::Sigmoid).unwrap();
        assert_eq!(s.data(), &[0.5]);
    }

    #[test]
    fn exp_log_round_trip() {
        let m = DenseMatrix::from_rows(&[vec![0.3, 1.7]]).unwrap();
        let back = m
            .apply(ElementwiseOp::Exp)
            .unwrap()
            .apply(ElementwiseOp::Log)
            .unwrap();
        for (a, b) in back.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn log_of_nonpositive_reports_coordinates() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        match m.apply(ElementwiseOp::Log) {
            Err(Error::Domain { row, col, .. }) => {
                assert_eq!((row, col), (0, 1));
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn relu_grad_at_zero_is_zero() {
        assert_eq!(ElementwiseOp::Relu.grad(0.0, 0.0), 0.0);
        assert_eq!(ElementwiseOp::Relu.grad(-1.0, 0.0), 0.0);
        assert_eq!(ElementwiseOp::Relu.grad(2.0, 2.0), 1.0);
    }

    #[test]
    fn softmax_single_block_uniform_on_equal_logits() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let s = softmax_blocks(&m, &[(0, 2)]).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_two_blocks_uniform_per_block() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.0, 0.0, 0.0]]).unwrap();
        let s = softmax_blocks(&m, &[(0, 2), (2, 4)]).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn softmax_closed_form() {
        // logits [ln 2, 0] -> [2/3, 1/3]
        let m = DenseMatrix::from_rows(&[vec![2.0_f64.ln(), 0.0]]).unwrap();
        let s = softmax_blocks(&m, &[(0, 2)]).unwrap();
        assert!((s.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_non_partition_blocks() {
        let m = DenseMatrix::zeros(1, 4);
        assert!(softmax_blocks(&m, &[(0, 2), (1, 4)]).is_err());
        assert!(softmax_blocks(&m, &[(0, 2)]).is_err());
        assert!(softmax_blocks(&m, &[(0, 2), (3, 4)]).is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.transpose().transpose(), m);
        assert_eq!(m.transpose().get(2, 1), 6.0);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }
}
