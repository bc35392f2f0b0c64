//! Adam optimizer state for a fixed group of parameter tensors.

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

const DEFAULT_BETA1: f64 = 0.9;
const DEFAULT_BETA2: f64 = 0.999;
const DEFAULT_EPSILON: f64 = 1e-8;

/// First/second-moment accumulators plus the shared step counter for one
/// parameter group. Moment tensors are allocated up front and always
/// shape-match their parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    first_moments: Vec<DenseMatrix>,
    second_moments: Vec<DenseMatrix>,
}

impl AdamState {
    /// Creates a state for parameters of the given shapes with the usual
    /// defaults (beta1 0.9, beta2 0.999, epsilon 1e-8).
    pub fn new(learning_rate: f64, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            t: 0,
            first_moments: shapes
                .iter()
                .map(|&(r, c)| DenseMatrix::zeros(r, c))
                .collect(),
            second_moments: shapes
                .iter()
                .map(|&(r, c)| DenseMatrix::zeros(r, c))
                .collect(),
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self.epsilon = epsilon;
        self
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// One optimization step over the whole group. Applies the standard
    /// bias-corrected update and increments the step counter by exactly 1.
    pub fn step(&mut self, params: &mut [&mut DenseMatrix], grads: &[&DenseMatrix]) -> Result<()> {
        if params.len() != self.first_moments.len() || grads.len() != params.len() {
            return Err(Error::Numerical(format!(
                "adam: group size mismatch: {} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                self.first_moments.len()
            )));
        }
        for ((param, grad), moment) in params.iter().zip(grads).zip(&self.first_moments) {
            if param.shape() != grad.shape() || param.shape() != moment.shape() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    lhs_rows: param.rows(),
                    lhs_cols: param.cols(),
                    rhs_rows: grad.rows(),
                    rhs_cols: grad.cols(),
                });
            }
        }
        self.t += 1;
        let bias1 = 1.0 - self.beta1.powi(self.t as i32);
        let bias2 = 1.0 - self.beta2.powi(self.t as i32);
        for idx in 0..params.len() {
            let grad = grads[idx].data();
            let m = &mut self.first_moments[idx];
            let v = &mut self.second_moments[idx];
            let param = &mut *params[idx];
            for i in 0..param.rows() {
                let row_offset = i * param.cols();
                let m_row = m.row_mut(i);
                let v_row = v.row_mut(i);
                let p_row = param.row_mut(i);
                for j in 0..p_row.len() {
                    let g = grad[row_offset + j];
                    m_row[j] = self.beta1 * m_row[j] + (1.0 - self.beta1) * g;
                    v_row[j] = self.beta2 * v_row[j] + (1.0 - self.beta2) * g * g;
                    let m_hat = m_row[j] / bias1;
                    let v_hat = v_row[j] / bias2;
                    p_row[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            }
        }
        Ok(())
    }
}
