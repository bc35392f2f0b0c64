//! Deterministic numerics: dense/sparse matrices with the handful of kernels
//! the model needs, a seeded RNG, Adam, and finite-difference gradient
//! verification.
//!
//! Everything here is plain `f64` with a fixed (ascending-index) summation
//! order, so results are bitwise reproducible for a given seed. There is no
//! general autodiff tape; gradients are hand-derived layer by layer in the
//! model module and validated against [`grad_check`].

mod adam;
mod dense;
mod gradcheck;
mod rng;
mod sparse;

pub use adam::AdamState;
pub use dense::{softmax_blocks, DenseMatrix, ElementwiseOp};
pub use gradcheck::{grad_check, GradCheckEntry, GradCheckReport, FD_STEP, SKIP_THRESHOLD};
pub use rng::Rng;
pub use sparse::SparseMatrix;
