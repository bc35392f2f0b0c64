//! Hand-derived backward passes mirroring the forwards in `forward.rs`.
//!
//! Each function takes the upstream gradient(s) and the forward trace and
//! returns parameter gradients plus the gradient with respect to the input,
//! so callers can compose paths and accumulate. All of these are exercised
//! end to end by finite-difference checks.

use crate::error::Result;
use crate::model::forward::{DecTrace, DiscTrace, EncoderForward, GcnTrace, StageTrace};
use crate::model::params::ModelParams;
use crate::numerics::{DenseMatrix, SparseMatrix};

/// d(relu)/dx mask applied to an upstream gradient; subgradient 0 at 0.
fn relu_backward(pre: &DenseMatrix, upstream: &DenseMatrix) -> Result<DenseMatrix> {
    let mut out = upstream.clone();
    for r in 0..out.rows() {
        let mask = pre.row(r);
        let row = out.row_mut(r);
        for (v, &m) in row.iter_mut().zip(mask) {
            if m <= 0.0 {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// Backward of `y = x * w + b`: returns `(dw, db, dx)`.
fn linear_backward(
    x: &DenseMatrix,
    w: &DenseMatrix,
    upstream: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let dw = x.transpose().matmul(upstream)?;
    let db = upstream.column_sums();
    let dx = upstream.matmul(&w.transpose())?;
    Ok((dw, db, dx))
}

/// Backward through a per-block softmax: given dL/dp returns dL/dlogits,
/// `dlogit_k = p_k * (dp_k - sum_block(p * dp))` within each block.
pub(crate) fn softmax_blocks_backward(
    probs: &DenseMatrix,
    d_probs: &DenseMatrix,
    blocks: &[(usize, usize)],
) -> Result<DenseMatrix> {
    let mut out = DenseMatrix::zeros(probs.rows(), probs.cols());
    for r in 0..probs.rows() {
        for &(start, end) in blocks {
            let p = &probs.row(r)[start..end];
            let g = &d_probs.row(r)[start..end];
            let dot: f64 = p.iter().zip(g).map(|(&pv, &gv)| pv * gv).sum();
            let row = out.row_mut(r);
            for (k, (&pv, &gv)) in p.iter().zip(g).enumerate() {
                row[start + k] = pv * (gv - dot);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub(crate) struct EncoderGrads {
    pub mlp_w1: DenseMatrix,
    pub mlp_b1: DenseMatrix,
    pub mlp_w2: DenseMatrix,
    pub mlp_b2: DenseMatrix,
    pub gcn_w0: DenseMatrix,
    pub gcn_w1: DenseMatrix,
    pub head_w: DenseMatrix,
    pub head_b: DenseMatrix,
}

/// Backward through the full encoder.
///
/// `d_mu`/`d_log_var` are direct gradients on the Gaussian parameters (the
/// KL term), `d_zu` is the gradient on the sampled user representation, and
/// `d_zm_extra` collects gradients reaching the mid representation through
/// its other consumers (decoder-on-`z_m`, discriminator positives).
#[allow(clippy::too_many_arguments)]
pub(crate) fn encoder_backward(
    x: &DenseMatrix,
    a_norm: Option<&SparseMatrix>,
    p: &ModelParams,
    fwd: &EncoderForward,
    d_mu: &DenseMatrix,
    d_log_var: &DenseMatrix,
    d_zu: &DenseMatrix,
    d_zm_extra: &DenseMatrix,
) -> Result<EncoderGrads> {
    // Reparameterization: z_u = mu + std * eps with std = exp(log_var / 2).
    // dz_u flows into mu one-to-one and into log_var through 0.5 * std * eps.
    let d_mu_total = d_mu.add(d_zu)?;
    let d_lv_total = d_log_var.add(
        &d_zu
            .hadamard(&fwd.latent.eps)?
            .hadamard(&fwd.std)?
            .scale(0.5)?,
    )?;
    let d_gaussian = d_mu_total.concat_cols(&d_lv_total)?;

    let zero_like = |m: &DenseMatrix| DenseMatrix::zeros(m.rows(), m.cols());
    let mut gcn_w0_grad = zero_like(&p.gcn_w0);
    let mut gcn_w1_grad = zero_like(&p.gcn_w1);
    let mut head_w_grad = zero_like(&p.head_w);
    let mut head_b_grad = zero_like(&p.head_b);

    let d_zm_stage = match (&fwd.stage, a_norm) {
        (StageTrace::Gcn(trace), Some(a)) => {
            let (dw1, d_v) = gcn_tail_backward(trace, &d_gaussian, p)?;
            gcn_w1_grad = dw1;
            let d_u = a.transpose_matmul_dense(&d_v)?;
            let d_t = relu_backward(&trace.t_pre, &d_u)?;
            gcn_w0_grad = trace.s.transpose().matmul(&d_t)?;
            let d_s = d_t.matmul(&p.gcn_w0.transpose())?;
            a.transpose_matmul_dense(&d_s)?
        }
        (StageTrace::Head, None) => {
            let (dw, db, d_zm) = linear_backward(&fwd.latent.z_m, &p.head_w, &d_gaussian)?;
            head_w_grad = dw;
            head_b_grad = db;
            d_zm
        }
        _ => {
            return Err(crate::error::Error::Numerical(
                "encoder trace does not match the adjacency argument".into(),
            ))
        }
    };

    let d_zm = d_zm_stage.add(d_zm_extra)?;
    let (mlp_w2, mlp_b2, d_h) = linear_backward(&fwd.mlp.h, &p.mlp_w2, &d_zm)?;
    let d_h_pre = relu_backward(&fwd.mlp.h_pre, &d_h)?;
    let (mlp_w1, mlp_b1, _d_x) = linear_backward(x, &p.mlp_w1, &d_h_pre)?;

    Ok(EncoderGrads {
        mlp_w1,
        mlp_b1,
        mlp_w2,
        mlp_b2,
        gcn_w0: gcn_w0_grad,
        gcn_w1: gcn_w1_grad,
        head_w: head_w_grad,
        head_b: head_b_grad,
    })
}

fn gcn_tail_backward(
    trace: &GcnTrace,
    d_gaussian: &DenseMatrix,
    p: &ModelParams,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let dw1 = trace.v.transpose().matmul(d_gaussian)?;
    let d_v = d_gaussian.matmul(&p.gcn_w1.transpose())?;
    Ok((dw1, d_v))
}

#[derive(Debug, Clone)]
pub(crate) struct DecGrads {
    pub w1: DenseMatrix,
    pub b1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: DenseMatrix,
}

impl DecGrads {
    pub fn accumulate(&mut self, other: &DecGrads) -> Result<()> {
        self.w1.add_assign(&other.w1)?;
        self.b1.add_assign(&other.b1)?;
        self.w2.add_assign(&other.w2)?;
        self.b2.add_assign(&other.b2)?;
        Ok(())
    }
}

/// Backward through the decoder given dL/dlogits (softmax already folded in
/// by the caller). Returns the gradient on the latent input as well.
pub(crate) fn dec_backward(
    z: &DenseMatrix,
    trace: &DecTrace,
    d_logits: &DenseMatrix,
    p: &ModelParams,
) -> Result<(DecGrads, DenseMatrix)> {
    let (w2, b2, d_h) = linear_backward(&trace.h, &p.dec_w2, d_logits)?;
    let d_h_pre = relu_backward(&trace.h_pre, &d_h)?;
    let (w1, b1, d_z) = linear_backward(z, &p.dec_w1, &d_h_pre)?;
    Ok((DecGrads { w1, b1, w2, b2 }, d_z))
}

#[derive(Debug, Clone)]
pub(crate) struct DiscGrads {
    pub w1: DenseMatrix,
    pub b1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: DenseMatrix,
    pub w3: DenseMatrix,
    pub b3: DenseMatrix,
}

impl DiscGrads {
    pub fn accumulate(&mut self, other: &DiscGrads) -> Result<()> {
        self.w1.add_assign(&other.w1)?;
        self.b1.add_assign(&other.b1)?;
        self.w2.add_assign(&other.w2)?;
        self.b2.add_assign(&other.b2)?;
        self.w3.add_assign(&other.w3)?;
        self.b3.add_assign(&other.b3)?;
        Ok(())
    }
}

/// Backward through the discriminator given dL/dscore (post-sigmoid).
/// Returns the gradient on the input rows.
pub(crate) fn disc_backward(
    z: &DenseMatrix,
    trace: &DiscTrace,
    d_scores: &DenseMatrix,
    p: &ModelParams,
) -> Result<(DiscGrads, DenseMatrix)> {
    // Through the sigmoid: d_out = d_score * s * (1 - s).
    let mut d_out = d_scores.clone();
    for r in 0..d_out.rows() {
        let s = trace.scores.get(r, 0);
        let row = d_out.row_mut(r);
        row[0] *= s * (1.0 - s);
    }
    let (w3, b3, d_h2) = linear_backward(&trace.h2, &p.disc_w3, &d_out)?;
    let (w2, b2, d_h1) = linear_backward(&trace.h1, &p.disc_w2, &d_h2)?;
    let d_h1_pre = relu_backward(&trace.h1_pre, &d_h1)?;
    let (w1, b1, d_z) = linear_backward(z, &p.disc_w1, &d_h1_pre)?;
    Ok((
        DiscGrads {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        },
        d_z,
    ))
}
