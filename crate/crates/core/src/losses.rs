//! Training objectives: masked reconstruction, Gaussian KL, the adversarial
//! pair, InfoNCE, the mutual-information constraint, and the weighted total.
//!
//! Log arguments are clamped below at 1e-12 (the adversarial losses diverge
//! otherwise early in training), and InfoNCE uses log-sum-exp stabilization.
//! Each loss has a `*_grad` companion returning the exact gradient of the
//! clamped value, so finite differences of the loss match the analytic path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, CellMask, UserPartition};
use crate::numerics::DenseMatrix;

const LOG_CLAMP: f64 = 1e-12;

/// Per-iteration loss values. `total` always satisfies
/// `total = l_vae + beta * (l_d + l_gnn) + lambda * l_mi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_vae: f64,
    pub l_recon: f64,
    pub l_kl: f64,
    pub l_d: f64,
    pub l_gnn: f64,
    pub l_mi: f64,
    pub beta: f64,
    pub lambda: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(
        l_recon: f64,
        l_kl: f64,
        l_d: f64,
        l_gnn: f64,
        l_mi: f64,
        beta: f64,
        lambda: f64,
    ) -> Result<Self> {
        let l_vae = l_recon + l_kl;
        let total = total_loss(l_vae, l_d, l_gnn, l_mi, beta, lambda)?;
        Ok(LossBreakdown {
            l_vae,
            l_recon,
            l_kl,
            l_d,
            l_gnn,
            l_mi,
            beta,
            lambda,
            total,
        })
    }
}

fn clamped_ln(v: f64) -> f64 {
    v.max(LOG_CLAMP).ln()
}

/// Locates the one-hot target column of a visible cell inside its block.
fn target_column(x: &DenseMatrix, user: usize, block: (usize, usize)) -> Result<usize> {
    let (start, end) = block;
    let row = x.row(user);
    for (col, &v) in row.iter().enumerate().take(end).skip(start) {
        if v == 1.0 {
            return Ok(col);
        }
    }
    Err(Error::Numerical(format!(
        "no one-hot target for user {user} in feature columns {start}..{end}; \
         the mask covers a cell the feature matrix does not encode"
    )))
}

/// Mean categorical cross-entropy over train-visible cells only; masked and
/// missing cells contribute nothing. Returns 0 when no cell is visible.
pub fn recon_loss(
    x_hat: &DenseMatrix,
    x: &DenseMatrix,
    train: &CellMask,
    schema: &AttributeSchema,
) -> Result<f64> {
    let (value, _) = recon_loss_with_logit_grad(x_hat, x, train, schema)?;
    Ok(value)
}

/// Reconstruction loss plus its gradient expressed directly on the decoder
/// logits: `(p_block - onehot) / M` for each counted cell.
pub fn recon_loss_with_logit_grad(
    x_hat: &DenseMatrix,
    x: &DenseMatrix,
    train: &CellMask,
    schema: &AttributeSchema,
) -> Result<(f64, DenseMatrix)> {
    let mut d_logits = DenseMatrix::zeros(x_hat.rows(), x_hat.cols());
    let cells = train.cells();
    let m = cells.len();
    if m == 0 {
        return Ok((0.0, d_logits));
    }
    let inv_m = 1.0 / m as f64;
    let mut value = 0.0;
    for &(u, j) in &cells {
        let block = schema.block(j);
        let target = target_column(x, u, block)?;
        let p = x_hat.get(u, target);
        if p.is_nan() || p <= 0.0 {
            return Err(Error::Numerical(format!(
                "reconstruction probability {p} at user {u}, column {target}"
            )));
        }
        value -= clamped_ln(p) * inv_m;
        // Gradient of the clamped log is zero below the clamp threshold.
        if p > LOG_CLAMP {
            let row = d_logits.row_mut(u);
            for (c, slot) in row.iter_mut().enumerate().take(block.1).skip(block.0) {
                *slot += x_hat.get(u, c) * inv_m;
            }
            row[target] -= inv_m;
        }
    }
    Ok((value, d_logits))
}

/// Mean (over rows) KL divergence from `N(mu, exp(log_var))` to the standard
/// normal: `0.5 * sum_d(exp(lv) + mu^2 - 1 - lv)` per row. Always >= 0.
pub fn kl_gauss(mu: &DenseMatrix, log_var: &DenseMatrix) -> Result<f64> {
    let (value, _, _) = kl_gauss_with_grad(mu, log_var)?;
    Ok(value)
}

pub fn kl_gauss_with_grad(
    mu: &DenseMatrix,
    log_var: &DenseMatrix,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    if mu.shape() != log_var.shape() {
        return Err(Error::Dimension {
            op: "kl_gauss",
            lhs_rows: mu.rows(),
            lhs_cols: mu.cols(),
            rhs_rows: log_var.rows(),
            rhs_cols: log_var.cols(),
        });
    }
    let n = mu.rows();
    if n == 0 {
        return Ok((0.0, mu.clone(), log_var.clone()));
    }
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut d_mu = DenseMatrix::zeros(n, mu.cols());
    let mut d_lv = DenseMatrix::zeros(n, mu.cols());
    for r in 0..n {
        for c in 0..mu.cols() {
            let m = mu.get(r, c);
            let lv = log_var.get(r, c);
            value += 0.5 * (lv.exp() + m * m - 1.0 - lv) * inv_n;
            d_mu.set(r, c, m * inv_n);
            d_lv.set(r, c, 0.5 * (lv.exp() - 1.0) * inv_n);
        }
    }
    Ok((value, d_mu, d_lv))
}

/// Discriminator objective: positives (mid latents of fully labeled users)
/// should score 1, negatives (user latents) should score 0. The two
/// expectations are averaged independently so an imbalanced positive set
/// keeps full weight.
pub fn disc_loss(scores_pos: &DenseMatrix, scores_neg: &DenseMatrix) -> Result<f64> {
    let (value, _, _) = disc_loss_with_grad(scores_pos, scores_neg)?;
    Ok(value)
}

pub fn disc_loss_with_grad(
    scores_pos: &DenseMatrix,
    scores_neg: &DenseMatrix,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    let p = scores_pos.rows();
    let q = scores_neg.rows();
    if p == 0 {
        return Err(Error::Config(
            "discriminator loss has no positive examples (no fully labeled users)".into(),
        ));
    }
    if q == 0 {
        return Err(Error::Config(
            "discriminator loss has no negative examples".into(),
        ));
    }
    let mut value = 0.0;
    let mut d_pos = DenseMatrix::zeros(p, 1);
    let mut d_neg = DenseMatrix::zeros(q, 1);
    for i in 0..p {
        let s = scores_pos.get(i, 0);
        value -= clamped_ln(s) / p as f64;
        if s > LOG_CLAMP {
            d_pos.set(i, 0, -1.0 / (p as f64 * s));
        }
    }
    for j in 0..q {
        let s = scores_neg.get(j, 0);
        value -= clamped_ln(1.0 - s) / q as f64;
        if 1.0 - s > LOG_CLAMP {
            d_neg.set(j, 0, 1.0 / (q as f64 * (1.0 - s)));
        }
    }
    Ok((value, d_pos, d_neg))
}

/// Generator objective: make the discriminator score user latents as
/// positives. Returns 0 for an empty score set.
pub fn gen_loss(scores: &DenseMatrix) -> Result<f64> {
    let (value, _) = gen_loss_with_grad(scores)?;
    Ok(value)
}

pub fn gen_loss_with_grad(scores: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let k = scores.rows();
    let mut d = DenseMatrix::zeros(k, 1);
    if k == 0 {
        return Ok((0.0, d));
    }
    let mut value = 0.0;
    for i in 0..k {
        let s = scores.get(i, 0);
        value -= clamped_ln(s) / k as f64;
        if s > LOG_CLAMP {
            d.set(i, 0, -1.0 / (k as f64 * s));
        }
    }
    Ok((value, d))
}

/// InfoNCE lower bound on mutual information between paired rows, with the
/// inner-product critic. Bounded above by `ln K`; exactly 0 for `K = 1`.
pub fn infonce(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    let (value, _, _) = infonce_with_grad(x, y)?;
    Ok(value)
}

pub fn infonce_with_grad(
    x: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension {
            op: "infonce",
            lhs_rows: x.rows(),
            lhs_cols: x.cols(),
            rhs_rows: y.rows(),
            rhs_cols: y.cols(),
        });
    }
    let k = x.rows();
    if k == 0 {
        return Err(Error::Config("infonce over zero samples".into()));
    }
    let inv_k = 1.0 / k as f64;
    // Score matrix s_ij = x_i . y_j.
    let scores = x.matmul(&y.transpose())?;
    let mut value = (k as f64).ln();
    // Row-wise softmax weights feed the gradient: d s_ij = (delta_ij - w_ij) / K.
    let mut d_scores = DenseMatrix::zeros(k, k);
    for i in 0..k {
        let row = scores.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut denom = 0.0;
        for &s in row {
            denom += (s - max).exp();
        }
        let lse = max + denom.ln();
        value += (row[i] - lse) * inv_k;
        let d_row = d_scores.row_mut(i);
        for (j, &s) in row.iter().enumerate() {
            let w = (s - max).exp() / denom;
            d_row[j] = (if i == j { 1.0 } else { 0.0 } - w) * inv_k;
        }
    }
    let d_x = d_scores.matmul(y)?;
    let d_y = d_scores.transpose().matmul(x)?;
    Ok((value, d_x, d_y))
}

/// Mutual-information constraint on the decoder: pull the reconstruction
/// pairs of fully labeled users together and push the pairs of incompletely
/// labeled users apart. The unlabeled term is omitted when that side of the
/// partition is empty.
pub fn mi_constraint(
    x_hat_m: &DenseMatrix,
    x_hat: &DenseMatrix,
    partition: &UserPartition,
) -> Result<f64> {
    let (value, _, _) = mi_constraint_with_grads(x_hat_m, x_hat, partition)?;
    Ok(value)
}

/// Returns `(value, d_x_hat_m, d_x_hat)` with gradients scattered back to
/// full `N x F` shape.
pub fn mi_constraint_with_grads(
    x_hat_m: &DenseMatrix,
    x_hat: &DenseMatrix,
    partition: &UserPartition,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    if partition.labeled.is_empty() {
        return Err(Error::Config(
            "mutual-information constraint needs at least one fully labeled user".into(),
        ));
    }
    let mut d_m = DenseMatrix::zeros(x_hat_m.rows(), x_hat_m.cols());
    let mut d_u = DenseMatrix::zeros(x_hat.rows(), x_hat.cols());

    let xl = x_hat_m.gather_rows(&partition.labeled);
    let yl = x_hat.gather_rows(&partition.labeled);
    let (mi_l, dx_l, dy_l) = infonce_with_grad(&xl, &yl)?;
    d_m.scatter_rows_add(&partition.labeled, &dx_l.scale(-1.0)?)?;
    d_u.scatter_rows_add(&partition.labeled, &dy_l.scale(-1.0)?)?;
    let mut value = -mi_l;

    if !partition.unlabeled.is_empty() {
        let xu = x_hat_m.gather_rows(&partition.unlabeled);
        let yu = x_hat.gather_rows(&partition.unlabeled);
        let (mi_u, dx_u, dy_u) = infonce_with_grad(&xu, &yu)?;
        d_m.scatter_rows_add(&partition.unlabeled, &dx_u)?;
        d_u.scatter_rows_add(&partition.unlabeled, &dy_u)?;
        value += mi_u;
    }
    Ok((value, d_m, d_u))
}

/// Weighted total `l_vae + beta * (l_d + l_gnn) + lambda * l_mi`. Any
/// non-finite part aborts with the part's name.
pub fn total_loss(
    l_vae: f64,
    l_d: f64,
    l_gnn: f64,
    l_mi: f64,
    beta: f64,
    lambda: f64,
) -> Result<f64> {
    for (name, v) in [
        ("l_vae", l_vae),
        ("l_d", l_d),
        ("l_gnn", l_gnn),
        ("l_mi", l_mi),
    ] {
        if !v.is_finite() {
            return Err(Error::Numerical(format!("loss part {name} is {v}")));
        }
    }
    Ok(l_vae + beta * (l_d + l_gnn) + lambda * l_mi)
}
