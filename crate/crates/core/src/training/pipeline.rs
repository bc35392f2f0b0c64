//! Gradient compositions for the three interleaved updates, plus the
//! unrestricted gradient of the weighted total used by the gradient checker.
//!
//! Scope rules implemented here:
//! - the variational update trains the encoder, head and decoder; the
//!   mutual-information term touches the decoder only (its gradient stops at
//!   the latents);
//! - the discriminator update treats both latents as constants;
//! - the adversarial update flows through the (frozen) discriminator into
//!   the GCN weights only.

use crate::error::Result;
use crate::graph::{AttributeSchema, CellMask, UserPartition};
use crate::losses::{
    disc_loss_with_grad, gen_loss_with_grad, kl_gauss_with_grad, mi_constraint_with_grads,
    recon_loss_with_logit_grad, LossBreakdown,
};
use crate::model::{
    dec_backward, disc_backward, disc_forward, encoder_backward, encoder_forward,
    softmax_blocks_backward, DecGrads, DiscGrads, EncoderForward, EncoderGrads, ModelParams,
    ParamGrads,
};
use crate::numerics::{DenseMatrix, SparseMatrix};

/// Weight applied to the KL gradient in the variational update:
/// `1 / n_users`, the normalization used by the graph-VAE implementations
/// this encoder builds on. With the loss terms weighted equally the latent
/// collapses (the KL pull flattens the GCN output and kills its relu within
/// tens of iterations) before the reconstruction signal can use the graph.
/// Reported loss values are unaffected; only the applied gradient is.
pub fn kl_gradient_weight(n_users: usize) -> f64 {
    1.0 / n_users.max(1) as f64
}

/// Immutable per-run tensors shared by every iteration.
pub struct GraphwiseInputs<'a> {
    pub x: &'a DenseMatrix,
    pub a_norm: &'a SparseMatrix,
    pub train_mask: &'a CellMask,
    pub partition: &'a UserPartition,
    pub schema: &'a AttributeSchema,
    pub blocks: &'a [(usize, usize)],
}

pub(crate) struct ModelUpdate {
    pub l_recon: f64,
    pub l_kl: f64,
    pub l_mi: f64,
    pub enc: EncoderGrads,
    pub dec: DecGrads,
}

/// Loss and gradients for the variational step: `L_VAE + lambda * L_MI`,
/// with the MI gradient confined to the decoder. `use_graph = false` routes
/// the encoder through the dense head instead of the GCN.
pub(crate) fn model_update_grads(
    inputs: &GraphwiseInputs,
    p: &ModelParams,
    eps: &DenseMatrix,
    lambda: f64,
    use_graph: bool,
) -> Result<ModelUpdate> {
    let adj = use_graph.then_some(inputs.a_norm);
    let fwd = encoder_forward(inputs.x, adj, p, eps)?;
    let dec_u = crate::model::dec_forward(&fwd.latent.z_u, p, inputs.blocks)?;

    let (l_recon, d_logits_recon) =
        recon_loss_with_logit_grad(&dec_u.probs, inputs.x, inputs.train_mask, inputs.schema)?;
    let (l_kl, d_mu_raw, d_lv_raw) = kl_gauss_with_grad(&fwd.latent.mu, &fwd.latent.log_var)?;
    let kl_w = kl_gradient_weight(inputs.x.rows());
    let d_mu_kl = d_mu_raw.scale(kl_w)?;
    let d_lv_kl = d_lv_raw.scale(kl_w)?;

    let (mut dec_grads, d_zu) = dec_backward(&fwd.latent.z_u, &dec_u, &d_logits_recon, p)?;

    let mut l_mi = 0.0;
    if lambda != 0.0 {
        let dec_m = crate::model::dec_forward(&fwd.latent.z_m, p, inputs.blocks)?;
        let (value, d_xhat_m, d_xhat) =
            mi_constraint_with_grads(&dec_m.probs, &dec_u.probs, inputs.partition)?;
        l_mi = value;
        // lambda-scaled, decoder-only: the latent gradients are dropped.
        let d_logits_mi_u =
            softmax_blocks_backward(&dec_u.probs, &d_xhat.scale(lambda)?, inputs.blocks)?;
        let (g_mi_u, _) = dec_backward(&fwd.latent.z_u, &dec_u, &d_logits_mi_u, p)?;
        dec_grads.accumulate(&g_mi_u)?;
        let d_logits_mi_m =
            softmax_blocks_backward(&dec_m.probs, &d_xhat_m.scale(lambda)?, inputs.blocks)?;
        let (g_mi_m, _) = dec_backward(&fwd.latent.z_m, &dec_m, &d_logits_mi_m, p)?;
        dec_grads.accumulate(&g_mi_m)?;
    }

    let zeros_zm = DenseMatrix::zeros(fwd.latent.z_m.rows(), fwd.latent.z_m.cols());
    let enc = encoder_backward(inputs.x, adj, p, &fwd, &d_mu_kl, &d_lv_kl, &d_zu, &zeros_zm)?;

    Ok(ModelUpdate {
        l_recon,
        l_kl,
        l_mi,
        enc,
        dec: dec_grads,
    })
}

/// Discriminator loss and gradients; the latents are constants here.
pub(crate) fn disc_update_grads(
    p: &ModelParams,
    z_m_labeled: &DenseMatrix,
    z_u: &DenseMatrix,
) -> Result<(f64, DiscGrads)> {
    let trace_pos = disc_forward(z_m_labeled, p)?;
    let trace_neg = disc_forward(z_u, p)?;
    let (l_d, d_pos, d_neg) = disc_loss_with_grad(&trace_pos.scores, &trace_neg.scores)?;
    let (g_pos, _) = disc_backward(z_m_labeled, &trace_pos, &d_pos, p)?;
    let (mut grads, _) = disc_backward(z_u, &trace_neg, &d_neg, p)?;
    grads.accumulate(&g_pos)?;
    Ok((l_d, grads))
}

/// Generator loss and the GCN-only gradient of `beta * L_GNN`: flows through
/// the frozen discriminator, the reparameterization, and the two GCN layers,
/// stopping at the mid representation.
pub(crate) fn adv_update_grads(
    inputs: &GraphwiseInputs,
    p: &ModelParams,
    fwd: &EncoderForward,
    beta: f64,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    let trace = disc_forward(&fwd.latent.z_u, p)?;
    let (l_gnn, d_scores) = gen_loss_with_grad(&trace.scores)?;
    let (_, d_zu) = disc_backward(&fwd.latent.z_u, &trace, &d_scores.scale(beta)?, p)?;
    let zeros = DenseMatrix::zeros(fwd.latent.mu.rows(), fwd.latent.mu.cols());
    let zeros_zm = DenseMatrix::zeros(fwd.latent.z_m.rows(), fwd.latent.z_m.cols());
    let enc = encoder_backward(
        inputs.x,
        Some(inputs.a_norm),
        p,
        fwd,
        &zeros,
        &zeros,
        &d_zu,
        &zeros_zm,
    )?;
    Ok((l_gnn, enc.gcn_w0, enc.gcn_w1))
}

/// Value and unrestricted gradient of the full weighted total
/// `L_VAE + beta * (L_D + L_GNN) + lambda * L_MI` over one shared forward
/// pass with frozen noise. Every path flows into every parameter it reaches;
/// this is exactly what central finite differences of the total measure.
pub fn total_loss_grads(
    inputs: &GraphwiseInputs,
    p: &ModelParams,
    eps: &DenseMatrix,
    beta: f64,
    lambda: f64,
) -> Result<(LossBreakdown, ParamGrads)> {
    let fwd = encoder_forward(inputs.x, Some(inputs.a_norm), p, eps)?;
    let dec_u = crate::model::dec_forward(&fwd.latent.z_u, p, inputs.blocks)?;
    let dec_m = crate::model::dec_forward(&fwd.latent.z_m, p, inputs.blocks)?;

    let (l_recon, d_logits_recon) =
        recon_loss_with_logit_grad(&dec_u.probs, inputs.x, inputs.train_mask, inputs.schema)?;
    let (l_kl, d_mu_kl, d_lv_kl) = kl_gauss_with_grad(&fwd.latent.mu, &fwd.latent.log_var)?;

    let z_m_labeled = fwd.latent.z_m.gather_rows(&inputs.partition.labeled);
    let trace_pos = disc_forward(&z_m_labeled, p)?;
    let trace_neg = disc_forward(&fwd.latent.z_u, p)?;
    let (l_d, d_pos, d_neg_disc) = disc_loss_with_grad(&trace_pos.scores, &trace_neg.scores)?;
    let (l_gnn, d_neg_gen) = gen_loss_with_grad(&trace_neg.scores)?;

    let (l_mi, d_xhat_m, d_xhat) =
        mi_constraint_with_grads(&dec_m.probs, &dec_u.probs, inputs.partition)?;

    // Decoder backward, z_u path: reconstruction plus lambda-weighted MI.
    let d_logits_u = d_logits_recon.add(&softmax_blocks_backward(
        &dec_u.probs,
        &d_xhat.scale(lambda)?,
        inputs.blocks,
    )?)?;
    let (dec_grads_u, d_zu_dec) = dec_backward(&fwd.latent.z_u, &dec_u, &d_logits_u, p)?;

    // Decoder backward, z_m path: lambda-weighted MI.
    let d_logits_m =
        softmax_blocks_backward(&dec_m.probs, &d_xhat_m.scale(lambda)?, inputs.blocks)?;
    let (dec_grads_m, d_zm_dec) = dec_backward(&fwd.latent.z_m, &dec_m, &d_logits_m, p)?;

    // Discriminator backward with beta-weighted upstreams.
    let (disc_grads_pos, d_zm_labeled) =
        disc_backward(&z_m_labeled, &trace_pos, &d_pos.scale(beta)?, p)?;
    let d_neg_total = d_neg_disc.add(&d_neg_gen)?.scale(beta)?;
    let (disc_grads_neg, d_zu_disc) = disc_backward(&fwd.latent.z_u, &trace_neg, &d_neg_total, p)?;

    // Accumulate latent gradients and run the encoder backward once.
    let d_zu = d_zu_dec.add(&d_zu_disc)?;
    let mut d_zm_extra = d_zm_dec;
    d_zm_extra.scatter_rows_add(&inputs.partition.labeled, &d_zm_labeled)?;
    let enc = encoder_backward(
        inputs.x,
        Some(inputs.a_norm),
        p,
        &fwd,
        &d_mu_kl,
        &d_lv_kl,
        &d_zu,
        &d_zm_extra,
    )?;

    let mut grads = ParamGrads::zeros_like(p);
    grads.mlp_w1 = enc.mlp_w1;
    grads.mlp_b1 = enc.mlp_b1;
    grads.mlp_w2 = enc.mlp_w2;
    grads.mlp_b2 = enc.mlp_b2;
    grads.gcn_w0 = enc.gcn_w0;
    grads.gcn_w1 = enc.gcn_w1;
    grads.head_w = enc.head_w;
    grads.head_b = enc.head_b;
    grads.dec_w1 = dec_grads_u.w1.add(&dec_grads_m.w1)?;
    grads.dec_b1 = dec_grads_u.b1.add(&dec_grads_m.b1)?;
    grads.dec_w2 = dec_grads_u.w2.add(&dec_grads_m.w2)?;
    grads.dec_b2 = dec_grads_u.b2.add(&dec_grads_m.b2)?;
    grads.disc_w1 = disc_grads_pos.w1.add(&disc_grads_neg.w1)?;
    grads.disc_b1 = disc_grads_pos.b1.add(&disc_grads_neg.b1)?;
    grads.disc_w2 = disc_grads_pos.w2.add(&disc_grads_neg.w2)?;
    grads.disc_b2 = disc_grads_pos.b2.add(&disc_grads_neg.b2)?;
    grads.disc_w3 = disc_grads_pos.w3.add(&disc_grads_neg.w3)?;
    grads.disc_b3 = disc_grads_pos.b3.add(&disc_grads_neg.b3)?;

    let breakdown = LossBreakdown::new(l_recon, l_kl, l_d, l_gnn, l_mi, beta, lambda)?;
    Ok((breakdown, grads))
}

/// Value of the full weighted total for a given parameter set; the scalar
/// function that the gradient checker perturbs.
pub fn total_loss_value(
    inputs: &GraphwiseInputs,
    p: &ModelParams,
    eps: &DenseMatrix,
    beta: f64,
    lambda: f64,
) -> Result<f64> {
    let (breakdown, _) = total_loss_grads(inputs, p, eps, beta, lambda)?;
    Ok(breakdown.total)
}
