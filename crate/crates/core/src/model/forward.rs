//! Forward passes of the four networks.
//!
//! The trace-returning variants keep every intermediate needed by the
//! hand-derived backward passes; the plain functions are the public API and
//! drop the traces.

use crate::error::{Error, Result};
use crate::graph::AttributeSchema;
use crate::model::params::ModelParams;
use crate::numerics::{softmax_blocks, DenseMatrix, ElementwiseOp, SparseMatrix};

/// Dual latent representations of one forward pass: the deterministic mid
/// representation from the MLP, and the Gaussian user representation with
/// its reparameterization pieces. `z_u = mu + exp(log_var / 2) * eps` holds
/// exactly.
#[derive(Debug, Clone)]
pub struct LatentPair {
    pub z_m: DenseMatrix,
    pub mu: DenseMatrix,
    pub log_var: DenseMatrix,
    pub eps: DenseMatrix,
    pub z_u: DenseMatrix,
}

/// Decoder outputs for both latents; each row is a concatenation of
/// per-attribute probability blocks.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub x_hat: DenseMatrix,
    pub x_hat_m: DenseMatrix,
}

pub(crate) struct MlpTrace {
    pub h_pre: DenseMatrix,
    pub h: DenseMatrix,
}

pub(crate) struct GcnTrace {
    /// `A_norm * z_m`
    pub s: DenseMatrix,
    /// `s * W0`, pre-activation (the relu mask for the backward pass)
    pub t_pre: DenseMatrix,
    /// `A_norm * relu(t_pre)`
    pub v: DenseMatrix,
}

pub(crate) enum StageTrace {
    Gcn(GcnTrace),
    Head,
}

/// Encoder intermediates for one forward pass.
pub(crate) struct EncoderForward {
    pub latent: LatentPair,
    pub mlp: MlpTrace,
    pub stage: StageTrace,
    /// `exp(log_var / 2)`, cached for the reparameterization backward.
    pub std: DenseMatrix,
}

pub(crate) struct DecTrace {
    pub h_pre: DenseMatrix,
    pub h: DenseMatrix,
    pub probs: DenseMatrix,
}

pub(crate) struct DiscTrace {
    pub h1_pre: DenseMatrix,
    pub h1: DenseMatrix,
    pub h2: DenseMatrix,
    /// Post-sigmoid scores, one column.
    pub scores: DenseMatrix,
}

fn linear(x: &DenseMatrix, w: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    x.matmul(w)?.add_row_vector(b)
}

pub(crate) fn mlp_forward(x: &DenseMatrix, p: &ModelParams) -> Result<(MlpTrace, DenseMatrix)> {
    let h_pre = linear(x, &p.mlp_w1, &p.mlp_b1)?;
    let h = h_pre.apply(ElementwiseOp::Relu)?;
    let z_m = linear(&h, &p.mlp_w2, &p.mlp_b2)?;
    Ok((MlpTrace { h_pre, h }, z_m))
}

/// `z = mu + exp(log_var / 2) * eps`; returns `(std, z)`.
pub(crate) fn reparameterize(
    mu: &DenseMatrix,
    log_var: &DenseMatrix,
    eps: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let std = log_var.scale(0.5)?.apply(ElementwiseOp::Exp)?;
    let z = mu.add(&std.hadamard(eps)?)?;
    Ok((std, z))
}

pub(crate) fn gcn_forward(
    z_m: &DenseMatrix,
    a_norm: &SparseMatrix,
    p: &ModelParams,
    eps: &DenseMatrix,
) -> Result<(GcnTrace, DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix)> {
    let s = a_norm.matmul_dense(z_m)?;
    let t_pre = s.matmul(&p.gcn_w0)?;
    let u = t_pre.apply(ElementwiseOp::Relu)?;
    let v = a_norm.matmul_dense(&u)?;
    let gaussian = v.matmul(&p.gcn_w1)?;
    let (mu, log_var) = gaussian.split_cols(p.dims.latent)?;
    let (std, z_u) = reparameterize(&mu, &log_var, eps)?;
    Ok((GcnTrace { s, t_pre, v }, mu, log_var, std, z_u))
}

fn head_forward(
    z_m: &DenseMatrix,
    p: &ModelParams,
    eps: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix)> {
    let gaussian = linear(z_m, &p.head_w, &p.head_b)?;
    let (mu, log_var) = gaussian.split_cols(p.dims.latent)?;
    let (std, z_u) = reparameterize(&mu, &log_var, eps)?;
    Ok((mu, log_var, std, z_u))
}

/// Full encoder pass. With `a_norm = Some(..)` the user representation comes
/// from the two GCN layers; with `None` it comes from the dense
/// reparameterization head (graph-free baseline).
pub(crate) fn encoder_forward(
    x: &DenseMatrix,
    a_norm: Option<&SparseMatrix>,
    p: &ModelParams,
    eps: &DenseMatrix,
) -> Result<EncoderForward> {
    let (mlp, z_m) = mlp_forward(x, p)?;
    match a_norm {
        Some(a) => {
            let (gcn, mu, log_var, std, z_u) = gcn_forward(&z_m, a, p, eps)?;
            Ok(EncoderForward {
                latent: LatentPair {
                    z_m,
                    mu,
                    log_var,
                    eps: eps.clone(),
                    z_u,
                },
                mlp,
                stage: StageTrace::Gcn(gcn),
                std,
            })
        }
        None => {
            let (mu, log_var, std, z_u) = head_forward(&z_m, p, eps)?;
            Ok(EncoderForward {
                latent: LatentPair {
                    z_m,
                    mu,
                    log_var,
                    eps: eps.clone(),
                    z_u,
                },
                mlp,
                stage: StageTrace::Head,
                std,
            })
        }
    }
}

pub(crate) fn dec_forward(
    z: &DenseMatrix,
    p: &ModelParams,
    blocks: &[(usize, usize)],
) -> Result<DecTrace> {
    let h_pre = linear(z, &p.dec_w1, &p.dec_b1)?;
    let h = h_pre.apply(ElementwiseOp::Relu)?;
    let logits = linear(&h, &p.dec_w2, &p.dec_b2)?;
    let probs = softmax_blocks(&logits, blocks)?;
    Ok(DecTrace { h_pre, h, probs })
}

pub(crate) fn disc_forward(z: &DenseMatrix, p: &ModelParams) -> Result<DiscTrace> {
    let h1_pre = linear(z, &p.disc_w1, &p.disc_b1)?;
    let h1 = h1_pre.apply(ElementwiseOp::Relu)?;
    let h2 = linear(&h1, &p.disc_w2, &p.disc_b2)?;
    let out = linear(&h2, &p.disc_w3, &p.disc_b3)?;
    let scores = out.apply(ElementwiseOp::Sigmoid)?;
    Ok(DiscTrace {
        h1_pre,
        h1,
        h2,
        scores,
    })
}

/// Mid latent representation from observed attributes only.
pub fn encode_mlp(x: &DenseMatrix, params: &ModelParams) -> Result<DenseMatrix> {
    let (_, z_m) = mlp_forward(x, params)?;
    Ok(z_m)
}

/// Two GCN layers over the normalized adjacency followed by Gaussian
/// reparameterization: returns `(mu, log_var, z_u)`.
pub fn encode_gnn(
    z_m: &DenseMatrix,
    a_norm: &SparseMatrix,
    params: &ModelParams,
    eps: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    if eps.shape() != (z_m.rows(), params.dims.latent) {
        return Err(Error::Dimension {
            op: "encode_gnn",
            lhs_rows: z_m.rows(),
            lhs_cols: params.dims.latent,
            rhs_rows: eps.rows(),
            rhs_cols: eps.cols(),
        });
    }
    let (_, mu, log_var, _, z_u) = gcn_forward(z_m, a_norm, params, eps)?;
    Ok((mu, log_var, z_u))
}

/// Decodes a latent matrix into per-attribute-block probability rows. The
/// same decoder parameters serve both latents.
pub fn decode(
    z: &DenseMatrix,
    params: &ModelParams,
    schema: &AttributeSchema,
) -> Result<DenseMatrix> {
    Ok(dec_forward(z, params, &schema.blocks())?.probs)
}

/// Per-row score in (0, 1): the estimated probability that a row is a mid
/// latent representation of a fully labeled user.
pub fn discriminate(z: &DenseMatrix, params: &ModelParams) -> Result<DenseMatrix> {
    Ok(disc_forward(z, params)?.scores)
}

/// Decodes both latents of a pair with the shared decoder.
pub fn reconstruct(
    latent: &LatentPair,
    params: &ModelParams,
    schema: &AttributeSchema,
) -> Result<Reconstruction> {
    Ok(Reconstruction {
        x_hat: decode(&latent.z_u, params, schema)?,
        x_hat_m: decode(&latent.z_m, params, schema)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Dims;
    use crate::numerics::Rng;

    fn tiny_dims() -> Dims {
        Dims {
            latent: 2,
            mlp_hidden: 3,
            gcn_hidden: 3,
            decoder_hidden: 4,
        }
    }

    fn schema() -> AttributeSchema {
        AttributeSchema::from_counts(&[("a", 2), ("b", 3)]).unwrap()
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_mid_latent() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(1));
        let x = DenseMatrix::zeros(3, 5);
        let z_m = encode_mlp(&x, &p).unwrap();
        assert!(z_m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mlp_matches_scalar_oracle() {
        // 2x2 weights, hand-forwarded per scalar.
        let mut p = ModelParams::init(
            Dims {
                latent: 2,
                mlp_hidden: 2,
                gcn_hidden: 2,
                decoder_hidden: 2,
            },
            2,
            &mut Rng::new(0),
        );
        p.mlp_w1 = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 1.0]]).unwrap();
        p.mlp_b1 = DenseMatrix::from_rows(&[vec![0.1, -0.1]]).unwrap();
        p.mlp_w2 = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![-1.0, 1.0]]).unwrap();
        p.mlp_b2 = DenseMatrix::from_rows(&[vec![0.0, 0.3]]).unwrap();
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();

        // h_pre = [1*1 + 2*0.5 + 0.1, 1*(-2) + 2*1 - 0.1] = [2.1, -0.1]
        // h = [2.1, 0]; z = [2.1*2 + 0*(-1) + 0, 2.1*0 + 0*1 + 0.3]
        let z = encode_mlp(&x, &p).unwrap();
        assert!((z.get(0, 0) - 4.2).abs() < 1e-12);
        assert!((z.get(0, 1) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_produce_identical_latents() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(2));
        let row = vec![1.0, 0.0, 0.0, 1.0, 0.0];
        let x = DenseMatrix::from_rows(&[row.clone(), row]).unwrap();
        let z_m = encode_mlp(&x, &p).unwrap();
        assert_eq!(z_m.row(0), z_m.row(1));
    }

    #[test]
    fn zero_eps_makes_z_u_equal_mu() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(3));
        let x = DenseMatrix::from_rows(&vec![vec![1.0, 0.0, 1.0, 0.0, 0.0]; 3]).unwrap();
        let z_m = encode_mlp(&x, &p).unwrap();
        let a = SparseMatrix::identity(3);
        let eps = DenseMatrix::zeros(3, 2);
        let (mu, _, z_u) = encode_gnn(&z_m, &a, &p, &eps).unwrap();
        assert_eq!(mu, z_u);
    }

    #[test]
    fn identity_adjacency_is_local() {
        // With A_norm = I each user's Gaussian depends only on its own z_m.
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(4));
        let x =
            DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0, 0.0]])
                .unwrap();
        let z_m = encode_mlp(&x, &p).unwrap();
        let eps = DenseMatrix::zeros(2, 2);
        let a2 = SparseMatrix::identity(2);
        let (mu_full, lv_full, _) = encode_gnn(&z_m, &a2, &p, &eps).unwrap();

        // Forward each row on its own and compare.
        for r in 0..2 {
            let z_row = z_m.gather_rows(&[r]);
            let a1 = SparseMatrix::identity(1);
            let eps1 = DenseMatrix::zeros(1, 2);
            let (mu_row, lv_row, _) = encode_gnn(&z_row, &a1, &p, &eps1).unwrap();
            for c in 0..2 {
                assert!((mu_full.get(r, c) - mu_row.get(0, c)).abs() < 1e-12);
                assert!((lv_full.get(r, c) - lv_row.get(0, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gcn_three_node_path_matches_dense_oracle() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(5));
        let z_m =
            DenseMatrix::from_rows(&[vec![0.5, -0.2], vec![1.0, 0.3], vec![-0.4, 0.8]]).unwrap();
        // Path 0-1-2 with self-loops.
        let schema = AttributeSchema::from_counts(&[("x", 2)]).unwrap();
        let g = crate::graph::AttributedGraph::new(3, vec![(0, 1), (1, 2)], schema, vec![1, 2, 1])
            .unwrap();
        let a = crate::graph::normalize_adjacency(&g);
        let eps = DenseMatrix::zeros(3, 2);
        let (mu, lv, _) = encode_gnn(&z_m, &a, &p, &eps).unwrap();

        // Dense oracle: A relu(A z W0) W1 with explicit dense matrices.
        let ad = a.densify();
        let hidden = ad
            .matmul(&z_m)
            .unwrap()
            .matmul(&p.gcn_w0)
            .unwrap()
            .apply(ElementwiseOp::Relu)
            .unwrap();
        let gaussian = ad.matmul(&hidden).unwrap().matmul(&p.gcn_w1).unwrap();
        let (mu_o, lv_o) = gaussian.split_cols(2).unwrap();
        for r in 0..3 {
            for c in 0..2 {
                assert!((mu.get(r, c) - mu_o.get(r, c)).abs() < 1e-12);
                assert!((lv.get(r, c) - lv_o.get(r, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_adjacency_outputs_are_row_equivariant() {
        // With A_norm = I, permuting the users permutes every output the
        // same way.
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(20));
        let mut rng = Rng::new(21);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| rng.uniform(0.0, 1.0)).collect())
            .collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let perm = [2usize, 0, 3, 1];
        let x_perm = x.gather_rows(&perm);
        let eps = DenseMatrix::zeros(4, 2);
        let a = SparseMatrix::identity(4);

        let z_m = encode_mlp(&x, &p).unwrap();
        let z_m_perm = encode_mlp(&x_perm, &p).unwrap();
        assert_eq!(z_m.gather_rows(&perm), z_m_perm);

        let (mu, lv, zu) = encode_gnn(&z_m, &a, &p, &eps).unwrap();
        let (mu_p, lv_p, zu_p) = encode_gnn(&z_m_perm, &a, &p, &eps).unwrap();
        assert_eq!(mu.gather_rows(&perm), mu_p);
        assert_eq!(lv.gather_rows(&perm), lv_p);
        assert_eq!(zu.gather_rows(&perm), zu_p);

        let schema = AttributeSchema::from_counts(&[("a", 2), ("b", 3)]).unwrap();
        let probs = decode(&zu, &p, &schema).unwrap();
        let probs_p = decode(&zu_p, &p, &schema).unwrap();
        assert_eq!(probs.gather_rows(&perm), probs_p);
    }

    #[test]
    fn reparameterization_identity_holds_exactly() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(6));
        let mut rng = Rng::new(7);
        let x_data: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| rng.uniform(0.0, 1.0)).collect())
            .collect();
        let x = DenseMatrix::from_rows(&x_data).unwrap();
        let z_m = encode_mlp(&x, &p).unwrap();
        let a = SparseMatrix::identity(4);
        let eps_data: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2).map(|_| rng.normal()).collect())
            .collect();
        let eps = DenseMatrix::from_rows(&eps_data).unwrap();
        let (mu, lv, z_u) = encode_gnn(&z_m, &a, &p, &eps).unwrap();
        for r in 0..4 {
            for c in 0..2 {
                let expect = mu.get(r, c) + (0.5 * lv.get(r, c)).exp() * eps.get(r, c);
                assert_eq!(z_u.get(r, c), expect);
            }
        }
    }

    #[test]
    fn decoder_zero_everything_is_uniform_per_block() {
        let mut p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(8));
        p.dec_w1 = DenseMatrix::zeros(2, 4);
        p.dec_w2 = DenseMatrix::zeros(4, 5);
        let z = DenseMatrix::zeros(2, 2);
        let probs = decode(&z, &p, &schema()).unwrap();
        for r in 0..2 {
            assert!((probs.get(r, 0) - 0.5).abs() < 1e-12);
            assert!((probs.get(r, 1) - 0.5).abs() < 1e-12);
            for c in 2..5 {
                assert!((probs.get(r, c) - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decoder_blocks_sum_to_one() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(9));
        let mut rng = Rng::new(10);
        let z_data: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..2).map(|_| rng.normal()).collect())
            .collect();
        let z = DenseMatrix::from_rows(&z_data).unwrap();
        let s = schema();
        let probs = decode(&z, &p, &s).unwrap();
        for r in 0..6 {
            for (start, end) in s.blocks() {
                let sum: f64 = probs.row(r)[start..end].iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn decoder_is_shared_between_latents() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(11));
        let z = DenseMatrix::from_rows(&[vec![0.4, -1.2]]).unwrap();
        let a = decode(&z, &p, &schema()).unwrap();
        let b = decode(&z, &p, &schema()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reconstruct_decodes_both_latents_identically_to_decode() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(30));
        let mut rng = Rng::new(31);
        let x_data: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..5).map(|_| rng.uniform(0.0, 1.0)).collect())
            .collect();
        let x = DenseMatrix::from_rows(&x_data).unwrap();
        let z_m = encode_mlp(&x, &p).unwrap();
        let a = SparseMatrix::identity(3);
        let eps = DenseMatrix::zeros(3, 2);
        let (mu, log_var, z_u) = encode_gnn(&z_m, &a, &p, &eps).unwrap();
        let latent = LatentPair {
            z_m: z_m.clone(),
            mu,
            log_var,
            eps,
            z_u: z_u.clone(),
        };
        let s = schema();
        let rec = reconstruct(&latent, &p, &s).unwrap();
        assert_eq!(rec.x_hat, decode(&z_u, &p, &s).unwrap());
        assert_eq!(rec.x_hat_m, decode(&z_m, &p, &s).unwrap());
    }

    #[test]
    fn zero_weight_discriminator_scores_half() {
        let mut p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(12));
        p.disc_w1 = DenseMatrix::zeros(2, 16);
        p.disc_w2 = DenseMatrix::zeros(16, 4);
        p.disc_w3 = DenseMatrix::zeros(4, 1);
        let z = DenseMatrix::from_rows(&[vec![3.0, -1.0], vec![0.0, 0.0]]).unwrap();
        let s = discriminate(&z, &p).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
    }

    #[test]
    fn identical_rows_get_identical_scores() {
        let p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(13));
        let z = DenseMatrix::from_rows(&[vec![0.7, 0.2], vec![0.7, 0.2]]).unwrap();
        let s = discriminate(&z, &p).unwrap();
        assert_eq!(s.get(0, 0), s.get(1, 0));
        assert!(s.get(0, 0) > 0.0 && s.get(0, 0) < 1.0);
    }

    #[test]
    fn discriminator_matches_scalar_oracle() {
        // 2-dim input with tiny fixed weights, forwarded by hand.
        let mut p = ModelParams::init(tiny_dims(), 5, &mut Rng::new(14));
        p.disc_w1 = DenseMatrix::zeros(2, 16);
        p.disc_w1.set(0, 0, 1.0);
        p.disc_w1.set(1, 1, -1.0);
        p.disc_b1 = DenseMatrix::zeros(1, 16);
        p.disc_w2 = DenseMatrix::zeros(16, 4);
        p.disc_w2.set(0, 0, 0.5);
        p.disc_w2.set(1, 0, 0.5);
        p.disc_b2 = DenseMatrix::zeros(1, 4);
        p.disc_w3 = DenseMatrix::zeros(4, 1);
        p.disc_w3.set(0, 0, 2.0);
        p.disc_b3 = DenseMatrix::from_rows(&[vec![-0.25]]).unwrap();

        let z = DenseMatrix::from_rows(&[vec![0.8, -0.3]]).unwrap();
        // h1 = [relu(0.8), relu(0.3), 0, ...] = [0.8, 0.3, ...]
        // h2[0] = 0.5*0.8 + 0.5*0.3 = 0.55; out = 2*0.55 - 0.25 = 0.85
        let expect = 1.0 / (1.0 + (-0.85_f64).exp());
        let s = discriminate(&z, &p).unwrap();
        assert!((s.get(0, 0) - expect).abs() < 1e-12);
    }
}
