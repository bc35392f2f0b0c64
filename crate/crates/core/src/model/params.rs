//! Trainable parameters for the four networks, their initialization, and
//! the parameter-group bookkeeping used by the interleaved optimizer.

use crate::graph::{fnv1a_bytes, fnv1a_init};
use crate::numerics::{DenseMatrix, Rng};

/// Discriminator hidden widths (input -> 16 -> 4 -> 1).
pub const DISC_HIDDEN1: usize = 16;
pub const DISC_HIDDEN2: usize = 4;

/// Layer widths. `latent` is the dimension of both latent representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub latent: usize,
    pub mlp_hidden: usize,
    pub gcn_hidden: usize,
    pub decoder_hidden: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            latent: 64,
            mlp_hidden: 64,
            gcn_hidden: 64,
            decoder_hidden: 128,
        }
    }
}

/// All trainable weights.
///
/// The MLP encoder, decoder and discriminator are dense layers with biases;
/// the two GCN weights deliberately have none. `head_w`/`head_b` is the
/// dense reparameterization head that replaces the GCN stage in the
/// graph-free baseline; it is initialized unconditionally so that parameter
/// fingerprints are comparable across modes, and simply receives zero
/// gradients whenever the GCN path is active.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    pub n_features: usize,

    pub mlp_w1: DenseMatrix,
    pub mlp_b1: DenseMatrix,
    pub mlp_w2: DenseMatrix,
    pub mlp_b2: DenseMatrix,

    pub gcn_w0: DenseMatrix,
    pub gcn_w1: DenseMatrix,

    pub head_w: DenseMatrix,
    pub head_b: DenseMatrix,

    pub dec_w1: DenseMatrix,
    pub dec_b1: DenseMatrix,
    pub dec_w2: DenseMatrix,
    pub dec_b2: DenseMatrix,

    pub disc_w1: DenseMatrix,
    pub disc_b1: DenseMatrix,
    pub disc_w2: DenseMatrix,
    pub disc_b2: DenseMatrix,
    pub disc_w3: DenseMatrix,
    pub disc_b3: DenseMatrix,
}

/// Encoder + head + decoder parameters, updated by the variational step.
pub const MODEL_GROUP: &[&str] = &[
    "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2", "gcn_w0", "gcn_w1", "head_w", "head_b", "dec_w1",
    "dec_b1", "dec_w2", "dec_b2",
];

/// Discriminator parameters, updated by the discriminator step.
pub const DISC_GROUP: &[&str] = &[
    "disc_w1", "disc_b1", "disc_w2", "disc_b2", "disc_w3", "disc_b3",
];

/// GCN weights only, updated by the adversarial generator step.
pub const ADV_GROUP: &[&str] = &["gcn_w0", "gcn_w1"];

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-limit, limit))
        .collect();
    DenseMatrix::new(rows, cols, data).expect("glorot draws are finite")
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases. Draw order is fixed, so a seed
    /// fully determines the initialization.
    pub fn init(dims: Dims, n_features: usize, rng: &mut Rng) -> ModelParams {
        let d = dims.latent;
        ModelParams {
            dims,
            n_features,
            mlp_w1: glorot(n_features, dims.mlp_hidden, rng),
            mlp_b1: DenseMatrix::zeros(1, dims.mlp_hidden),
            mlp_w2: glorot(dims.mlp_hidden, d, rng),
            mlp_b2: DenseMatrix::zeros(1, d),
            gcn_w0: glorot(d, dims.gcn_hidden, rng),
            gcn_w1: glorot(dims.gcn_hidden, 2 * d, rng),
            head_w: glorot(d, 2 * d, rng),
            head_b: DenseMatrix::zeros(1, 2 * d),
            dec_w1: glorot(d, dims.decoder_hidden, rng),
            dec_b1: DenseMatrix::zeros(1, dims.decoder_hidden),
            dec_w2: glorot(dims.decoder_hidden, n_features, rng),
            dec_b2: DenseMatrix::zeros(1, n_features),
            disc_w1: glorot(d, DISC_HIDDEN1, rng),
            disc_b1: DenseMatrix::zeros(1, DISC_HIDDEN1),
            disc_w2: glorot(DISC_HIDDEN1, DISC_HIDDEN2, rng),
            disc_b2: DenseMatrix::zeros(1, DISC_HIDDEN2),
            disc_w3: glorot(DISC_HIDDEN2, 1, rng),
            disc_b3: DenseMatrix::zeros(1, 1),
        }
    }

    /// All tensors in declaration order.
    pub fn tensors(&self) -> Vec<(&'static str, &DenseMatrix)> {
        vec![
            ("mlp_w1", &self.mlp_w1),
            ("mlp_b1", &self.mlp_b1),
            ("mlp_w2", &self.mlp_w2),
            ("mlp_b2", &self.mlp_b2),
            ("gcn_w0", &self.gcn_w0),
            ("gcn_w1", &self.gcn_w1),
            ("head_w", &self.head_w),
            ("head_b", &self.head_b),
            ("dec_w1", &self.dec_w1),
            ("dec_b1", &self.dec_b1),
            ("dec_w2", &self.dec_w2),
            ("dec_b2", &self.dec_b2),
            ("disc_w1", &self.disc_w1),
            ("disc_b1", &self.disc_b1),
            ("disc_w2", &self.disc_w2),
            ("disc_b2", &self.disc_b2),
            ("disc_w3", &self.disc_w3),
            ("disc_b3", &self.disc_b3),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut DenseMatrix)> {
        vec![
            ("mlp_w1", &mut self.mlp_w1),
            ("mlp_b1", &mut self.mlp_b1),
            ("mlp_w2", &mut self.mlp_w2),
            ("mlp_b2", &mut self.mlp_b2),
            ("gcn_w0", &mut self.gcn_w0),
            ("gcn_w1", &mut self.gcn_w1),
            ("head_w", &mut self.head_w),
            ("head_b", &mut self.head_b),
            ("dec_w1", &mut self.dec_w1),
            ("dec_b1", &mut self.dec_b1),
            ("dec_w2", &mut self.dec_w2),
            ("dec_b2", &mut self.dec_b2),
            ("disc_w1", &mut self.disc_w1),
            ("disc_b1", &mut self.disc_b1),
            ("disc_w2", &mut self.disc_w2),
            ("disc_b2", &mut self.disc_b2),
            ("disc_w3", &mut self.disc_w3),
            ("disc_b3", &mut self.disc_b3),
        ]
    }

    /// Tensors of one parameter group, in declaration order.
    pub fn select(&self, group: &[&str]) -> Vec<&DenseMatrix> {
        self.tensors()
            .into_iter()
            .filter(|(name, _)| group.contains(name))
            .map(|(_, t)| t)
            .collect()
    }

    pub fn select_mut(&mut self, group: &[&str]) -> Vec<&mut DenseMatrix> {
        self.tensors_mut()
            .into_iter()
            .filter(|(name, _)| group.contains(name))
            .map(|(_, t)| t)
            .collect()
    }

    pub fn group_shapes(&self, group: &[&str]) -> Vec<(usize, usize)> {
        self.select(group).into_iter().map(|t| t.shape()).collect()
    }

    /// Content hash over every tensor; two parameter sets compare equal iff
    /// they are bitwise identical.
    pub fn fingerprint(&self) -> u64 {
        let mut h = fnv1a_init();
        for (name, t) in self.tensors() {
            h = fnv1a_bytes(h, name.as_bytes());
            for &v in t.data() {
                h = fnv1a_bytes(h, &v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

/// Gradient accumulator mirroring [`ModelParams`], zero-initialized.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub mlp_w1: DenseMatrix,
    pub mlp_b1: DenseMatrix,
    pub mlp_w2: DenseMatrix,
    pub mlp_b2: DenseMatrix,
    pub gcn_w0: DenseMatrix,
    pub gcn_w1: DenseMatrix,
    pub head_w: DenseMatrix,
    pub head_b: DenseMatrix,
    pub dec_w1: DenseMatrix,
    pub dec_b1: DenseMatrix,
    pub dec_w2: DenseMatrix,
    pub dec_b2: DenseMatrix,
    pub disc_w1: DenseMatrix,
    pub disc_b1: DenseMatrix,
    pub disc_w2: DenseMatrix,
    pub disc_b2: DenseMatrix,
    pub disc_w3: DenseMatrix,
    pub disc_b3: DenseMatrix,
}

impl ParamGrads {
    pub fn zeros_like(p: &ModelParams) -> Self {
        let z = |m: &DenseMatrix| DenseMatrix::zeros(m.rows(), m.cols());
        ParamGrads {
            mlp_w1: z(&p.mlp_w1),
            mlp_b1: z(&p.mlp_b1),
            mlp_w2: z(&p.mlp_w2),
            mlp_b2: z(&p.mlp_b2),
            gcn_w0: z(&p.gcn_w0),
            gcn_w1: z(&p.gcn_w1),
            head_w: z(&p.head_w),
            head_b: z(&p.head_b),
            dec_w1: z(&p.dec_w1),
            dec_b1: z(&p.dec_b1),
            dec_w2: z(&p.dec_w2),
            dec_b2: z(&p.dec_b2),
            disc_w1: z(&p.disc_w1),
            disc_b1: z(&p.disc_b1),
            disc_w2: z(&p.disc_w2),
            disc_b2: z(&p.disc_b2),
            disc_w3: z(&p.disc_w3),
            disc_b3: z(&p.disc_b3),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &DenseMatrix)> {
        vec![
            ("mlp_w1", &self.mlp_w1),
            ("mlp_b1", &self.mlp_b1),
            ("mlp_w2", &self.mlp_w2),
            ("mlp_b2", &self.mlp_b2),
            ("gcn_w0", &self.gcn_w0),
            ("gcn_w1", &self.gcn_w1),
            ("head_w", &self.head_w),
            ("head_b", &self.head_b),
            ("dec_w1", &self.dec_w1),
            ("dec_b1", &self.dec_b1),
            ("dec_w2", &self.dec_w2),
            ("dec_b2", &self.dec_b2),
            ("disc_w1", &self.disc_w1),
            ("disc_b1", &self.disc_b1),
            ("disc_w2", &self.disc_w2),
            ("disc_b2", &self.disc_b2),
            ("disc_w3", &self.disc_w3),
            ("disc_b3", &self.disc_b3),
        ]
    }

    pub fn select(&self, group: &[&str]) -> Vec<&DenseMatrix> {
        self.tensors()
            .into_iter()
            .filter(|(name, _)| group.contains(name))
            .map(|(_, t)| t)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seed_deterministic() {
        let dims = Dims::default();
        let a = ModelParams::init(dims, 12, &mut Rng::new(5));
        let b = ModelParams::init(dims, 12, &mut Rng::new(5));
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = ModelParams::init(dims, 12, &mut Rng::new(6));
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn shapes_are_consistent() {
        let dims = Dims {
            latent: 4,
            mlp_hidden: 5,
            gcn_hidden: 6,
            decoder_hidden: 7,
        };
        let p = ModelParams::init(dims, 9, &mut Rng::new(0));
        assert_eq!(p.mlp_w1.shape(), (9, 5));
        assert_eq!(p.mlp_w2.shape(), (5, 4));
        assert_eq!(p.gcn_w0.shape(), (4, 6));
        assert_eq!(p.gcn_w1.shape(), (6, 8));
        assert_eq!(p.head_w.shape(), (4, 8));
        assert_eq!(p.dec_w1.shape(), (4, 7));
        assert_eq!(p.dec_w2.shape(), (7, 9));
        assert_eq!(p.disc_w1.shape(), (4, 16));
        assert_eq!(p.disc_w3.shape(), (4, 1));
    }

    #[test]
    fn groups_partition_cleanly() {
        let p = ModelParams::init(Dims::default(), 8, &mut Rng::new(1));
        assert_eq!(p.select(MODEL_GROUP).len(), 12);
        assert_eq!(p.select(DISC_GROUP).len(), 6);
        assert_eq!(p.select(ADV_GROUP).len(), 2);
        // Model and discriminator groups cover everything and are disjoint.
        assert_eq!(p.tensors().len(), 18);
        assert!(MODEL_GROUP.iter().all(|n| !DISC_GROUP.contains(n)));
        assert!(ADV_GROUP.iter().all(|n| MODEL_GROUP.contains(n)));
    }

    #[test]
    fn biases_start_at_zero() {
        let p = ModelParams::init(Dims::default(), 8, &mut Rng::new(2));
        for b in [&p.mlp_b1, &p.mlp_b2, &p.dec_b1, &p.dec_b2, &p.disc_b3] {
            assert!(b.data().iter().all(|&v| v == 0.0));
        }
    }
}
