//! Semi-supervised attribute inference on attributed social graphs.
//!
//! The model couples two encoders over one decoder: an MLP embeds each user's
//! observed attributes into a mid latent representation, a two-layer GCN
//! aggregates those embeddings over the social graph into a Gaussian user
//! representation, and a shared decoder reconstructs per-attribute label
//! distributions from either latent. Training interleaves three updates per
//! iteration: the variational objective with an InfoNCE mutual-information
//! constraint on the decoder, a discriminator that tells fully-labeled mid
//! representations from user representations, and an adversarial update that
//! pushes the GCN to fool that discriminator.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: deterministic dense/sparse kernels, Adam, RNG, and
//!   finite-difference gradient verification.
//! - [`graph`]: attributed-network data model, file ingestion, one-hot
//!   features, adjacency normalization, label splits, and a synthetic
//!   homophily benchmark generator.
//! - [`model`]: the four networks (MLP encoder, GCN encoder, decoder,
//!   discriminator), parameter initialization, and checkpoints.
//! - [`losses`]: reconstruction/ELBO, adversarial objectives, InfoNCE, the
//!   mutual-information constraint, and the weighted total.
//! - [`training`]: the interleaved optimization loop with ablation modes.
//! - [`eval`]: metrics, sweep/ablation drivers, and report emission.

pub mod error;
pub mod eval;
pub mod graph;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
