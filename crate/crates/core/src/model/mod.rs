//! The four networks: MLP encoder (mid representation), GCN encoder (user
//! representation via reparameterization), shared decoder, discriminator.
//!
//! Forward passes are pure functions of `(params, inputs, eps)`; parameters
//! are mutated only by the training loop between steps.

mod backward;
mod checkpoint;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{
    decode, discriminate, encode_gnn, encode_mlp, reconstruct, LatentPair, Reconstruction,
};
pub use params::{
    Dims, ModelParams, ParamGrads, ADV_GROUP, DISC_GROUP, DISC_HIDDEN1, DISC_HIDDEN2, MODEL_GROUP,
};

pub(crate) use backward::{
    dec_backward, disc_backward, encoder_backward, softmax_blocks_backward, DecGrads, DiscGrads,
    EncoderGrads,
};
pub(crate) use forward::{dec_forward, disc_forward, encoder_forward, EncoderForward};
