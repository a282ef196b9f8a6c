//! Neural-network primitives: layers with explicit backward passes and
//! Adam-family optimizers. Everything is generic over the scalar type.

pub mod layers;
pub mod opt;

pub use layers::{
    maxpool2_backward, maxpool2_forward, mish_backward, mish_forward, upsample2_backward,
    upsample2_forward, Conv1d, ConvGrad, Dense, DenseGrad, GroupNorm, GroupNormGrad,
};
pub use opt::Adam;
