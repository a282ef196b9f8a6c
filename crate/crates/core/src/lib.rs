//! SCADA condition-monitoring toolkit for wind turbines: data preparation,
//! autoencoder normal-behavior models, a content-preserving domain-mapping
//! network between turbine domains, and a threshold-similarity evaluation
//! harness, validated end to end on a built-in synthetic SCADA simulator.
//!
//! The numeric core is generic over the scalar type ([`scalar::Scalar`],
//! implemented for `f32` and `f64`); production training uses [`Real`].

// validation code writes `!(x > 0.0)` on purpose: it must reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod eval;
pub mod mapper;
pub mod nbm;
pub mod nn;
pub mod sim;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod tensor;

pub use scalar::Scalar;
pub use tensor::Tensor;

/// Default scalar type for production training and inference.
pub type Real = f32;
/// Tensor aliases for the two supported precisions.
pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
