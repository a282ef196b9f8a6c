//! Scalar abstraction so the numeric core runs in `f32` (production training)
//! or `f64` (oracle and gradient-check tests) without code changes.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable throughout the numeric core.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Name recorded in checkpoints ("f32" | "f64").
    const KIND: &'static str;

    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to scalar")
    }

    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {
    const KIND: &'static str = "f32";
}

impl Scalar for f64 {
    const KIND: &'static str = "f64";
}

/// Shorthand for converting an `f64` constant into the working scalar type.
#[inline]
pub fn sc<S: Scalar>(v: f64) -> S {
    S::from_f64_c(v)
}
