//! Scalar abstraction for the numeric pipeline.
//!
//! Every math module is generic over [`Real`] so the same code runs at
//! 32-bit and 64-bit precision. The crate root exports concrete aliases
//! for the shipped `f64` pipeline; `f32` stays available for
//! memory-constrained experiments.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the math modules are generic over.
pub trait Real:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant or RNG draw into the generic scalar.
///
/// All randomness in this crate is drawn at `f64` precision and converted,
/// so an `f32` instantiation replays the exact same sample sequence.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("every finite f64 converts to a Real scalar")
}
