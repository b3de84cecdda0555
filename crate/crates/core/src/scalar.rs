//! Scalar abstraction for the numeric kernels.
//!
//! All core math (k-means, product quantization, MaxSim scoring) is generic
//! over [`Scalar`], which is implemented for `f32` and `f64`. The on-disk
//! formats always store 32-bit floats; the crate-root aliases pin `f32` as
//! the concrete scalar for the artifact surface.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable in the retrieval kernels.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + AddAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from an on-disk `f32` value.
    fn from_f32_exact(v: f32) -> Self {
        Self::from_f32(v).expect("f32 is representable in every Scalar")
    }

    /// Conversion to `f64` for wide accumulation.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar is representable in f64")
    }

    /// Conversion from an `f64` accumulator back to the scalar type.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product accumulated in the scalar type itself, in index order.
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

/// Dot product accumulated in 64-bit, in index order.
pub fn dot_wide<F: Scalar>(a: &[F], b: &[F]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += x.as_f64() * y.as_f64();
    }
    acc
}

/// Squared Euclidean distance accumulated in 64-bit, in index order.
pub fn l2_sq_wide<F: Scalar>(a: &[F], b: &[F]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = x.as_f64() - y.as_f64();
        acc += d * d;
    }
    acc
}
