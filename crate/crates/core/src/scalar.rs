//! Floating-point abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Real scalar used throughout the math: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance on `sum(probs) == 1`.
    fn prob_sum_tolerance() -> Self;

    /// Converts a literal. Every `f64` is representable (possibly rounded) in both impls.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal fits in scalar")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("count fits in scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn prob_sum_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn prob_sum_tolerance() -> Self {
        1e-9
    }
}

/// Positive part `max(x, 0)`.
#[inline]
pub fn positive_part<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        F::zero()
    }
}
