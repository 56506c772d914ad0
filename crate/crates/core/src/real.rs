//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the library is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Tolerance used when validating that probability vectors sum to one.
    const SUM_TOL: f64;

    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const SUM_TOL: f64 = 1e-5;
}

impl Real for f64 {
    const SUM_TOL: f64 = 1e-9;
}

/// `x log2 x` with the convention `0 log 0 = 0`.
#[inline]
pub(crate) fn xlog2x<T: Real>(x: T) -> T {
    if x > T::zero() {
        x * x.log2()
    } else {
        T::zero()
    }
}

/// Numerically stable `log2 Σ 2^{v_i}`; `-inf` entries contribute nothing.
pub(crate) fn log2_sum_exp2<T: Real>(values: impl IntoIterator<Item = T> + Clone) -> T {
    let max = values
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    if max == T::neg_infinity() {
        return T::neg_infinity();
    }
    if max == T::infinity() {
        return T::infinity();
    }
    let sum: T = values.into_iter().map(|v| (v - max).exp2()).sum();
    max + sum.log2()
}
