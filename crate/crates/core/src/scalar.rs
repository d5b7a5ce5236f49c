//! Floating-point abstraction shared by the model backend, the scoring
//! math and the statistics routines.

use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type the engine computes in: `f32` or `f64`.
pub trait Scalar:
    NdFloat + Float + FromPrimitive + ToPrimitive + Sum + Serialize + DeserializeOwned + Default
{
    /// Gauss error function.
    fn erf(self) -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits the scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits the scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
}

/// Clamps `x` into `[lo, hi]`; NaN maps to `lo`.
#[inline]
pub fn clamp<F: Scalar>(x: F, lo: F, hi: F) -> F {
    if x.is_nan() || x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

/// Fixed-order arithmetic mean. `None` for an empty slice.
pub fn mean<F: Scalar>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let mut acc = F::zero();
    for &v in values {
        acc += v;
    }
    Some(acc / F::from_count(values.len()))
}
