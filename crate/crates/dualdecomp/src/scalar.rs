//! Scalar abstraction over the floating point type used by the toolkit.
//!
//! All core math is generic over [`Scalar`]; `f64` is the working precision
//! used by the type aliases at the crate root, `f32` is supported for
//! callers that can live with looser tolerances.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable throughout the toolkit.
///
/// Builds on the conic backend's float trait (which already bundles
/// `num_traits::Float`, assignment ops, `Send + Sync + 'static`) and adds
/// serde plus the sampling hooks the generators and oracles need.
pub trait Scalar:
    clarabel::algebra::FloatT + Serialize + DeserializeOwned + Default + std::fmt::Display
{
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from U[lo, hi] (closed; `lo == hi` allowed).
    fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn of_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
            #[inline]
            fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
                Uniform::new_inclusive(lo, hi)
                    .expect("uniform bounds must satisfy lo <= hi")
                    .sample(rng)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Shorthand for `Scalar::of_f64` in generic code.
#[inline]
pub fn s<T: Scalar>(v: f64) -> T {
    T::of_f64(v)
}
