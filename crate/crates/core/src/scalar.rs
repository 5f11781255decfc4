//! Scalar abstraction shared by the graph, routing and engine layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Real number type used for lengths, speeds, times and costs.
///
/// Implemented for `f32` and `f64`. Everything numeric in the crate is
/// generic over this trait; the crate root exports `f64` aliases for the
/// common case.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and configuration.
    fn of(v: f64) -> Self;

    /// Lossy conversion to `f64`, used for statistics and reporting.
    fn as_f64(self) -> f64;

    /// Conversion from a count.
    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
