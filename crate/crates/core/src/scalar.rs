//! Scalar bounds shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Ordered field: enough structure for the envelope LP, which also runs on
/// exact rationals.
pub trait Field: Clone + PartialOrd + Num + Neg<Output = Self> + Debug {}

impl<T> Field for T where T: Clone + PartialOrd + Num + Neg<Output = T> + Debug {}

/// Floating-point scalar used by the log-space machinery (`f32` or `f64`).
pub trait Real:
    Field
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
}

impl<T> Real for T where
    T: Field
        + Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Default
        + Display
        + Sum
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts an integer time index into `T`.
#[inline]
pub fn idx<T: Real>(n: i64) -> T {
    T::from_i64(n).expect("index representable in scalar type")
}

/// Converts `T` back to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
