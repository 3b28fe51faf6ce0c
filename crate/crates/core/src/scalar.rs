//! Scalar abstractions.
//!
//! Curve arithmetic is generic over [`Scalar`] (`f32` / `f64`). Rank and
//! coverage arithmetic (quantile indices, theoretical coverage) only needs
//! floor/ceil on the significance level, so it is generic over the weaker
//! [`LevelScalar`], which is also implemented for exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Numeric type usable for significance levels and rank arithmetic.
pub trait LevelScalar: Clone + PartialOrd + Num + Debug {
    /// `⌈x⌉`, robust to floating-point representation error: a value within
    /// a relative `1e-12` above an integer is treated as that integer.
    fn ceil_int(&self) -> i64;

    /// `⌊x⌋`, robust to floating-point representation error: a value within
    /// a relative `1e-12` below an integer is treated as that integer.
    fn floor_int(&self) -> i64;

    fn from_count(n: usize) -> Self;

    fn to_f64_lossy(&self) -> f64;
}

fn float_tolerance<T: Float>(x: T) -> T {
    let floor = T::from(1e-12).unwrap_or_else(T::epsilon);
    let tol = (T::epsilon() * (T::one() + T::one()) * (T::one() + T::one())).max(floor);
    tol * x.abs().max(T::one())
}

macro_rules! float_level {
    ($t:ty) => {
        impl LevelScalar for $t {
            fn ceil_int(&self) -> i64 {
                (*self - float_tolerance(*self)).ceil() as i64
            }
            fn floor_int(&self) -> i64 {
                (*self + float_tolerance(*self)).floor() as i64
            }
            fn from_count(n: usize) -> Self {
                n as $t
            }
            fn to_f64_lossy(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_level!(f32);
float_level!(f64);

impl LevelScalar for Ratio<i64> {
    fn ceil_int(&self) -> i64 {
        *self.ceil().numer()
    }
    fn floor_int(&self) -> i64 {
        *self.floor().numer()
    }
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(n as i64)
    }
    fn to_f64_lossy(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Floating-point type that curves, bands and simulations are computed in.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + LevelScalar
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_ignores_representation_noise() {
        // 100 * (1 - 0.1) is 90.00000000000001 in binary floating point.
        let x = 100.0_f64 * (1.0 - 0.1);
        assert_eq!(x.ceil_int(), 90);
        assert_eq!(90.5_f64.ceil_int(), 91);
        assert_eq!(2.75_f64.ceil_int(), 3);
        assert_eq!((11.0_f32 * 0.75).ceil_int(), 9);
    }

    #[test]
    fn floor_ignores_representation_noise() {
        // 0.29 * 100 is 28.999999999999996.
        assert_eq!((0.29_f64 * 100.0).floor_int(), 29);
        assert_eq!(2.75_f64.floor_int(), 2);
        assert_eq!((-0.5_f64).floor_int(), -1);
    }

    #[test]
    fn rational_rounding_is_exact() {
        let x = Ratio::new(11_i64, 4);
        assert_eq!(x.ceil_int(), 3);
        assert_eq!(x.floor_int(), 2);
        assert_eq!(Ratio::new(90_i64, 1).ceil_int(), 90);
        assert_eq!(Ratio::new(-1_i64, 2).floor_int(), -1);
    }
}
