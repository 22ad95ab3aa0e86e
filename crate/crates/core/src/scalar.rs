//! Scalar abstractions shared by the numerical parts of the crate.
//!
//! Amplitudes, Gaussian profiles and outcome oracles are written against
//! [`Real`], so they run at `f32` or `f64`. Lattice reduction is written
//! against [`LllField`], implemented for exact rationals and for `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Signed, ToPrimitive};

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field used for Gram-Schmidt data inside LLL.
pub trait LllField:
    Clone
    + PartialOrd
    + Signed
    + Debug
    + for<'a> std::ops::Add<&'a Self, Output = Self>
    + for<'a> std::ops::Sub<&'a Self, Output = Self>
    + for<'a> std::ops::Mul<&'a Self, Output = Self>
    + for<'a> std::ops::Div<&'a Self, Output = Self>
{
    fn from_int(x: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Nearest integer, ties away from zero.
    fn round_to_int(&self) -> Option<i64>;
    /// Whether the value is an exact field element (as opposed to floating point).
    fn is_exact() -> bool;
}

impl LllField for BigRational {
    fn from_int(x: i64) -> Self {
        BigRational::from_integer(BigInt::from(x))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn round_to_int(&self) -> Option<i64> {
        self.round().to_integer().to_i64()
    }

    fn is_exact() -> bool {
        true
    }
}

impl LllField for f64 {
    fn from_int(x: i64) -> Self {
        x as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn round_to_int(&self) -> Option<i64> {
        let r = self.round();
        (r.is_finite() && r.abs() < 9.0e18).then_some(r as i64)
    }

    fn is_exact() -> bool {
        false
    }
}

pub(crate) fn half<F: LllField>() -> F {
    F::from_ratio(1, 2)
}

pub(crate) fn is_zero<F: LllField>(x: &F) -> bool {
    x.is_zero()
}

pub(crate) fn one<F: LllField>() -> F {
    F::one()
}
