//! Numeric abstraction for formulas evaluated both in `f64` and exactly.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

/// Absolute tolerance under which two `f64` term values count as tied.
pub const TIE_TOL: f64 = 1e-12;

pub trait Scalar: Clone + PartialOrd + Num + Neg<Output = Self> + Debug {
    fn from_i64(v: i64) -> Self;
    /// Equality for tie detection among max/min terms.
    fn ties(&self, other: &Self) -> bool;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn ties(&self, other: &Self) -> bool {
        (self - other).abs() <= TIE_TOL
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn ties(&self, other: &Self) -> bool {
        self == other
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exact rational value of a finite `f64`.
pub fn rational_from_f64(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}
