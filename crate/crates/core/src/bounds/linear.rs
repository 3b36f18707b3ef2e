//! Bound terms that are affine in cell probabilities.
//!
//! Each term is a constant plus integer multiples of cells, written as
//! `(coefficient, z, x, y)`. For the random-sampling instrument bounds the
//! cells are `P(X=x, Y=y | Z=z)`; for the confounded designs they are
//! `P(X=x, Y=y, S=1 | Z=z)`. Designs without an instrument use `z = 0` only.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct LinearTerm {
    pub constant: i8,
    pub cells: &'static [(i8, u8, u8, u8)],
}

impl LinearTerm {
    pub fn eval<T: Scalar>(&self, p: &[[[T; 2]; 2]]) -> T {
        let mut acc = T::from_i64(self.constant as i64);
        for &(c, z, x, y) in self.cells {
            let v = p[z as usize][x as usize][y as usize].clone();
            acc = acc + T::from_i64(c as i64) * v;
        }
        acc
    }
}

const fn t(constant: i8, cells: &'static [(i8, u8, u8, u8)]) -> LinearTerm {
    LinearTerm { constant, cells }
}

pub const ROBINS_LOWER: [LinearTerm; 1] = [t(0, &[(-1, 0, 0, 1), (-1, 0, 1, 0)])];
pub const ROBINS_UPPER: [LinearTerm; 1] = [t(1, &[(-1, 0, 0, 1), (-1, 0, 1, 0)])];

pub const BALKE_PEARL_LOWER: [LinearTerm; 8] = [
    t(-1, &[(1, 1, 1, 1), (1, 0, 0, 0)]),
    t(-1, &[(1, 0, 1, 1), (1, 1, 0, 0)]),
    t(0, &[(1, 0, 1, 1), (-1, 1, 1, 1), (-1, 1, 0, 1), (-1, 0, 1, 0), (-1, 0, 0, 1)]),
    t(0, &[(1, 1, 1, 1), (-1, 0, 1, 1), (-1, 0, 0, 1), (-1, 1, 1, 0), (-1, 1, 0, 1)]),
    t(0, &[(-1, 1, 1, 0), (-1, 1, 0, 1)]),
    t(0, &[(-1, 0, 1, 0), (-1, 0, 0, 1)]),
    t(0, &[(1, 1, 0, 0), (-1, 1, 1, 0), (-1, 1, 0, 1), (-1, 0, 1, 0), (-1, 0, 0, 0)]),
    t(0, &[(1, 0, 0, 0), (-1, 0, 1, 0), (-1, 0, 0, 1), (-1, 1, 1, 0), (-1, 1, 0, 0)]),
];

pub const BALKE_PEARL_UPPER: [LinearTerm; 8] = [
    t(1, &[(-1, 1, 1, 0), (-1, 0, 0, 1)]),
    t(1, &[(-1, 0, 1, 0), (-1, 1, 0, 1)]),
    t(0, &[(-1, 0, 1, 0), (1, 1, 1, 0), (1, 1, 0, 0), (1, 0, 1, 1), (1, 0, 0, 0)]),
    t(0, &[(-1, 1, 1, 0), (1, 1, 1, 1), (1, 1, 0, 0), (1, 0, 1, 0), (1, 0, 0, 0)]),
    t(0, &[(1, 1, 1, 1), (1, 1, 0, 0)]),
    t(0, &[(1, 0, 1, 1), (1, 0, 0, 0)]),
    t(0, &[(-1, 1, 0, 1), (1, 1, 1, 1), (1, 1, 0, 0), (1, 0, 1, 1), (1, 0, 0, 1)]),
    t(0, &[(-1, 0, 0, 1), (1, 0, 1, 1), (1, 0, 0, 0), (1, 1, 1, 1), (1, 1, 0, 1)]),
];

pub const CONFOUNDED_LOWER: [LinearTerm; 1] = [t(-1, &[(1, 0, 1, 1), (1, 0, 0, 0)])];
pub const CONFOUNDED_UPPER: [LinearTerm; 1] = [t(1, &[(-1, 0, 0, 1), (-1, 0, 1, 0)])];

pub const CONFOUNDED_IV_LOWER: [LinearTerm; 10] = [
    t(-1, &[(1, 1, 0, 0), (-1, 0, 0, 1), (-1, 0, 1, 1), (2, 1, 1, 1)]),
    t(-1, &[(1, 1, 0, 0), (1, 0, 1, 1)]),
    t(-1, &[(1, 0, 0, 0), (1, 1, 1, 1)]),
    t(-1, &[(1, 1, 0, 0), (1, 1, 1, 1)]),
    t(-1, &[(1, 0, 0, 0), (-1, 1, 0, 1), (2, 0, 1, 1), (-1, 1, 1, 1)]),
    t(-1, &[(-1, 0, 0, 0), (2, 1, 0, 0), (-1, 0, 1, 0), (1, 1, 1, 1)]),
    t(-1, &[(1, 0, 0, 0), (1, 0, 1, 1)]),
    t(-1, &[(2, 0, 0, 0), (-1, 1, 0, 0), (-1, 1, 1, 0), (1, 0, 1, 1)]),
    t(-1, &[(2, 0, 0, 0), (-1, 1, 0, 0), (-1, 1, 1, 0), (-1, 1, 0, 1), (2, 0, 1, 1), (-1, 1, 1, 1)]),
    t(-1, &[(-1, 0, 0, 0), (2, 1, 0, 0), (-1, 0, 1, 0), (-1, 0, 0, 1), (-1, 0, 1, 1), (2, 1, 1, 1)]),
];

pub const CONFOUNDED_IV_UPPER: [LinearTerm; 10] = [
    t(1, &[(-1, 0, 1, 0), (-2, 0, 0, 1), (1, 1, 0, 1), (1, 1, 1, 1)]),
    t(1, &[(-1, 1, 1, 0), (1, 0, 0, 1), (-2, 1, 0, 1), (1, 0, 1, 1)]),
    t(1, &[(1, 1, 0, 0), (-2, 0, 1, 0), (1, 1, 1, 0), (-1, 0, 0, 1)]),
    t(1, &[(-1, 0, 1, 0), (-1, 1, 0, 1)]),
    t(1, &[(-1, 1, 1, 0), (-1, 0, 0, 1)]),
    t(1, &[(-1, 0, 1, 0), (-1, 0, 0, 1)]),
    t(1, &[(1, 1, 0, 0), (-2, 0, 1, 0), (1, 1, 1, 0), (-2, 0, 0, 1), (1, 1, 0, 1), (1, 1, 1, 1)]),
    t(1, &[(-1, 1, 1, 0), (-1, 1, 0, 1)]),
    t(1, &[(1, 0, 0, 0), (1, 0, 1, 0), (-2, 1, 1, 0), (-1, 1, 0, 1)]),
    t(1, &[(1, 0, 0, 0), (1, 0, 1, 0), (-2, 1, 1, 0), (1, 0, 0, 1), (-2, 1, 0, 1), (1, 0, 1, 1)]),
];

pub const EXPOSURE_IV_LOWER: [LinearTerm; 8] = [
    t(-1, &[(1, 1, 0, 0), (1, 1, 1, 1)]),
    t(-1, &[(1, 0, 0, 0), (1, 1, 1, 1)]),
    t(-1, &[(1, 1, 0, 0), (1, 0, 1, 1)]),
    t(-1, &[(1, 0, 0, 0), (1, 0, 1, 1)]),
    t(-2, &[(2, 1, 0, 0), (1, 0, 0, 1), (1, 0, 1, 1), (1, 1, 1, 1)]),
    t(-2, &[(2, 0, 0, 0), (1, 1, 0, 1), (1, 0, 1, 1), (1, 1, 1, 1)]),
    t(-2, &[(1, 0, 0, 0), (1, 1, 0, 0), (1, 0, 1, 0), (2, 1, 1, 1)]),
    t(-2, &[(1, 0, 0, 0), (1, 1, 0, 0), (1, 1, 1, 0), (2, 0, 1, 1)]),
];

pub const EXPOSURE_IV_UPPER: [LinearTerm; 8] = [
    t(1, &[(-1, 0, 1, 0), (-1, 0, 0, 1)]),
    t(1, &[(-1, 1, 1, 0), (-1, 0, 0, 1)]),
    t(1, &[(-1, 0, 1, 0), (-1, 1, 0, 1)]),
    t(1, &[(-1, 1, 1, 0), (-1, 1, 0, 1)]),
    t(2, &[(-1, 0, 0, 0), (-1, 0, 1, 0), (-1, 1, 1, 0), (-2, 1, 0, 1)]),
    t(2, &[(-1, 1, 0, 0), (-1, 0, 1, 0), (-1, 1, 1, 0), (-2, 0, 0, 1)]),
    t(2, &[(-2, 0, 1, 0), (-1, 0, 0, 1), (-1, 1, 0, 1), (-1, 1, 1, 1)]),
    t(2, &[(-2, 1, 1, 0), (-1, 0, 0, 1), (-1, 1, 0, 1), (-1, 0, 1, 1)]),
];
