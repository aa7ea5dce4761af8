//! Scalar abstraction for the polyhedral geometry and LP kernels.
//!
//! Polyhedral combinatorics runs either in `f64` with a fixed comparison
//! slack or in exact rational arithmetic. Both instantiate [`Scalar`]; the
//! rest of the crate (smooth maps, cones with square roots, the sampling
//! oracle) is binary64 only.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact rational scalar used for certification LPs.
pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + std::fmt::Debug
{
    /// Comparison slack for active-set and membership tests.
    /// Zero for exact types.
    fn active_tol() -> Self;

    /// Exact lift of a binary64 value into the scalar type.
    fn lift(x: f64) -> Self;

    fn approx(&self) -> f64;

    /// `|self| <= active_tol()`.
    fn is_negligible(&self) -> bool;

    /// `self <= rhs + active_tol()`.
    fn leq_tol(&self, rhs: &Self) -> bool;
}

impl Scalar for f64 {
    fn active_tol() -> Self {
        1e-9
    }

    fn lift(x: f64) -> Self {
        x
    }

    fn approx(&self) -> f64 {
        *self
    }

    fn is_negligible(&self) -> bool {
        self.abs() <= 1e-9
    }

    fn leq_tol(&self, rhs: &Self) -> bool {
        *self <= rhs + 1e-9
    }
}

impl Scalar for Rational {
    fn active_tol() -> Self {
        Rational::zero()
    }

    fn lift(x: f64) -> Self {
        // Every finite f64 is a dyadic rational; the lift is lossless.
        Rational::from_float(x).expect("cannot lift non-finite float to a rational")
    }

    fn approx(&self) -> f64 {
        rational_to_f64(self)
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn leq_tol(&self, rhs: &Self) -> bool {
        self <= rhs
    }
}

/// Rounds a big rational to the nearest `f64` (good enough for reports).
pub fn rational_to_f64(q: &Rational) -> f64 {
    let mut numer = q.numer().clone();
    let mut denom = q.denom().clone();
    // Scale down so both parts fit in f64 without overflowing.
    let bits = numer.bits().max(denom.bits());
    if bits > 900 {
        let shift = bits - 900;
        numer >>= shift;
        denom >>= shift;
    }
    bigint_to_f64(&numer) / bigint_to_f64(&denom)
}

fn bigint_to_f64(n: &BigInt) -> f64 {
    let (sign, digits) = n.to_u64_digits();
    let mut value = 0.0f64;
    for d in digits.iter().rev() {
        value = value * 1.8446744073709552e19 + *d as f64;
    }
    if sign == num_bigint::Sign::Minus {
        -value
    } else {
        value
    }
}

/// Lifts a float slice into exact rationals.
pub fn lift_vec(xs: &[f64]) -> Vec<Rational> {
    xs.iter().map(|&x| Rational::lift(x)).collect()
}

/// Lifts a row-major float matrix into exact rationals.
pub fn lift_mat(rows: &[Vec<f64>]) -> Vec<Vec<Rational>> {
    rows.iter().map(|r| lift_vec(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_is_exact() {
        let q = Rational::lift(0.1);
        // 0.1 as an f64 is 3602879701896397 / 2^55.
        assert_eq!(
            q,
            Rational::new(BigInt::from(3602879701896397u64), BigInt::from(1u64) << 55)
        );
        assert!((q.approx() - 0.1).abs() < 1e-17);
    }

    #[test]
    fn tolerance_semantics_differ() {
        assert!(5e-10f64.is_negligible());
        assert!(!Rational::lift(5e-10).is_negligible());
    }
}
