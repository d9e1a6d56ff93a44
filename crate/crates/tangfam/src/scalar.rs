//! Coefficient arithmetic shared by the exact (rational) and floating
//! numeric modes.
//!
//! Everything downstream of the parser (jets, flattening, classifiers) is
//! generic over [`Coeff`] so the same pipeline runs both in exact rational
//! arithmetic on polynomial germs and in `f64` on black-box evaluators.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::Serialize;
use std::fmt;

/// Ring/field operations needed by truncated-series arithmetic.
///
/// `zero_like`/`one_like` are prototype-based so that nested series (which
/// must know their truncation cap) can mint constants of the right shape.
pub trait Coeff: Clone + PartialEq + fmt::Debug + Send + Sync {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse; `None` when the element is not a unit.
    fn recip(&self) -> Option<Self>;
    /// Integer constant in the same shape as `self`.
    fn from_i64_like(&self, n: i64) -> Self;
    /// Best-effort float view, used for reporting and thresholded tests.
    fn to_f64(&self) -> f64;
    /// Taylor coefficients of an elementary function about `center`, up to
    /// `order` inclusive. `None` when the coefficient type cannot represent
    /// them (exact rationals).
    fn elementary_series(kind: Elementary, center: &Self, order: usize) -> Option<Vec<Self>>;
}

/// Elementary functions admitted by the expression grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementary {
    Sin,
    Cos,
    Sqrt,
}

impl Coeff for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn recip(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / self)
        }
    }
    fn from_i64_like(&self, n: i64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }

    fn elementary_series(kind: Elementary, center: &Self, order: usize) -> Option<Vec<Self>> {
        let c = *center;
        let mut out = Vec::with_capacity(order + 1);
        match kind {
            Elementary::Sin | Elementary::Cos => {
                // d^k/dx^k cycles through (sin, cos, -sin, -cos).
                let (s, co) = c.sin_cos();
                let cycle = if kind == Elementary::Sin {
                    [s, co, -s, -co]
                } else {
                    [co, -s, -co, s]
                };
                let mut fact = 1.0;
                for k in 0..=order {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    out.push(cycle[k % 4] / fact);
                }
            }
            Elementary::Sqrt => {
                if c <= 0.0 {
                    return None;
                }
                let root = c.sqrt();
                // Binomial series: coeff_{k+1} = coeff_k * (1/2 - k) / ((k+1) c).
                let mut coeff = root;
                for k in 0..=order {
                    out.push(coeff);
                    coeff *= (0.5 - k as f64) / ((k as f64 + 1.0) * c);
                }
                out.truncate(order + 1);
            }
        }
        Some(out)
    }
}

impl Coeff for BigRational {
    fn zero_like(&self) -> Self {
        BigRational::zero()
    }
    fn one_like(&self) -> Self {
        BigRational::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn recip(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(BigRational::one() / self)
        }
    }
    fn from_i64_like(&self, n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn elementary_series(_kind: Elementary, _center: &Self, _order: usize) -> Option<Vec<Self>> {
        None
    }
}

/// Exact conversion of an `f64` into a rational (fails on non-finite input).
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Rational to float, via a quotient of the reduced parts.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    // Shift numerator/denominator together so both fit in f64 range.
    let num = r.numer();
    let den = r.denom();
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    let shift = (nb.max(db) - 900).max(0) as u64;
    let n = (num >> shift).to_string().parse::<f64>().unwrap_or(f64::NAN);
    let d = (den >> shift).to_string().parse::<f64>().unwrap_or(f64::NAN);
    if d == 0.0 {
        // Denominator underflowed the shift; fall back to sign * inf scale.
        if num.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        n / d
    }
}

/// Numeric value in either exact or floating form, for reporting.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Rational(BigRational),
    Float(f64),
}

impl Scalar {
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Rational(r) => rational_to_f64(r),
            Scalar::Float(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Rational(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rational(r) => Zero::is_zero(r),
            Scalar::Float(x) => *x == 0.0,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rational(r) => write!(f, "{}", r),
            Scalar::Float(x) => write!(f, "{}", x),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

/// Numeric mode a computation ran in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumericMode {
    /// Exact rational arithmetic on polynomial data.
    Exact,
    /// Floating point on expression trees (series-composed jets).
    Float,
    /// Floating point on black-box evaluators (finite-difference jets).
    BlackBox,
}

impl NumericMode {
    /// Default relative zero-threshold for classification predicates.
    pub fn default_epsilon(self) -> f64 {
        match self {
            NumericMode::Exact => 0.0,
            NumericMode::Float => 1e-6,
            NumericMode::BlackBox => 1e-4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_roundtrip() {
        let r = rational_from_f64(0.1).unwrap();
        assert_eq!(rational_to_f64(&r), 0.1);
        let r = rational_from_f64(-3.75).unwrap();
        assert_eq!(r, BigRational::new(BigInt::from(-15), BigInt::from(4)));
    }

    #[test]
    fn sqrt_series_matches_binomial() {
        let s = <f64 as Coeff>::elementary_series(Elementary::Sqrt, &4.0, 3).unwrap();
        // sqrt(4 + u) = 2 + u/4 - u^2/64 + u^3/512
        assert!((s[0] - 2.0).abs() < 1e-15);
        assert!((s[1] - 0.25).abs() < 1e-15);
        assert!((s[2] + 1.0 / 64.0).abs() < 1e-15);
        assert!((s[3] - 1.0 / 512.0).abs() < 1e-15);
    }

    #[test]
    fn sin_series() {
        let s = <f64 as Coeff>::elementary_series(Elementary::Sin, &0.0, 5).unwrap();
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 1.0);
        assert_eq!(s[2], 0.0);
        assert!((s[3] + 1.0 / 6.0).abs() < 1e-15);
        assert!((s[5] - 1.0 / 120.0).abs() < 1e-15);
    }
}
