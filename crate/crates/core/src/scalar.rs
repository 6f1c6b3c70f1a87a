//! Arithmetic abstraction: every algorithm in this crate runs either in
//! `f64` (tolerance 1e-9) or in exact `BigRational` (tolerance zero).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Number type the solver pivots in.
///
/// `f64` compares with tolerance [`Scalar::feas_tol`]; `BigRational`
/// compares exactly (both tolerances are zero).
pub trait Scalar:
    Clone
    + PartialOrd
    + PartialEq
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Exact embedding of the binary value of `v`.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;

    /// Feasibility tolerance of the simplex (0 in exact mode).
    fn feas_tol() -> Self;
    /// Positivity threshold for mass to count as support (0 in exact mode).
    fn mass_tol() -> Self;

    fn is_zero(&self) -> bool;
    fn abs(&self) -> Self;

    /// Round-trippable text form (`p/q` in exact mode, shortest-roundtrip
    /// decimal for floats).
    fn to_repr(&self) -> String;
    fn parse_repr(s: &str) -> Option<Self>;

    fn half(&self) -> Self {
        self.clone() * Self::from_ratio(1, 2)
    }

    /// Integer power with small exponent.
    fn powi(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn feas_tol() -> Self {
        1e-9
    }
    fn mass_tol() -> Self {
        1e-9
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_repr(&self) -> String {
        format!("{self}")
    }
    fn parse_repr(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as num_traits::One>::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn feas_tol() -> Self {
        <BigRational as Zero>::zero()
    }
    fn mass_tol() -> Self {
        <BigRational as Zero>::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn to_repr(&self) -> String {
        format!("{self}")
    }
    fn parse_repr(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

/// A weight as it appeared in the input: exact fraction plus a marker for
/// whether it was written in `p/q` form (which opts the run into exact
/// arithmetic when every weight carries it).
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    pub value: BigRational,
    pub exact_input: bool,
}

impl Weight {
    pub fn from_fraction(num: i64, den: i64) -> Self {
        Weight {
            value: BigRational::new(BigInt::from(num), BigInt::from(den)),
            exact_input: true,
        }
    }

    pub fn from_float(v: f64) -> Self {
        Weight {
            value: BigRational::from_float(v).expect("finite weight"),
            exact_input: false,
        }
    }

    /// Parses `"p/q"`, a decimal string, or anything `f64` parses.
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let n: i64 = num
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in {s:?}"))?;
            let d: i64 = den
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in {s:?}"))?;
            if d == 0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(Weight::from_fraction(n, d))
        } else {
            let v: f64 = s.parse().map_err(|_| format!("bad weight {s:?}"))?;
            if !v.is_finite() {
                return Err(format!("non-finite weight {s:?}"));
            }
            Ok(Weight::from_float(v))
        }
    }

    pub fn to_scalar<S: Scalar>(&self) -> S {
        if S::EXACT {
            // Round-trip through the exact fraction.
            let num = self.value.numer();
            let den = self.value.denom();
            // BigInt -> i64 may overflow for pathological inputs; fall back to f64.
            match (num.to_i64(), den.to_i64()) {
                (Some(n), Some(d)) => S::from_ratio(n, d),
                _ => S::from_f64(self.value.to_f64().unwrap_or(0.0)),
            }
        } else {
            S::from_f64(ToPrimitive::to_f64(&self.value).unwrap_or(0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_and_decimal() {
        let w = Weight::parse("2/5").unwrap();
        assert!(w.exact_input);
        assert_eq!(w.to_scalar::<f64>(), 0.4);
        let w = Weight::parse("0.5").unwrap();
        assert!(!w.exact_input);
        assert_eq!(w.to_scalar::<f64>(), 0.5);
    }

    #[test]
    fn rejects_zero_denominator() {
        assert!(Weight::parse("1/0").is_err());
    }

    #[test]
    fn rational_power_is_exact() {
        let r = BigRational::from_ratio(1, 3);
        assert_eq!(r.powi(2), BigRational::from_ratio(1, 9));
    }
}
