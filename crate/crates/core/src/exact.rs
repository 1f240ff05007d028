//! Reals that stay exact (rational) as long as every input was rational.
//!
//! Map geometry is usually rational (1/2, 1/3, 2/3 ...). Keeping it exact lets
//! cylinder identities and grid alignment be checked without tolerance.
//! Any overflow or non-rational input drops to plain `f64`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

/// Tolerance used when one side of a comparison is inexact.
pub const FLOAT_TOL: f64 = 1e-12;

#[derive(Clone, Copy)]
pub struct Real {
    approx: f64,
    exact: Option<Rational>,
}

impl Real {
    pub fn exact(r: Rational) -> Self {
        Self { approx: r.to_f64().unwrap_or(f64::NAN), exact: Some(r) }
    }

    pub fn float(x: f64) -> Self {
        Self { approx: x, exact: None }
    }

    pub fn int(n: i64) -> Self {
        Self::exact(Rational::from_integer(n as i128))
    }

    pub fn frac(num: i64, den: i64) -> Self {
        Self::exact(Rational::new(num as i128, den as i128))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    /// Converts a float, keeping it exact when it is a dyadic rational with a
    /// small denominator (0.5, 0.25, 3.0 ...).
    pub fn from_f64(x: f64) -> Self {
        if x.is_finite() {
            let mut scaled = x;
            let mut den: i128 = 1;
            for _ in 0..40 {
                if scaled.fract() == 0.0 && scaled.abs() < 1e30 {
                    return Self::exact(Rational::new(scaled as i128, den));
                }
                scaled *= 2.0;
                den *= 2;
            }
        }
        Self::float(x)
    }

    /// Parses `"p/q"`, an integer, or a decimal literal.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: i128 = num.trim().parse().map_err(|_| Error::Parse(format!("bad fraction {s:?}")))?;
            let den: i128 = den.trim().parse().map_err(|_| Error::Parse(format!("bad fraction {s:?}")))?;
            if den == 0 {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(Self::exact(Rational::new(num, den)));
        }
        if let Ok(n) = s.parse::<i128>() {
            return Ok(Self::exact(Rational::from_integer(n)));
        }
        let x: f64 = s.parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))?;
        Ok(Self::from_f64(x))
    }

    pub fn value(&self) -> f64 {
        self.approx
    }

    pub fn as_exact(&self) -> Option<Rational> {
        self.exact
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn abs(self) -> Self {
        if self.approx < 0.0 { -self } else { self }
    }

    pub fn is_zero(&self) -> bool {
        match self.exact {
            Some(r) => r.is_zero(),
            None => self.approx.abs() <= FLOAT_TOL,
        }
    }

    /// Exact equality when both sides are rational, tolerance otherwise.
    pub fn same(&self, other: &Real) -> bool {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => (self.approx - other.approx).abs() <= FLOAT_TOL * (1.0 + self.approx.abs()),
        }
    }

    pub fn floor(&self) -> i64 {
        match self.exact {
            Some(r) => r.floor().to_integer() as i64,
            None => self.approx.floor() as i64,
        }
    }

    pub fn ceil(&self) -> i64 {
        match self.exact {
            Some(r) => r.ceil().to_integer() as i64,
            None => self.approx.ceil() as i64,
        }
    }

    /// Denominator of the exact value, if any.
    pub fn denominator(&self) -> Option<i128> {
        self.exact.map(|r| *r.denom())
    }

    fn combine(
        self,
        rhs: Self,
        exact: impl Fn(&Rational, &Rational) -> Option<Rational>,
        approx: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let value = approx(self.approx, rhs.approx);
        match (self.exact, rhs.exact) {
            (Some(a), Some(b)) => match exact(&a, &b) {
                Some(r) => Self::exact(r),
                None => Self::float(value),
            },
            _ => Self::float(value),
        }
    }
}

impl Add for Real {
    type Output = Real;
    fn add(self, rhs: Real) -> Real {
        self.combine(rhs, |a, b| a.checked_add(b), |a, b| a + b)
    }
}

impl Sub for Real {
    type Output = Real;
    fn sub(self, rhs: Real) -> Real {
        self.combine(rhs, |a, b| a.checked_sub(b), |a, b| a - b)
    }
}

impl Mul for Real {
    type Output = Real;
    fn mul(self, rhs: Real) -> Real {
        self.combine(rhs, |a, b| a.checked_mul(b), |a, b| a * b)
    }
}

impl Div for Real {
    type Output = Real;
    fn div(self, rhs: Real) -> Real {
        self.combine(rhs, |a, b| if b.is_zero() { None } else { a.checked_div(b) }, |a, b| a / b)
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Self { approx: -self.approx, exact: self.exact.map(|r| -r) }
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => Some(a.cmp(&b)),
            _ => self.approx.partial_cmp(&other.approx),
        }
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => write!(f, "{}", self.approx),
        }
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real::from_f64(x)
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.exact {
            Some(r) if *r.denom() == 1 => s.serialize_i64(*r.numer() as i64),
            Some(_) => s.serialize_str(&self.to_string()),
            None => s.serialize_f64(self.approx),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Real::int(n)),
            Raw::Num(x) => Ok(Real::from_f64(x)),
            Raw::Str(s) => Real::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: i128, b: i128) -> i128 {
    if a == 0 || b == 0 {
        return 0;
    }
    (a / gcd(a, b)) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_stay_exact() {
        let third = Real::parse("1/3").unwrap();
        let sum = third + third + third;
        assert!(sum.is_exact());
        assert_eq!(sum, Real::one());
    }

    #[test]
    fn dyadic_floats_become_exact() {
        assert!(Real::from_f64(0.375).is_exact());
        assert!(!Real::from_f64(0.1).is_exact());
    }

    #[test]
    fn inexact_poisons_result() {
        let x = Real::frac(1, 3) * Real::float(0.1);
        assert!(!x.is_exact());
        assert!((x.value() - 0.1 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(Real::frac(-1, 2).floor(), -1);
        assert_eq!(Real::frac(3, 2).ceil(), 2);
        assert_eq!(Real::int(2).floor(), 2);
    }
}
