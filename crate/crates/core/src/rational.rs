//! Exact rational numbers used for feature values, scores and bucket positions.
//!
//! Values serialize as strings: `"p/q"` in lowest terms, or a bare integer when
//! the denominator is 1. Parsing also accepts finite decimal notation (`"0.3"`),
//! which is converted exactly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exact rational with `i64` numerator and denominator, always in lowest terms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational(Ratio<i64>);

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    /// Panics if `denom` is zero.
    pub fn new(numer: i64, denom: i64) -> Self {
        Rational(Ratio::new(numer, denom))
    }

    pub fn try_new(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::Parse(format!("zero denominator in {numer}/{denom}")));
        }
        Ok(Rational(Ratio::new(numer, denom)))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn checked_add(&self, other: &Rational) -> Result<Rational> {
        self.0.checked_add(&other.0).map(Rational).ok_or(Error::Overflow)
    }

    pub fn checked_sub(&self, other: &Rational) -> Result<Rational> {
        self.0.checked_sub(&other.0).map(Rational).ok_or(Error::Overflow)
    }

    pub fn checked_mul(&self, other: &Rational) -> Result<Rational> {
        self.0.checked_mul(&other.0).map(Rational).ok_or(Error::Overflow)
    }

    pub fn checked_div(&self, other: &Rational) -> Result<Rational> {
        if other.is_zero() {
            return Err(Error::DivisionByZero);
        }
        self.0.checked_div(&other.0).map(Rational).ok_or(Error::Overflow)
    }

    /// Rounds to the nearest integer, ties away from zero.
    pub fn round_half_away(&self) -> i64 {
        let (n, d) = (self.numer() as i128, self.denom() as i128);
        let twice = 2 * n.abs() + d;
        let mag = twice / (2 * d);
        (if n < 0 { -mag } else { mag }) as i64
    }

    /// Parses a decimal literal such as `0.3` or `-1.25` exactly.
    pub fn from_decimal_str(s: &str) -> Result<Rational> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(Error::Parse(format!("invalid number {s:?}")));
        }
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(Error::Parse(format!("invalid number {s:?}")));
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: i64 = if digits.is_empty() {
            0
        } else {
            digits
                .parse()
                .map_err(|_| Error::Parse(format!("number out of range: {s:?}")))?
        };
        let denom = 10i64
            .checked_pow(frac_part.len() as u32)
            .ok_or_else(|| Error::Parse(format!("too many decimals: {s:?}")))?;
        let r = Rational::new(numer, denom);
        Ok(if neg { Rational(-r.0) } else { r })
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(self.0 + rhs.0)
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        Rational(self.0 - rhs.0)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational(self.0 * rhs.0)
    }
}

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        Rational(self.0 / rhs.0)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p: i64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid numerator in {s:?}")))?;
            let q: i64 = q
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid denominator in {s:?}")))?;
            Rational::try_new(p, q)
        } else if t.contains('.') {
            Rational::from_decimal_str(t)
        } else {
            t.parse::<i64>()
                .map(Rational::from_integer)
                .map_err(|_| Error::Parse(format!("invalid rational {s:?}")))
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        // Accept both "p/q" strings and plain JSON numbers; numbers go through their
        // textual form so `0.3` stays exactly 3/10.
        let v = serde_json::Value::deserialize(deserializer)?;
        match v {
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            serde_json::Value::Number(n) => n.to_string().parse().map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!(
                "expected rational string or number, found {other}"
            ))),
        }
    }
}

/// Least common multiple with overflow detection.
pub(crate) fn checked_lcm(a: i64, b: i64) -> Result<i64> {
    let g = a.gcd(&b);
    (a / g).checked_mul(b).ok_or(Error::Overflow)
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        self.denom() == 1 && self.numer() == *other
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.0.partial_cmp(&Ratio::from_integer(*other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_exactly() {
        let r: Rational = "2/3".parse().unwrap();
        assert_eq!((r.numer(), r.denom()), (2, 3));
        let r: Rational = "4/6".parse().unwrap();
        assert_eq!((r.numer(), r.denom()), (2, 3));
    }

    #[test]
    fn parses_integers_and_decimals() {
        assert_eq!("0".parse::<Rational>().unwrap(), Rational::ZERO);
        assert_eq!("1".parse::<Rational>().unwrap(), Rational::ONE);
        assert_eq!("0.3".parse::<Rational>().unwrap(), Rational::new(3, 10));
        assert_eq!("-1.25".parse::<Rational>().unwrap(), Rational::new(-5, 4));
        assert_eq!(".5".parse::<Rational>().unwrap(), Rational::new(1, 2));
    }

    #[test]
    fn rejects_garbage() {
        assert!("1/0".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
        assert!("1.2.3".parse::<Rational>().is_err());
        assert!("".parse::<Rational>().is_err());
    }

    #[test]
    fn display_is_canonical() {
        assert_eq!(Rational::new(10, 15).to_string(), "2/3");
        assert_eq!(Rational::new(6, 3).to_string(), "2");
        assert_eq!(Rational::ZERO.to_string(), "0");
    }

    #[test]
    fn rounding_ties_go_away_from_zero() {
        assert_eq!(Rational::new(43, 5).round_half_away(), 9);
        assert_eq!(Rational::new(43, 10).round_half_away(), 4);
        assert_eq!(Rational::new(5, 2).round_half_away(), 3);
        assert_eq!(Rational::new(-5, 2).round_half_away(), -3);
        assert_eq!(Rational::new(1, 2).round_half_away(), 1);
        assert_eq!(Rational::new(7, 3).round_half_away(), 2);
        assert_eq!(Rational::ZERO.round_half_away(), 0);
    }

    #[test]
    fn json_accepts_numbers_and_strings() {
        let r: Rational = serde_json::from_str("0.1").unwrap();
        assert_eq!(r, Rational::new(1, 10));
        let r: Rational = serde_json::from_str("\"5/6\"").unwrap();
        assert_eq!(r, Rational::new(5, 6));
        assert_eq!(serde_json::to_string(&Rational::new(5, 6)).unwrap(), "\"5/6\"");
    }

    #[test]
    fn checked_ops_detect_overflow() {
        let big = Rational::from_integer(i64::MAX);
        assert!(matches!(big.checked_add(&Rational::ONE), Err(Error::Overflow)));
        assert!(matches!(Rational::ONE.checked_div(&Rational::ZERO), Err(Error::DivisionByZero)));
    }
}
