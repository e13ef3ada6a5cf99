//! Exact dyadic rationals `a / 2^e`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A number `numerator / 2^exponent` kept in canonical form: the numerator is
/// odd, or it is zero and the exponent is zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    exp: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DyadicParseError {
    #[error("malformed dyadic rational `{0}`")]
    Malformed(String),
    #[error("denominator of `{0}` is not a power of two")]
    NotDyadic(String),
}

impl Dyadic {
    pub fn new(num: impl Into<BigInt>, exp: u32) -> Self {
        let mut d = Dyadic { num: num.into(), exp };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic { num: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { num: BigInt::one(), exp: 0 }
    }

    /// `1 / 2^exp`
    pub fn half_pow(exp: u32) -> Self {
        Dyadic { num: BigInt::one(), exp }
    }

    /// Converts a fixed-point numerator over `2^exp` held in a `u128`.
    pub fn from_u128(num: u128, exp: u32) -> Self {
        Dyadic::new(BigInt::from(num), exp)
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0);
        let shift = tz.min(u64::from(self.exp)) as u32;
        if shift > 0 {
            self.num >>= shift;
            self.exp -= shift;
        }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    /// Numerator when written over `2^exp`. `exp` must be at least the
    /// canonical exponent.
    pub fn numerator_over(&self, exp: u32) -> BigInt {
        assert!(exp >= self.exp, "exponent {exp} below canonical {}", self.exp);
        &self.num << (exp - self.exp)
    }

    pub fn max(self, other: Dyadic) -> Dyadic {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Multiplies by `2^-shift`.
    pub fn halve(&self, shift: u32) -> Dyadic {
        Dyadic::new(self.num.clone(), self.exp + shift)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::one() << self.exp)
    }

    /// Exact conversion from a rational whose reduced denominator is a power of two.
    pub fn from_rational(r: &BigRational) -> Option<Dyadic> {
        let den = r.denom();
        if den.sign() != Sign::Plus {
            return None;
        }
        let tz = den.trailing_zeros().unwrap_or(0);
        if (den >> tz) != BigInt::one() {
            return None;
        }
        Some(Dyadic::new(r.numer().clone(), tz as u32))
    }

    pub fn to_f64(&self) -> f64 {
        let n = self.num.to_f64().unwrap_or(f64::NAN);
        n / 2f64.powi(self.exp as i32)
    }

    /// Reduced fraction `a/b` (or just `a` when the denominator is one).
    pub fn to_fraction_string(&self) -> String {
        if self.exp == 0 {
            self.num.to_string()
        } else {
            format!("{}/{}", self.num, BigUint::one() << self.exp)
        }
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        self.numerator_over(e).cmp(&other.numerator_over(e))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        Dyadic::new(self.numerator_over(e) + rhs.numerator_over(e), e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        Dyadic::new(self.numerator_over(e) - rhs.numerator_over(e), e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &rhs.num, self.exp + rhs.exp)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Dyadic> for Dyadic {
    fn sum<I: Iterator<Item = &'a Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |a, b| &a + b)
    }
}

/// Canonical rendering `a/2^e`.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.exp)
    }
}

/// Accepts `a/2^e`, `a/b` with `b` a power of two, or a bare integer.
impl FromStr for Dyadic {
    type Err = DyadicParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DyadicParseError::Malformed(s.to_string());
        let s = s.trim();
        let Some((num, den)) = s.split_once('/') else {
            return BigInt::from_str(s).map(|n| Dyadic::new(n, 0)).map_err(|_| bad());
        };
        let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let den = den.trim();
        if let Some(e) = den.strip_prefix("2^") {
            let e: u32 = e.parse().map_err(|_| bad())?;
            return Ok(Dyadic::new(num, e));
        }
        let den = BigInt::from_str(den).map_err(|_| bad())?;
        if den.sign() != Sign::Plus {
            return Err(bad());
        }
        let tz = den.trailing_zeros().unwrap_or(0);
        if (&den >> tz) != BigInt::one() {
            return Err(DyadicParseError::NotDyadic(s.to_string()));
        }
        Ok(Dyadic::new(num, tz as u32))
    }
}

#[derive(Serialize, Deserialize)]
struct DyadicRepr {
    num: String,
    exp: u32,
}

/// JSON shape `{"num": "<decimal>", "exp": e}`; the numerator is a string so
/// arbitrary-precision values survive any JSON reader.
impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DyadicRepr { num: self.num.to_string(), exp: self.exp }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = DyadicRepr::deserialize(deserializer)?;
        let num = BigInt::from_str(&repr.num).map_err(serde::de::Error::custom)?;
        let d = Dyadic { num, exp: repr.exp };
        let mut canon = d.clone();
        canon.normalize();
        if canon != d {
            return Err(serde::de::Error::custom(format!(
                "dyadic {}/2^{} is not in canonical form",
                repr.num, repr.exp
            )));
        }
        Ok(d)
    }
}
