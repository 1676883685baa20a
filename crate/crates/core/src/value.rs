//! Exact rational values.

use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An arbitrary-precision rational, always kept in lowest terms with a
/// positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ExactValue(BigRational);

/// Failure to read a rational from text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueParseError {
    #[error("empty rational")]
    Empty,
    #[error("malformed integer `{0}`")]
    BadInteger(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

impl ExactValue {
    pub fn zero() -> Self {
        ExactValue(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactValue(BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        ExactValue(BigRational::from_integer(BigInt::from(n)))
    }

    /// `p/q`. Panics when `q == 0`.
    pub fn ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        ExactValue(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn from_bigints(p: BigInt, q: BigInt) -> Option<Self> {
        if q.is_zero() {
            None
        } else {
            Some(ExactValue(BigRational::new(p, q)))
        }
    }

    pub fn from_bigint(n: BigInt) -> Self {
        ExactValue(BigRational::from_integer(n))
    }

    /// `k / 2^d`.
    pub fn dyadic(k: i64, d: u32) -> Self {
        ExactValue(BigRational::new(
            BigInt::from(k),
            BigInt::one() << d as usize,
        ))
    }

    /// `2^-d`.
    pub fn pow2_neg(d: u32) -> Self {
        Self::dyadic(1, d)
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        ExactValue(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        ExactValue(self.0.recip())
    }

    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn pow(&self, e: i32) -> Self {
        ExactValue(num_traits::Pow::pow(&self.0, e))
    }

    /// Largest multiple of `step` that is `<= self`. `step` must be positive.
    pub fn floor_to(&self, step: &ExactValue) -> Self {
        let k = (&self.0 / &step.0).floor();
        ExactValue(k * &step.0)
    }

    /// Midpoint of `self` and `other`.
    pub fn midpoint(&self, other: &ExactValue) -> Self {
        ExactValue((&self.0 + &other.0) / BigRational::from_integer(BigInt::from(2)))
    }

    pub fn min_of<'a>(a: &'a ExactValue, b: &'a ExactValue) -> &'a ExactValue {
        if a <= b {
            a
        } else {
            b
        }
    }

    pub fn max_of<'a>(a: &'a ExactValue, b: &'a ExactValue) -> &'a ExactValue {
        if a >= b {
            a
        } else {
            b
        }
    }

    /// Integer `n` if the value is a nonnegative integer that fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.is_integer() {
            self.0.numer().to_u64()
        } else {
            None
        }
    }

    /// Lossy conversion for reports and plotting only.
    pub fn to_f64(&self) -> f64 {
        let n = self.0.numer();
        let d = self.0.denom();
        // shift both to at most ~60 significant bits to avoid overflow to inf
        let bits = n.bits().max(d.bits());
        if bits > 1000 {
            let shift = (bits - 1000) as usize;
            let n2: BigInt = n >> shift;
            let d2: BigInt = d >> shift;
            return n2.to_f64().unwrap_or(0.0) / d2.to_f64().unwrap_or(1.0);
        }
        n.to_f64().unwrap_or(0.0) / d.to_f64().unwrap_or(1.0)
    }

    /// Exact integer square root bounds: returns `(r, exact)` with
    /// `r = floor(sqrt(self))` for nonnegative integers.
    pub fn isqrt(&self) -> Option<(BigInt, bool)> {
        if !self.is_integer() || self.is_negative() {
            return None;
        }
        let n = self.0.numer();
        let r = n.sqrt();
        let exact = &r * &r == *n;
        Some((r, exact))
    }

    pub fn cmp_zero(&self) -> Ordering {
        self.0.cmp(&BigRational::zero())
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ExactValue {
    type Err = ValueParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ValueParseError::Empty);
        }
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (s, "1"),
        };
        let p: BigInt = p
            .parse()
            .map_err(|_| ValueParseError::BadInteger(s.to_string()))?;
        let q: BigInt = q
            .parse()
            .map_err(|_| ValueParseError::BadInteger(s.to_string()))?;
        if q.is_zero() {
            return Err(ValueParseError::ZeroDenominator(s.to_string()));
        }
        Ok(ExactValue(BigRational::new(p, q)))
    }
}

impl From<i64> for ExactValue {
    fn from(n: i64) -> Self {
        ExactValue::from_int(n)
    }
}

impl From<BigRational> for ExactValue {
    fn from(r: BigRational) -> Self {
        ExactValue(r)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl $tr<ExactValue> for ExactValue {
            type Output = ExactValue;
            fn $m(self, rhs: ExactValue) -> ExactValue {
                ExactValue(self.0.$m(rhs.0))
            }
        }
        impl<'a> $tr<&'a ExactValue> for ExactValue {
            type Output = ExactValue;
            fn $m(self, rhs: &'a ExactValue) -> ExactValue {
                ExactValue(self.0.$m(&rhs.0))
            }
        }
        impl<'a> $tr<ExactValue> for &'a ExactValue {
            type Output = ExactValue;
            fn $m(self, rhs: ExactValue) -> ExactValue {
                ExactValue((&self.0).$m(rhs.0))
            }
        }
        impl<'a, 'b> $tr<&'b ExactValue> for &'a ExactValue {
            type Output = ExactValue;
            fn $m(self, rhs: &'b ExactValue) -> ExactValue {
                ExactValue((&self.0).$m(&rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl AddAssign<&ExactValue> for ExactValue {
    fn add_assign(&mut self, rhs: &ExactValue) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<ExactValue> for ExactValue {
    fn add_assign(&mut self, rhs: ExactValue) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&ExactValue> for ExactValue {
    fn sub_assign(&mut self, rhs: &ExactValue) {
        self.0 -= &rhs.0;
    }
}

impl Neg for ExactValue {
    type Output = ExactValue;
    fn neg(self) -> ExactValue {
        ExactValue(-self.0)
    }
}

impl Neg for &ExactValue {
    type Output = ExactValue;
    fn neg(self) -> ExactValue {
        ExactValue(-&self.0)
    }
}

impl core::iter::Sum for ExactValue {
    fn sum<I: Iterator<Item = ExactValue>>(iter: I) -> Self {
        iter.fold(ExactValue::zero(), |a, b| a + b)
    }
}

impl<'a> core::iter::Sum<&'a ExactValue> for ExactValue {
    fn sum<I: Iterator<Item = &'a ExactValue>>(iter: I) -> Self {
        iter.fold(ExactValue::zero(), |a, b| a + b)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ExactValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ExactValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = ExactValue;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational \"p/q\" or an integer")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<ExactValue, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<ExactValue, E> {
                Ok(ExactValue::from_int(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ExactValue, E> {
                Ok(ExactValue::from_bigint(BigInt::from(v)))
            }
        }
        d.deserialize_any(V)
    }
}
