use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{format_rational, parse_rational, pow2, Rational};
use crate::error::{Error, Result};

/// An element `a + b*sqrt(2)` of the field Q[sqrt 2].
///
/// Since sqrt 2 is irrational the pair `(a, b)` is unique, so derived equality and
/// hashing are value equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct QS2 {
    a: Rational,
    b: Rational,
}

/// `2^(-e/2)` exactly.
pub fn half_power(e: i64) -> QS2 {
    if e.rem_euclid(2) == 0 {
        QS2::rational(pow2(-e / 2))
    } else {
        // 2^(-e/2) = 2^(-(e+1)/2) * sqrt 2
        QS2::new(Rational::zero(), pow2(-(e + 1).div_euclid(2)))
    }
}

impl QS2 {
    pub fn new(a: Rational, b: Rational) -> Self {
        QS2 { a, b }
    }

    pub fn rational(a: Rational) -> Self {
        QS2 { a, b: Rational::zero() }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(v: i64) -> Self {
        Self::rational(Rational::from_integer(v.into()))
    }

    pub fn from_ratio(p: i64, q: i64) -> Self {
        Self::rational(Rational::new(p.into(), q.into()))
    }

    pub fn sqrt2() -> Self {
        QS2 { a: Rational::zero(), b: Rational::one() }
    }

    pub fn rational_part(&self) -> &Rational {
        &self.a
    }

    pub fn sqrt2_part(&self) -> &Rational {
        &self.b
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Exact sign, computed by comparing `a^2` with `2 b^2` when the parts disagree.
    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&Rational::zero());
        let sb = self.b.cmp(&Rational::zero());
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (x, y) if x == y => x,
            (sa, _) => {
                let a2 = &self.a * &self.a;
                let b2 = &self.b * &self.b * Rational::from_integer(2.into());
                match a2.cmp(&b2) {
                    Ordering::Greater => sa,
                    Ordering::Less => sa.reverse(),
                    Ordering::Equal => unreachable!("sqrt 2 is irrational"),
                }
            }
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn abs(&self) -> QS2 {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Multiply by `2^e`.
    pub fn scale_pow2(&self, e: i64) -> QS2 {
        let f = pow2(e);
        QS2 { a: &self.a * &f, b: &self.b * &f }
    }

    pub fn scale(&self, r: &Rational) -> QS2 {
        QS2 { a: &self.a * r, b: &self.b * r }
    }

    pub fn checked_div(&self, rhs: &QS2) -> Result<QS2> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero);
        }
        // 1/(c + d sqrt2) = (c - d sqrt2) / (c^2 - 2 d^2)
        let norm = &rhs.a * &rhs.a - &rhs.b * &rhs.b * Rational::from_integer(2.into());
        let conj = QS2 { a: rhs.a.clone(), b: -&rhs.b };
        let num = self * &conj;
        Ok(QS2 { a: num.a / &norm, b: num.b / norm })
    }

    pub fn max(self, other: QS2) -> QS2 {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: QS2) -> QS2 {
        if other < self {
            other
        } else {
            self
        }
    }

    /// A rational `r` with `0 < r <= self`, for positive values.
    pub fn rational_lower_bound(&self) -> Option<Rational> {
        if !self.is_positive() {
            return None;
        }
        // Bracket sqrt 2 by successively finer rationals until the lower estimate is positive.
        let mut digits = 8u32;
        loop {
            let (lo, hi) = sqrt2_bracket(digits);
            let est = if self.b.is_negative() { &self.a + &self.b * &hi } else { &self.a + &self.b * &lo };
            if est.is_positive() {
                return Some(est);
            }
            digits *= 2;
        }
    }

    /// A rational `r >= self`.
    pub fn rational_upper_bound(&self) -> Rational {
        let (lo, hi) = sqrt2_bracket(16);
        if self.b.is_negative() {
            &self.a + &self.b * &lo
        } else {
            &self.a + &self.b * &hi
        }
    }

    pub fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().unwrap_or(f64::NAN);
        let b = self.b.to_f64().unwrap_or(f64::NAN);
        a + b * std::f64::consts::SQRT_2
    }

    /// Decimal rendering correct to `digits` places after the point (truncated).
    pub fn to_decimal(&self, digits: u32) -> String {
        let sign = self.signum();
        let v = self.abs();
        let guard = 4u32;
        let scale = BigInt::from(10u32).pow(digits + guard);
        // floor(|a| * 10^n) + floor(|b| * sqrt(2) * 10^n), each exact via integer arithmetic.
        let a_part = (v.a.numer() * &scale).div_floor(v.a.denom());
        let b_part = if v.b.is_zero() {
            BigInt::zero()
        } else {
            let bn = v.b.numer().abs();
            let radicand: BigInt = &bn * &bn * 2 * &scale * &scale;
            let root = num_integer::Roots::sqrt(&radicand);
            root.div_floor(v.b.denom())
        };
        let total = if v.b.is_negative() {
            // |v| = a - |b| sqrt2 with a > |b| sqrt2; recompute with ceiling on the sqrt part.
            let bn = v.b.numer().abs();
            let radicand: BigInt = &bn * &bn * 2 * &scale * &scale;
            let mut root = num_integer::Roots::sqrt(&radicand);
            if &root * &root != radicand {
                root += 1;
            }
            a_part - ceil_div(&root, v.b.denom())
        } else if v.a.is_negative() {
            let an = v.a.numer().abs();
            b_part - ceil_div(&(an * &scale), v.a.denom())
        } else {
            a_part + b_part
        };
        let total = total / BigInt::from(10u32).pow(guard);
        let s = total.to_string();
        let (int, frac) = if s.len() > digits as usize {
            let cut = s.len() - digits as usize;
            (s[..cut].to_string(), s[cut..].to_string())
        } else {
            ("0".to_string(), format!("{:0>width$}", s, width = digits as usize))
        };
        let neg = if sign == Ordering::Less { "-" } else { "" };
        if digits == 0 {
            format!("{neg}{int}")
        } else {
            format!("{neg}{int}.{frac}")
        }
    }
}

fn ceil_div(n: &BigInt, d: &BigInt) -> BigInt {
    let (q, r) = n.div_rem(d);
    if r.is_zero() {
        q
    } else {
        q + 1
    }
}

/// Rationals `lo < sqrt 2 < hi` with `hi - lo <= 10^-digits`.
fn sqrt2_bracket(digits: u32) -> (Rational, Rational) {
    let scale = BigInt::from(10u32).pow(digits);
    let root = num_integer::Roots::sqrt(&(&scale * &scale * 2u32));
    let lo = Rational::new(root.clone(), scale.clone());
    let hi = Rational::new(root + 1, scale);
    (lo, hi)
}

impl PartialOrd for QS2 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QS2 {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

impl fmt::Display for QS2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (true, true) => write!(f, "0"),
            (false, true) => write!(f, "{}", format_rational(&self.a)),
            (true, false) => write!(f, "{}*sqrt2", format_rational(&self.b)),
            (false, false) => {
                let sep = if self.b.is_negative() { "" } else { "+" };
                write!(f, "{}{}{}*sqrt2", format_rational(&self.a), sep, format_rational(&self.b))
            }
        }
    }
}

impl fmt::Debug for QS2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QS2({self})")
    }
}

impl FromStr for QS2 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let Some(body) = s.strip_suffix("*sqrt2") else {
            return Ok(QS2::rational(parse_rational(&s)?));
        };
        // Split at the last sign that is not the leading one.
        let split = body
            .char_indices()
            .skip(1)
            .filter(|&(_, c)| c == '+' || c == '-')
            .map(|(i, _)| i)
            .last();
        match split {
            None => Ok(QS2::new(Rational::zero(), parse_rational(body)?)),
            Some(i) => {
                let a = parse_rational(&body[..i])?;
                let b = parse_rational(body[i..].trim_start_matches('+'))?;
                Ok(QS2::new(a, b))
            }
        }
    }
}

impl Serialize for QS2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for QS2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<Rational> for QS2 {
    fn from(r: Rational) -> Self {
        QS2::rational(r)
    }
}

impl From<i64> for QS2 {
    fn from(v: i64) -> Self {
        QS2::from_int(v)
    }
}

impl Neg for &QS2 {
    type Output = QS2;
    fn neg(self) -> QS2 {
        QS2 { a: -&self.a, b: -&self.b }
    }
}

impl Neg for QS2 {
    type Output = QS2;
    fn neg(self) -> QS2 {
        QS2 { a: -self.a, b: -self.b }
    }
}

impl Add<&QS2> for &QS2 {
    type Output = QS2;
    fn add(self, rhs: &QS2) -> QS2 {
        QS2 { a: &self.a + &rhs.a, b: &self.b + &rhs.b }
    }
}

impl Sub<&QS2> for &QS2 {
    type Output = QS2;
    fn sub(self, rhs: &QS2) -> QS2 {
        QS2 { a: &self.a - &rhs.a, b: &self.b - &rhs.b }
    }
}

impl Mul<&QS2> for &QS2 {
    type Output = QS2;
    fn mul(self, rhs: &QS2) -> QS2 {
        let two = Rational::from_integer(2.into());
        QS2 {
            a: &self.a * &rhs.a + &self.b * &rhs.b * two,
            b: &self.a * &rhs.b + &self.b * &rhs.a,
        }
    }
}

impl Div<&QS2> for &QS2 {
    type Output = QS2;
    /// Panics on division by zero; use [`QS2::checked_div`] for a fallible variant.
    fn div(self, rhs: &QS2) -> QS2 {
        self.checked_div(rhs).expect("QS2 division by zero")
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<QS2> for QS2 {
            type Output = QS2;
            fn $m(self, rhs: QS2) -> QS2 {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&QS2> for QS2 {
            type Output = QS2;
            fn $m(self, rhs: &QS2) -> QS2 {
                (&self).$m(rhs)
            }
        }
        impl $tr<QS2> for &QS2 {
            type Output = QS2;
            fn $m(self, rhs: QS2) -> QS2 {
                self.$m(&rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&QS2> for QS2 {
    fn add_assign(&mut self, rhs: &QS2) {
        self.a += &rhs.a;
        self.b += &rhs.b;
    }
}

impl AddAssign<QS2> for QS2 {
    fn add_assign(&mut self, rhs: QS2) {
        *self += &rhs;
    }
}

impl SubAssign<&QS2> for QS2 {
    fn sub_assign(&mut self, rhs: &QS2) {
        self.a -= &rhs.a;
        self.b -= &rhs.b;
    }
}

impl std::iter::Sum for QS2 {
    fn sum<I: Iterator<Item = QS2>>(iter: I) -> QS2 {
        iter.fold(QS2::zero(), |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a QS2> for QS2 {
    fn sum<I: Iterator<Item = &'a QS2>>(iter: I) -> QS2 {
        iter.fold(QS2::zero(), |acc, x| acc + x)
    }
}
