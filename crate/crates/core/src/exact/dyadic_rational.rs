use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Rational;
use crate::error::{Error, Result};

/// A dyadic rational `k / 2^level`, kept canonical (odd `k`, or `level == 0`).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    k: BigUint,
    level: u32,
}

impl DyadicRational {
    pub fn new(k: BigUint, level: u32) -> Self {
        let mut d = DyadicRational { k, level };
        d.normalize();
        d
    }

    pub fn from_u64(k: u64, level: u32) -> Self {
        Self::new(BigUint::from(k), level)
    }

    pub fn zero() -> Self {
        DyadicRational { k: BigUint::zero(), level: 0 }
    }

    fn normalize(&mut self) {
        if self.k.is_zero() {
            self.level = 0;
            return;
        }
        let tz = self.k.trailing_zeros().unwrap_or(0).min(self.level as u64);
        self.k >>= tz;
        self.level -= tz as u32;
    }

    pub fn numerator(&self) -> &BigUint {
        &self.k
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// True when the value lies in the half-open unit interval.
    pub fn in_unit(&self) -> bool {
        self.k < (BigUint::one() << self.level)
    }

    /// Binary digit `j >= 1` after the point: x = sum_j digit_j 2^-j.
    pub fn digit(&self, j: u32) -> bool {
        if j == 0 || j > self.level {
            return false;
        }
        self.k.bit((self.level - j) as u64)
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.k.clone().into(), (BigUint::one() << self.level).into())
    }

    /// `k' / 2^level'` with `level' >= level`, the same value written on a finer grid.
    pub fn numerator_at(&self, level: u32) -> Option<BigUint> {
        (level >= self.level).then(|| &self.k << (level - self.level))
    }

    pub fn is_odd_numerator(&self) -> bool {
        self.k.is_odd()
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.k, self.level)
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dyadic({self})")
    }
}

impl FromStr for DyadicRational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("not a dyadic rational: {s:?}"));
        let (k, j) = s.trim().split_once("/2^").ok_or_else(bad)?;
        let k = k.parse::<BigUint>().map_err(|_| bad())?;
        let j = j.parse::<u32>().map_err(|_| bad())?;
        Ok(DyadicRational::new(k, j))
    }
}

impl Serialize for DyadicRational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DyadicRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
