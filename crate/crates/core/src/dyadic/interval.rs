use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{pow2, DyadicRational, Rational};

/// The dyadic interval `[l 2^-K, (l+1) 2^-K)` inside `[0,1)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    #[serde(rename = "l", with = "index_serde")]
    index: BigUint,
    #[serde(rename = "K")]
    level: u32,
}

/// `l` as a JSON integer when it fits in 64 bits, else as a decimal string.
mod index_serde {
    use num_bigint::BigUint;
    use num_traits::ToPrimitive;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        match v.to_u64() {
            Some(x) => s.serialize_u64(x),
            None => s.serialize_str(&v.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(x) => Ok(BigUint::from(x)),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl DyadicInterval {
    pub fn new(l: u64, level: u32) -> Result<Self> {
        Self::from_big(BigUint::from(l), level)
    }

    pub fn from_big(index: BigUint, level: u32) -> Result<Self> {
        if index >= BigUint::one() << level {
            return Err(Error::Invalid(format!("index {index} out of range at level {level}")));
        }
        Ok(DyadicInterval { level, index })
    }

    pub fn unit() -> Self {
        DyadicInterval { level: 0, index: BigUint::default() }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> &BigUint {
        &self.index
    }

    pub fn index_u64(&self) -> Option<u64> {
        self.index.to_u64()
    }

    pub fn measure(&self) -> Rational {
        pow2(-(self.level as i64))
    }

    pub fn left(&self) -> DyadicRational {
        DyadicRational::new(self.index.clone(), self.level)
    }

    pub fn right(&self) -> DyadicRational {
        DyadicRational::new(&self.index + 1u32, self.level)
    }

    pub fn halves(&self) -> (Self, Self) {
        let l = &self.index << 1u32;
        let r = &l + 1u32;
        (
            DyadicInterval { level: self.level + 1, index: l },
            DyadicInterval { level: self.level + 1, index: r },
        )
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| DyadicInterval { level: self.level - 1, index: &self.index >> 1u32 })
    }

    /// Binary digit `j` (1-based) shared by every point of the interval, `j <= K`.
    pub fn digit(&self, j: u32) -> bool {
        debug_assert!(j >= 1 && j <= self.level);
        self.index.bit((self.level - j) as u64)
    }

    pub fn contains(&self, x: &DyadicRational) -> bool {
        let shift = x.level().max(self.level);
        let xk = x.numerator_at(shift).expect("finer level");
        let lo = &self.index << (shift - self.level);
        let hi = (&self.index + 1u32) << (shift - self.level);
        lo <= xk && xk < hi
    }

    pub fn contains_interval(&self, other: &Self) -> bool {
        other.level >= self.level && (&other.index >> (other.level - self.level)) == self.index
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        !self.contains_interval(other) && !other.contains_interval(self)
    }

    /// The `2^(level-K)` subintervals at a finer level, refused beyond `limit`.
    pub fn subdivide(&self, level: u32, limit: usize) -> Result<Vec<Self>> {
        if level < self.level {
            return Err(Error::Invalid(format!("cannot subdivide level {} at {level}", self.level)));
        }
        let d = level - self.level;
        if d >= 63 || (1usize << d) > limit {
            return Err(Error::Invalid(format!("2^{d} subintervals exceed limit {limit}")));
        }
        let base = &self.index << d;
        Ok((0..1u64 << d)
            .map(|i| DyadicInterval { level, index: &base + i })
            .collect())
    }
}

/// Ordered by left endpoint, then coarser first.
impl Ord for DyadicInterval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let top = self.level.max(other.level);
        let a = &self.index << (top - self.level);
        let b = &other.index << (top - other.level);
        a.cmp(&b).then(self.level.cmp(&other.level))
    }
}

impl PartialOrd for DyadicInterval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}+1)/2^{}", self.index, self.index, self.level)
    }
}

impl fmt::Debug for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Interval({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment() {
        let a = DyadicInterval::new(1, 1).unwrap();
        let b = DyadicInterval::new(3, 2).unwrap();
        let c = DyadicInterval::new(1, 2).unwrap();
        assert!(a.contains_interval(&b));
        assert!(!a.contains_interval(&c));
        assert!(a.is_disjoint(&c));
        assert!(a.contains(&DyadicRational::from_u64(1, 1)));
        assert!(!a.contains(&DyadicRational::from_u64(0, 0)));
        assert!(DyadicInterval::new(4, 2).is_err());
    }

    #[test]
    fn digits_and_halves() {
        let a = DyadicInterval::new(5, 3).unwrap(); // 0.101
        assert!(a.digit(1) && !a.digit(2) && a.digit(3));
        let (l, r) = a.halves();
        assert_eq!(l.parent().unwrap(), a);
        assert_eq!(r.index_u64(), Some(11));
        assert_eq!(a.subdivide(5, 8).unwrap().len(), 4);
    }

    #[test]
    fn json_field_names() {
        let a = DyadicInterval::new(3, 2).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"l":3,"K":2}"#);
        let big = DyadicInterval::from_big(BigUint::one() << 70u32, 80).unwrap();
        let t = serde_json::to_string(&big).unwrap();
        assert_eq!(serde_json::from_str::<DyadicInterval>(&t).unwrap(), big);
    }
}
