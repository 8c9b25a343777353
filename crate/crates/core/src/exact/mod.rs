//! Exact arithmetic: rationals, the quadratic field Q[sqrt 2], and dyadic rationals.

mod dyadic_rational;
mod qs2;

pub use dyadic_rational::DyadicRational;
pub use qs2::{half_power, QS2};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with positive denominator.
pub type Rational = num_rational::BigRational;

/// `2^e` as a rational, `e` may be negative.
pub fn pow2(e: i64) -> Rational {
    let mag = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        Rational::from_integer(mag)
    } else {
        Rational::new(BigInt::one(), mag)
    }
}

/// Parse `"p"` or `"p/q"` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        None => Ok(Rational::from_integer(s.parse::<BigInt>().map_err(|_| bad())?)),
        Some((p, q)) => {
            let p = p.trim().parse::<BigInt>().map_err(|_| bad())?;
            let q = q.trim().parse::<BigInt>().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(Error::DivisionByZero);
            }
            Ok(Rational::new(p, q))
        }
    }
}

/// Render a rational as `"p"` or `"p/q"`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Smallest `e` such that `2^-e <= r`, for `r > 0`. Used for certified comparisons
/// against quantities like `2^-(s+k)` that are too small to materialize.
pub fn log2_lower_exponent(r: &Rational) -> u64 {
    debug_assert!(r > &Rational::zero());
    // r >= 2^(bits(p)-1) / 2^bits(q) = 2^-(bits(q) - bits(p) + 1)
    let p = r.numer().bits() as i64;
    let q = r.denom().bits() as i64;
    (q - p + 1).max(0) as u64
}

/// Serde helpers writing a rational as its `"p/q"` string.
pub mod rational_str {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}
