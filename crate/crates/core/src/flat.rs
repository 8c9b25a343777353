//! Walsh polynomials on one index block `[2^M, 2^(M+1))` with constant coefficient
//! magnitude, equal to `-1` and `+1` on two halves of a dyadic interval and `0` outside.
//!
//! `H(x) = chi_Δ(x) h(x_{K+1}, ..., x_M) R_{M+1}(x)` with the inner-product bent pattern
//! `h(y) = (-1)^(y_1 y_2 + y_3 y_4 + ...)`. The three factors read disjoint digit ranges,
//! so each coefficient factors as `2^-K W_{j_low}(Δ) · ĥ(j_high)` with `|ĥ| = 2^-(M-K)/2`.

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use crate::dyadic::{DyadicInterval, DyadicSet, DyadicTree, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{half_power, Rational, QS2};
use crate::report::{Check, Mode, VerificationReport};
use crate::walsh::fwht;

/// `h(y)` for `y` in `0..2^t`, with `y_1` the most significant bit.
pub fn bent_pattern(t: u32, budget: u32) -> Result<Vec<i8>> {
    if t % 2 != 0 {
        return Err(Error::Precondition(format!("bent patterns need an even length exponent, got {t}")));
    }
    if t > budget {
        return Err(Error::BudgetExceeded { level: t, budget });
    }
    Ok((0u64..1 << t)
        .map(|y| {
            let mut parity = 0;
            for p in 0..t / 2 {
                let hi = (y >> (t - 1 - 2 * p)) & 1;
                let lo = (y >> (t - 2 - 2 * p)) & 1;
                parity ^= hi & lo;
            }
            if parity == 1 {
                -1
            } else {
                1
            }
        })
        .collect())
}

/// `h(y_1..y_t) R_{t+1}` relative to `[0,1)`, as a shared tree of `O(t)` nodes.
fn bent_tree(t: u32) -> DyadicTree<i8> {
    let mut pos = DyadicTree::split(DyadicTree::leaf(1i8), DyadicTree::leaf(-1));
    let mut neg = DyadicTree::split(DyadicTree::leaf(-1i8), DyadicTree::leaf(1));
    for _ in 0..t / 2 {
        let p = DyadicTree::split(
            DyadicTree::split(pos.clone(), pos.clone()),
            DyadicTree::split(pos.clone(), neg.clone()),
        );
        let n = DyadicTree::split(
            DyadicTree::split(neg.clone(), neg.clone()),
            DyadicTree::split(neg, pos),
        );
        pos = p;
        neg = n;
    }
    pos
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatPoly {
    pub delta: DyadicInterval,
    #[serde(rename = "M")]
    pub m: u32,
    pub magnitude: QS2,
    #[serde(skip)]
    relative: DyadicTree<i8>,
}

impl PartialEq for FlatPoly {
    fn eq(&self, other: &Self) -> bool {
        self.delta == other.delta && self.m == other.m
    }
}

impl FlatPoly {
    pub fn new(delta: DyadicInterval, m: u32) -> Result<Self> {
        let k = delta.level();
        if m <= k || (m - k) % 2 != 0 {
            return Err(Error::Precondition(format!(
                "need M > K with M - K even, got K = {k}, M = {m}"
            )));
        }
        Ok(FlatPoly {
            magnitude: half_power((m + k) as i64),
            relative: bent_tree(m - k),
            delta,
            m,
        })
    }

    pub fn level(&self) -> u32 {
        self.delta.level()
    }

    /// `H` relative to `Δ`, values `±1`.
    pub fn relative_signs(&self) -> &DyadicTree<i8> {
        &self.relative
    }

    /// `H` relative to `Δ`, scaled by `c`.
    pub fn relative_function(&self, c: &QS2) -> StepFunction {
        let neg = -c;
        StepFunction::from_tree(self.relative.map(&|s| if *s > 0 { c.clone() } else { neg.clone() }))
    }

    /// `c H` on `[0,1)`.
    pub fn function(&self, c: &QS2) -> StepFunction {
        StepFunction::place(&self.delta, &self.relative_function(c))
    }

    /// `{H = -1}`.
    pub fn e1(&self) -> DyadicSet {
        DyadicSet::place(&self.delta, &DyadicSet::from_tree(self.relative.map(&|s| *s < 0)))
    }

    /// `{H = +1}`.
    pub fn e2(&self) -> DyadicSet {
        DyadicSet::place(&self.delta, &DyadicSet::from_tree(self.relative.map(&|s| *s > 0)))
    }

    /// Sign of the coefficient at `k`, `None` outside the block.
    pub fn coefficient_sign(&self, k: &BigUint) -> Option<i8> {
        let m = self.m as u64;
        if k.bits() != m + 1 {
            return None;
        }
        let kk = self.level() as u64;
        let mut parity = false;
        // W_{j_low} on Δ: bit i of j pairs with digit i+1 of Δ
        for i in 0..kk {
            if k.bit(i) && self.delta.digit(i as u32 + 1) {
                parity = !parity;
            }
        }
        // bent dual: pairs of bits (K, K+1), (K+2, K+3), ...
        let mut i = kk;
        while i + 1 < m {
            if k.bit(i) && k.bit(i + 1) {
                parity = !parity;
            }
            i += 2;
        }
        Some(if parity { -1 } else { 1 })
    }

    pub fn coefficient(&self, k: &BigUint) -> QS2 {
        match self.coefficient_sign(k) {
            Some(s) if s > 0 => self.magnitude.clone(),
            Some(_) => -&self.magnitude,
            None => QS2::zero(),
        }
    }

    pub fn block_start(&self) -> BigUint {
        BigUint::one() << self.m
    }

    /// `h` on the `2^(M-K)` sub-pieces of `Δ`, under the dense budget.
    pub fn sign_pattern(&self, budget: u32) -> Result<Vec<i8>> {
        bent_pattern(self.m - self.level(), budget)
    }
}

/// The four properties of the polynomial, read off an exact transform of its level-`(M+1)` grid.
pub fn verify_flat_poly(p: &FlatPoly, budget: u32) -> Result<VerificationReport> {
    let mode = Mode::Paper;
    let h = p.function(&QS2::one());
    let grid = h.grid(p.m + 1, budget)?;
    let coeffs = fwht(&grid, budget)?.coefficients;
    let start = 1usize << p.m;
    let in_block = (start..2 * start).find(|&k| coeffs[k] != p.coefficient(&BigUint::from(k)) || coeffs[k].abs() != p.magnitude);
    let outside = (0..start).find(|&k| !coeffs[k].is_zero());
    let spectrum_detail = match (in_block, outside) {
        (Some(k), _) => Some(format!("coefficient {k} is {}", coeffs[k].to_decimal(12))),
        (None, Some(k)) => Some(format!("nonzero coefficient {k} outside the block")),
        (None, None) => Some(format!("{start} coefficients of magnitude {}", p.magnitude)),
    };
    let mut checks = vec![Check::flag("coefficient_magnitude", in_block.is_none() && outside.is_none(), mode, true, spectrum_detail)];

    let delta = DyadicSet::interval(&p.delta);
    let half = QS2::from(p.delta.measure() / Rational::from_integer(2.into()));
    let minus = h.level_set(&|v| *v == -QS2::one());
    let plus = h.level_set(&|v| *v == QS2::one());
    for (name, set, e) in [("minus_one_on_E1", &minus, p.e1()), ("plus_one_on_E2", &plus, p.e2())] {
        let measure = QS2::from(e.measure());
        let mut c = Check::equal(name, &measure, &half, mode)
            .with_detail(if *set == e { "level set matches" } else { "level set differs" });
        c.pass &= *set == e;
        checks.push(c);
    }
    let zero_off = h.support().is_subset(&delta) && minus.union(&plus) == delta;
    checks.push(Check::flag("zero_off_delta", zero_off, mode, true, None));
    Ok(VerificationReport::new("lemma1", mode, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(l: u64, k: u32) -> DyadicInterval {
        DyadicInterval::new(l, k).unwrap()
    }

    fn wht(h: &[i8]) -> Vec<i64> {
        let n = h.len();
        (0..n)
            .map(|w| {
                (0..n)
                    .map(|y| {
                        let s = if (w & y).count_ones() % 2 == 1 { -1 } else { 1 };
                        s * h[y] as i64
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn bent_examples() {
        assert_eq!(bent_pattern(0, 22).unwrap(), vec![1]);
        let h2 = bent_pattern(2, 22).unwrap();
        assert_eq!(h2, vec![1, 1, 1, -1]);
        assert!(wht(&h2).iter().all(|v| v.abs() == 2));
        assert!(wht(&bent_pattern(4, 22).unwrap()).iter().all(|v| v.abs() == 4));
        assert!(bent_pattern(3, 22).is_err());
    }

    #[test]
    fn lemma_example() {
        let h = FlatPoly::new(iv(0, 1), 3).unwrap();
        assert_eq!(h.magnitude, QS2::from_ratio(1, 4));
        let grid = h.function(&QS2::one()).grid(4, 22).unwrap();
        let c = fwht(&grid, 22).unwrap().coefficients;
        for (k, v) in c.iter().enumerate() {
            if (8..16).contains(&k) {
                assert_eq!(v.abs(), QS2::from_ratio(1, 4), "k={k}");
                assert_eq!(v, &h.coefficient(&BigUint::from(k)));
            } else {
                assert!(v.is_zero(), "k={k}");
            }
        }
        assert_eq!(h.e1().measure(), Rational::new(1.into(), 4.into()));
        assert_eq!(h.e2().measure(), Rational::new(1.into(), 4.into()));
        assert!(grid[8..].iter().all(|v| v.is_zero()));
    }

    #[test]
    fn spectrum_and_sets_for_small_levels() {
        for k in 0..=4u32 {
            for t in [2u32, 4, 6] {
                let m = k + t;
                for l in [0u64, (1u64 << k) - 1, (1u64 << k) / 3] {
                    let d = iv(l, k);
                    let h = FlatPoly::new(d.clone(), m).unwrap();
                    let f = h.function(&QS2::one());
                    let c = fwht(&f.grid(m + 1, 22).unwrap(), 22).unwrap().coefficients;
                    for (i, v) in c.iter().enumerate() {
                        assert_eq!(v, &h.coefficient(&BigUint::from(i)), "K={k} M={m} l={l} i={i}");
                    }
                    let half = d.measure() / Rational::from_integer(2.into());
                    assert_eq!(h.e1().measure(), half);
                    assert_eq!(h.e2().measure(), half);
                    assert_eq!(h.e1().union(&h.e2()), DyadicSet::interval(&d));
                    assert!(h.e1().intersect(&h.e2()).is_empty());
                    assert!(f.integral().is_zero());
                    let l2: QS2 = c.iter().map(|v| v * v).sum();
                    assert_eq!(l2, QS2::from(d.measure()));
                }
            }
        }
    }

    #[test]
    fn deep_atom_is_small() {
        let h = FlatPoly::new(iv(3, 7), 287).unwrap();
        assert!(h.relative_signs().node_count() < 2000);
        assert_eq!(h.e1().measure(), Rational::new(1.into(), 256.into()));
        let f = h.function(&QS2::from_int(-2));
        assert_eq!(f.l1(), QS2::from_ratio(2, 128));
    }

    #[test]
    fn rejects_bad_parity() {
        assert!(FlatPoly::new(iv(0, 1), 4).is_err());
        assert!(FlatPoly::new(iv(0, 3), 3).is_err());
    }

    #[test]
    fn property_report_for_small_cases() {
        for k in 0..=2u32 {
            for gap in [2u32, 4] {
                let p = FlatPoly::new(iv(if k == 0 { 0 } else { 1 }, k), k + gap).unwrap();
                let rep = verify_flat_poly(&p, 12).unwrap();
                assert!(rep.pass, "{:#?}", rep.failures());
                assert_eq!(rep.checks.len(), 4);
            }
        }
        let p = FlatPoly::new(iv(0, 0), 10).unwrap();
        assert!(matches!(verify_flat_poly(&p, 8), Err(Error::BudgetExceeded { .. })));
    }
}
