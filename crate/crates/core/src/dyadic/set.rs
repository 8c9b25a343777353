use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DyadicInterval, DyadicTree};
use crate::error::Result;
use crate::exact::{DyadicRational, Rational};

/// A finite union of half-open dyadic intervals, kept in maximal form.
#[derive(Clone, PartialEq, Eq)]
pub struct DyadicSet(DyadicTree<bool>);

impl DyadicSet {
    pub fn empty() -> Self {
        DyadicSet(DyadicTree::leaf(false))
    }

    pub fn unit() -> Self {
        DyadicSet(DyadicTree::leaf(true))
    }

    pub fn from_tree(tree: DyadicTree<bool>) -> Self {
        DyadicSet(tree)
    }

    pub fn tree(&self) -> &DyadicTree<bool> {
        &self.0
    }

    pub fn interval(cell: &DyadicInterval) -> Self {
        DyadicSet(DyadicTree::place(cell, DyadicTree::leaf(true), false))
    }

    /// Union of arbitrary (possibly overlapping) intervals.
    pub fn from_intervals<'a>(cells: impl IntoIterator<Item = &'a DyadicInterval>) -> Self {
        let mut cells: Vec<DyadicInterval> = cells.into_iter().cloned().collect();
        cells.sort();
        // drop intervals nested in an earlier one so the rest are disjoint
        let mut kept: Vec<DyadicInterval> = Vec::with_capacity(cells.len());
        for c in cells {
            if kept.last().is_some_and(|k| k.contains_interval(&c)) {
                continue;
            }
            kept.push(c);
        }
        let items: Vec<_> = kept.into_iter().map(|c| (c, DyadicTree::leaf(true))).collect();
        DyadicSet(DyadicTree::assemble(&items, false))
    }

    /// `inner` (relative to `cell`) placed inside `cell`.
    pub fn place(cell: &DyadicInterval, inner: &DyadicSet) -> Self {
        DyadicSet(DyadicTree::place(cell, inner.0.clone(), false))
    }

    pub fn restrict(&self, cell: &DyadicInterval) -> Self {
        DyadicSet(self.0.restrict(cell))
    }

    pub fn union(&self, other: &Self) -> Self {
        DyadicSet(self.0.zip(&other.0, &|a, b| *a || *b))
    }

    pub fn intersect(&self, other: &Self) -> Self {
        DyadicSet(self.0.zip(&other.0, &|a, b| *a && *b))
    }

    pub fn difference(&self, other: &Self) -> Self {
        DyadicSet(self.0.zip(&other.0, &|a, b| *a && !*b))
    }

    pub fn complement(&self) -> Self {
        DyadicSet(self.0.map(&|a| !*a))
    }

    pub fn is_empty(&self) -> bool {
        self.0.as_leaf() == Some(&false)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    pub fn contains(&self, x: &DyadicRational) -> bool {
        *self.0.eval(x)
    }

    pub fn measure(&self) -> Rational {
        let half = Rational::new(1.into(), 2.into());
        self.0.fold(
            &|v| if *v { Rational::one() } else { Rational::zero() },
            &|a, b| (a + b) * &half,
        )
    }

    /// Number of maximal intervals.
    pub fn interval_count(&self) -> BigUint {
        self.0.fold(
            &|v| if *v { BigUint::one() } else { BigUint::zero() },
            &|a, b| a + b,
        )
    }

    /// Maximal intervals in order, refused beyond `limit`.
    pub fn intervals(&self, limit: usize) -> Result<Vec<DyadicInterval>> {
        Ok(self
            .0
            .pieces(limit.saturating_mul(2).saturating_add(1))?
            .into_iter()
            .filter_map(|(c, v)| v.then_some(c))
            .collect())
    }

    /// Deepest level of any boundary point.
    pub fn depth(&self) -> u32 {
        self.0.depth()
    }
}

impl fmt::Debug for DyadicSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.intervals(64) {
            Ok(v) => f.debug_set().entries(v.iter().map(|c| c.to_string())).finish(),
            Err(_) => write!(f, "DyadicSet(measure {}, depth {})", self.measure(), self.depth()),
        }
    }
}

/// Serialized as the list of maximal intervals.
impl Serialize for DyadicSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.intervals(usize::MAX / 4).map_err(serde::ser::Error::custom)?;
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DyadicSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<DyadicInterval>::deserialize(d)?;
        Ok(DyadicSet::from_intervals(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(l: u64, k: u32) -> DyadicInterval {
        DyadicInterval::new(l, k).unwrap()
    }

    fn q(p: i64, d: i64) -> Rational {
        Rational::new(p.into(), d.into())
    }

    #[test]
    fn union_merges_siblings() {
        let s = DyadicSet::interval(&iv(0, 1)).union(&DyadicSet::interval(&iv(1, 1)));
        assert_eq!(s.intervals(10).unwrap(), vec![iv(0, 0)]);
    }

    #[test]
    fn complement_of_quarter() {
        let s = DyadicSet::interval(&iv(1, 2)).complement();
        assert_eq!(s.intervals(10).unwrap(), vec![iv(0, 2), iv(1, 1)]);
    }

    #[test]
    fn measure_of_two_eighths() {
        let s = DyadicSet::from_intervals(&[iv(0, 3), iv(3, 3)]);
        assert_eq!(s.measure(), q(1, 4));
    }

    #[test]
    fn nested_inputs_collapse() {
        let s = DyadicSet::from_intervals(&[iv(0, 1), iv(1, 3), iv(3, 2)]);
        assert_eq!(s.intervals(10).unwrap(), vec![iv(0, 1), iv(3, 2)]);
        assert_eq!(s.measure(), q(3, 4));
    }

    #[test]
    fn json_round_trip() {
        let s = DyadicSet::from_intervals(&[iv(0, 3), iv(5, 4)]);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"[{"l":0,"K":3},{"l":5,"K":4}]"#);
        assert_eq!(serde_json::from_str::<DyadicSet>(&j).unwrap(), s);
    }

    fn arb_set() -> impl Strategy<Value = DyadicSet> {
        prop::collection::vec((0u32..5).prop_flat_map(|k| (0u64..(1u64 << k), Just(k))), 0..6)
            .prop_map(|v| {
                let cells: Vec<_> = v.into_iter().map(|(l, k)| iv(l, k)).collect();
                DyadicSet::from_intervals(&cells)
            })
    }

    proptest! {
        #[test]
        fn boolean_laws(a in arb_set(), b in arb_set(), c in arb_set()) {
            prop_assert_eq!(a.union(&b), b.union(&a));
            prop_assert_eq!(a.intersect(&b.union(&c)), a.intersect(&b).union(&a.intersect(&c)));
            prop_assert_eq!(a.union(&b).complement(), a.complement().intersect(&b.complement()));
            prop_assert_eq!(a.complement().complement(), a.clone());
            prop_assert!(a.intersect(&b).is_subset(&a));
        }

        #[test]
        fn measure_additive(a in arb_set(), b in arb_set()) {
            let d = b.difference(&a);
            prop_assert_eq!(a.union(&b).measure(), a.measure() + d.measure());
            prop_assert_eq!(a.measure() + a.complement().measure(), Rational::one());
        }

        #[test]
        fn maximal_form_has_no_mergeable_siblings(a in arb_set()) {
            let v = a.intervals(1000).unwrap();
            for w in v.windows(2) {
                let merged = w[0].level() == w[1].level()
                    && w[0].parent() == w[1].parent()
                    && w[0].parent().is_some();
                prop_assert!(!merged);
            }
        }
    }
}
