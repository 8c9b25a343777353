//! A fixed enumeration of all dyadic step functions on `[0, 1)` with nonzero rational values.
//!
//! A value `p/q` in lowest terms has weight `|p| + q`. Values are ordered by weight, then
//! by denominator, then positive before negative: `1, -1, 2, -2, 1/2, -1/2, 3, -3, 1/3, ...`.
//! A function given on the `2^L` cells of its canonical level `L` has height
//! `L + (largest value weight)`. Functions are listed by height; within a height they are
//! ordered lexicographically by their sequences of cell values in the value order, a
//! shorter sequence first when it is a prefix. Every function appears exactly once, so
//! every function appears at some finite index.

use num_bigint::BigInt;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::dyadic::StepFunction;
use crate::exact::{Rational, QS2};

/// Optional caps restricting the enumeration; the uncapped enumeration lists everything.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationParams {
    pub max_level: Option<u32>,
    pub max_weight: Option<u32>,
}

/// All values of weight `w`, in enumeration order.
pub fn values_of_weight(w: u32) -> Vec<Rational> {
    let mut out = Vec::new();
    for q in 1..w {
        let p = w - q;
        if p.gcd(&q) == 1 {
            let r = Rational::new(BigInt::from(p), BigInt::from(q));
            out.push(r.clone());
            out.push(-r);
        }
    }
    out
}

pub fn value_weight(v: &Rational) -> u64 {
    let p = v.numer().magnitude().clone();
    let q = v.denom().magnitude().clone();
    u64::try_from(p + q).unwrap_or(u64::MAX)
}

/// Cell-value sequences of one level and height, in lexicographic order.
#[derive(Clone, Debug)]
struct LevelStream {
    level: u32,
    top: u32,
    count: usize,
    digits: Option<Vec<usize>>,
}

impl LevelStream {
    /// Next sequence with a value of weight `top` that does not merge to a coarser level.
    fn next(&mut self, weights: &[u32]) -> Option<Vec<usize>> {
        loop {
            match &mut self.digits {
                None => self.digits = Some(vec![0; 1 << self.level]),
                Some(d) => {
                    let mut i = d.len();
                    loop {
                        if i == 0 {
                            return None;
                        }
                        i -= 1;
                        d[i] += 1;
                        if d[i] < self.count {
                            break;
                        }
                        d[i] = 0;
                    }
                }
            }
            let d = self.digits.as_ref().expect("started");
            let has_top = d.iter().any(|&i| weights[i] == self.top);
            let canonical = self.level == 0 || d.chunks(2).any(|c| c[0] != c[1]);
            if has_top && canonical {
                return Some(d.clone());
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepEnumeration {
    params: EnumerationParams,
    /// Values in order; `weights[i]` is the weight of `values[i]`.
    values: Vec<Rational>,
    weights: Vec<u32>,
    height: u32,
    /// One stream per allowed level of the current height, with its pending sequence.
    streams: Vec<(LevelStream, Option<Vec<usize>>)>,
    index: u64,
}

impl StepEnumeration {
    pub fn new(params: EnumerationParams) -> Self {
        StepEnumeration { params, values: Vec::new(), weights: Vec::new(), height: 1, streams: Vec::new(), index: 0 }
    }

    /// 1-based index of the next function.
    pub fn next_index(&self) -> u64 {
        self.index + 1
    }

    fn ensure_weight(&mut self, w: u32) {
        let mut have = self.weights.last().copied().unwrap_or(1);
        while have < w {
            have += 1;
            for v in values_of_weight(have) {
                self.values.push(v);
                self.weights.push(have);
            }
        }
    }

    fn exhausted(&self) -> bool {
        match (self.params.max_level, self.params.max_weight) {
            (Some(l), Some(d)) => self.height > l + d,
            _ => false,
        }
    }

    fn start_height(&mut self, h: u32) {
        self.height = h;
        self.ensure_weight(h);
        self.streams.clear();
        for level in 0..=h.saturating_sub(2) {
            let top = h - level;
            if top < 2
                || self.params.max_level.is_some_and(|l| level > l)
                || self.params.max_weight.is_some_and(|d| top > d)
            {
                continue;
            }
            let count = self.weights.partition_point(|&w| w <= top);
            let mut s = LevelStream { level, top, count, digits: None };
            let first = s.next(&self.weights);
            self.streams.push((s, first));
        }
    }
}

impl Iterator for StepEnumeration {
    type Item = StepFunction;

    fn next(&mut self) -> Option<StepFunction> {
        loop {
            let pick = self
                .streams
                .iter()
                .enumerate()
                .filter_map(|(i, (_, d))| d.as_ref().map(|d| (i, d)))
                .min_by(|a, b| a.1.cmp(b.1))
                .map(|(i, _)| i);
            let Some(i) = pick else {
                let next = self.height + 1;
                if (StepEnumeration { height: next, ..self.clone() }).exhausted() {
                    return None;
                }
                self.start_height(next);
                continue;
            };
            let (stream, pending) = &mut self.streams[i];
            let digits = pending.take().expect("picked a pending sequence");
            *pending = stream.next(&self.weights);
            let grid: Vec<QS2> = digits.iter().map(|&k| QS2::from(self.values[k].clone())).collect();
            self.index += 1;
            return Some(StepFunction::from_grid(&grid).expect("power-of-two grid"));
        }
    }
}

/// `f_m`, the `m`-th function (1-based) of the enumeration.
pub fn enumerate_steps(m: u64, params: EnumerationParams) -> Option<StepFunction> {
    StepEnumeration::new(params).nth(m.checked_sub(1)? as usize)
}

/// The first `count` functions.
pub fn first_steps(count: usize, params: EnumerationParams) -> Vec<StepFunction> {
    StepEnumeration::new(params).take(count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::DyadicSet;
    use crate::exact::parse_rational;
    use std::collections::HashSet;

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn value_order() {
        let w: Vec<Rational> = (2..=4).flat_map(values_of_weight).collect();
        let expected = ["1", "-1", "2", "-2", "1/2", "-1/2", "3", "-3", "1/3", "-1/3"];
        assert_eq!(w, expected.iter().map(|s| r(s)).collect::<Vec<_>>());
        assert_eq!(value_weight(&r("-3/4")), 7);
    }

    #[test]
    fn first_functions() {
        let f = first_steps(8, EnumerationParams::default());
        let c = |s: &str| StepFunction::constant(QS2::from(r(s)));
        assert_eq!(f[0], c("1"));
        assert_eq!(f[1], c("-1"));
        // height 3: (1, -1) < (-1, 1) < (2) < (-2) < ...
        let split = StepFunction::from_grid(&[QS2::one(), QS2::from_int(-1)]).unwrap();
        assert_eq!(f[2], split);
        assert_eq!(f[3], split.scale(&QS2::from_int(-1)));
        assert_eq!(&f[4..8], &[c("2"), c("-2"), c("1/2"), c("-1/2")]);
        assert_eq!(enumerate_steps(1, EnumerationParams::default()).unwrap(), c("1"));
        assert!(enumerate_steps(0, EnumerationParams::default()).is_none());
    }

    #[test]
    fn distinct_nonzero_and_covering() {
        let all = first_steps(3000, EnumerationParams::default());
        let mut seen = HashSet::new();
        for f in &all {
            assert!(f.level_set(&|v| v.is_zero()).is_empty());
            assert!(f.support() == DyadicSet::unit());
            assert!(seen.insert(format!("{f:?}")), "duplicate {f:?}");
        }
    }

    /// Independent count of the functions of height `h`.
    fn count_of_height(h: u32) -> usize {
        let mut total = 0;
        for level in 0..=h - 2 {
            let top = h - level;
            let all: usize = (2..=top).map(|w| values_of_weight(w).len()).sum();
            let below: usize = (2..top).map(|w| values_of_weight(w).len()).sum();
            let cells = 1u32 << level;
            let with_top = all.pow(cells) - below.pow(cells);
            // canonical: not constant on every sibling pair
            let merged = if level == 0 {
                0
            } else {
                all.pow(cells / 2) - below.pow(cells / 2)
            };
            total += with_top - merged;
        }
        total
    }

    #[test]
    fn height_counts_match_formula() {
        let expected: usize = (2..=5).map(count_of_height).sum();
        let capped = EnumerationParams { max_level: None, max_weight: None };
        let heights: Vec<StepFunction> = StepEnumeration::new(capped).take(expected + 1).collect();
        let last = heights.last().unwrap();
        // the first function of height 6: fifteen cells 1, then -1
        let mut grid = vec![QS2::one(); 16];
        grid[15] = QS2::from_int(-1);
        assert_eq!(last, &StepFunction::from_grid(&grid).unwrap());
    }

    #[test]
    fn caps_terminate() {
        let p = EnumerationParams { max_level: Some(1), max_weight: Some(3) };
        let all: Vec<_> = StepEnumeration::new(p).collect();
        // level 0: 6 constants; level 1: pairs of the 6 values minus the 6 constant pairs
        assert_eq!(all.len(), 6 + 36 - 6);
    }

    #[test]
    fn density_search() {
        let target = StepFunction::from_grid(&[QS2::from_int(3), QS2::from_int(-1)]).unwrap();
        let eta = QS2::from_ratio(1, 1000);
        let hit = StepEnumeration::new(EnumerationParams::default())
            .take(5000)
            .position(|f| target.sub(&f).l1() < eta);
        assert!(hit.is_some());
        let target = StepFunction::from_grid(&[QS2::from_ratio(1, 3), QS2::from_int(-2)]).unwrap();
        let hit = StepEnumeration::new(EnumerationParams::default())
            .take(200_000)
            .position(|f| target.sub(&f).abs().l1().is_zero());
        assert!(hit.is_some());
        assert!(target.l1().is_positive());
    }
}
