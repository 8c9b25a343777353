//! Walsh series stored as index blocks with one magnitude per block.
//!
//! A block covers the whole Paley group `[2^n, 2^(n+1))` (or the single index 0), carries
//! a base magnitude `b`, a sign rule, and optionally the tie-breaking perturbation
//! `a_k = b + 2^-(s+k)`. The base part of every block is a step function in closed form;
//! the perturbation part is only ever bounded, by `sum_{k in block} 2^-(s+k) <= 2^-(s+n)`.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::kernel::{block_l2_norm, upper_kernel};
use crate::dyadic::{DyadicInterval, IntegralCache, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{log2_lower_exponent, pow2, rational_str, DyadicRational, Rational, QS2};
use crate::flat::FlatPoly;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexBlock {
    /// The single index 0.
    Zero,
    /// `[2^n, 2^(n+1))`.
    Level(u32),
}

impl IndexBlock {
    pub fn start(&self) -> BigUint {
        match self {
            IndexBlock::Zero => BigUint::zero(),
            IndexBlock::Level(n) => BigUint::one() << *n,
        }
    }

    /// One past the last index.
    pub fn end(&self) -> BigUint {
        match self {
            IndexBlock::Zero => BigUint::one(),
            IndexBlock::Level(n) => BigUint::one() << (*n + 1),
        }
    }

    pub fn len(&self) -> BigUint {
        self.end() - self.start()
    }

    pub fn of_index(k: &BigUint) -> Self {
        if k.is_zero() {
            IndexBlock::Zero
        } else {
            IndexBlock::Level(k.bits() as u32 - 1)
        }
    }

    /// `sum_{k in block} W_k`.
    fn kernel(&self) -> StepFunction {
        match self {
            IndexBlock::Zero => StepFunction::constant(QS2::one()),
            IndexBlock::Level(n) => upper_kernel(*n),
        }
    }

    /// `(#block)^(1/2)`, so that `b` times it is the block's `L^2` norm.
    fn l2_factor(&self) -> QS2 {
        match self {
            IndexBlock::Zero => QS2::one(),
            IndexBlock::Level(n) => block_l2_norm(&QS2::one(), *n),
        }
    }

    /// Upper bound of `sum_{k in block} 2^-(s+k)`.
    fn perturbation_mass(&self, s: u64) -> Rational {
        match self {
            IndexBlock::Zero => pow2(-(s as i64)),
            IndexBlock::Level(n) => pow2(-((s + *n as u64) as i64)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SignPattern {
    Plus,
    /// Signs of a flat polynomial's coefficients, flipped when `negate`.
    Flat { atom: Arc<FlatPoly>, negate: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Leading coefficients of the universal function.
    Head,
    /// Constant positive coefficients between flat atoms.
    Filler,
    /// A flat polynomial.
    Atom,
    /// Constant positive coefficients linking a stage to earlier indices.
    Bridge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientBlock {
    pub range: IndexBlock,
    pub magnitude: QS2,
    pub signs: SignPattern,
    pub kind: BlockKind,
    pub perturbation: Option<u64>,
}

impl CoefficientBlock {
    pub fn plus(range: IndexBlock, magnitude: QS2, kind: BlockKind) -> Self {
        CoefficientBlock { range, magnitude, signs: SignPattern::Plus, kind, perturbation: None }
    }

    pub fn atom(atom: Arc<FlatPoly>, magnitude: QS2, negate: bool) -> Self {
        CoefficientBlock {
            range: IndexBlock::Level(atom.m),
            magnitude,
            signs: SignPattern::Flat { atom, negate },
            kind: BlockKind::Atom,
            perturbation: None,
        }
    }

    pub fn sign(&self, k: &BigUint) -> i8 {
        match &self.signs {
            SignPattern::Plus => 1,
            SignPattern::Flat { atom, negate } => {
                let s = atom.coefficient_sign(k).expect("index inside the atom's block");
                if *negate {
                    -s
                } else {
                    s
                }
            }
        }
    }

    /// `sum_{k in block} sign_k b W_k`.
    pub fn base_function(&self) -> StepFunction {
        match &self.signs {
            SignPattern::Plus => self.range.kernel().scale(&self.magnitude),
            SignPattern::Flat { atom, negate } => {
                let c = self.magnitude.checked_div(&atom.magnitude).expect("nonzero atom magnitude");
                atom.function(&if *negate { -c } else { c })
            }
        }
    }

    /// Right side of the Cauchy-Schwarz prefix majorant: `b (#block)^(1/2)`.
    pub fn majorant(&self) -> QS2 {
        &self.magnitude * &self.range.l2_factor()
    }

    pub fn perturbation_mass(&self) -> Rational {
        self.perturbation.map(|s| self.range.perturbation_mass(s)).unwrap_or_default()
    }

    /// Upper bound of the largest coefficient in the block.
    pub fn max_coefficient_bound(&self) -> (QS2, Rational) {
        (self.magnitude.clone(), self.perturbation_mass())
    }

    pub fn unsigned(&self) -> Self {
        CoefficientBlock { signs: SignPattern::Plus, ..self.clone() }
    }

    fn single_index(&self) -> bool {
        matches!(self.range, IndexBlock::Zero | IndexBlock::Level(0))
    }
}

/// `value + perturbation` bounds a quantity from above.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    pub value: QS2,
    #[serde(with = "rational_str")]
    pub perturbation: Rational,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Majorant,
}

impl Bound {
    pub fn exact(value: QS2) -> Self {
        Bound { value, perturbation: Rational::zero(), method: Method::Exact }
    }

    pub fn total(&self) -> QS2 {
        &self.value + &QS2::from(self.perturbation.clone())
    }

    /// `claim - total`, positive when the bound certifies `< claim`.
    pub fn slack(&self, claim: &QS2) -> QS2 {
        claim - &self.total()
    }

    pub fn is_below(&self, claim: &QS2) -> bool {
        self.slack(claim).is_positive()
    }

    pub fn add(&self, other: &Bound) -> Bound {
        Bound {
            value: &self.value + &other.value,
            perturbation: &self.perturbation + &other.perturbation,
            method: if self.method == Method::Exact && other.method == Method::Exact {
                Method::Exact
            } else {
                Method::Majorant
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrefixNorms {
    /// Bound of `max_M ∫|sum_{k <= M} ...| w` over all prefix cuts.
    pub bound: Bound,
    /// Exact maximum over cuts at block ends, without the perturbation part.
    pub block_end_max: QS2,
    /// Block whose cut attains the bound.
    pub worst_block: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonotoneCheck {
    pub pass: bool,
    pub strict: bool,
    pub block_pairs_checked: usize,
    pub violation: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WalshSeries {
    blocks: Vec<CoefficientBlock>,
}

impl WalshSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, block: CoefficientBlock) -> Result<()> {
        if let Some(last) = self.blocks.last() {
            if block.range <= last.range {
                return Err(Error::Invalid(format!(
                    "block {:?} does not follow {:?}",
                    block.range, last.range
                )));
            }
        }
        if block.magnitude.is_negative() {
            return Err(Error::Invalid("negative block magnitude".into()));
        }
        self.blocks.push(block);
        Ok(())
    }

    pub fn append(&mut self, other: &WalshSeries) -> Result<()> {
        for b in &other.blocks {
            self.push(b.clone())?;
        }
        Ok(())
    }

    pub fn blocks(&self) -> &[CoefficientBlock] {
        &self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn start(&self) -> Option<BigUint> {
        self.blocks.first().map(|b| b.range.start())
    }

    pub fn end(&self) -> Option<BigUint> {
        self.blocks.last().map(|b| b.range.end())
    }

    /// Top Paley level touched, i.e. `end = 2^(top+1)`.
    pub fn top_level(&self) -> Option<u32> {
        self.blocks.last().map(|b| match b.range {
            IndexBlock::Zero => 0,
            IndexBlock::Level(n) => n,
        })
    }

    /// Set the perturbation exponent on every block.
    pub fn perturbed(&self, s: u64) -> Self {
        WalshSeries {
            blocks: self.blocks.iter().map(|b| CoefficientBlock { perturbation: Some(s), ..b.clone() }).collect(),
        }
    }

    /// The same magnitudes with every sign `+1`.
    pub fn unsigned(&self) -> Self {
        WalshSeries { blocks: self.blocks.iter().map(|b| b.unsigned()).collect() }
    }

    pub fn block_of(&self, k: &BigUint) -> Option<&CoefficientBlock> {
        let r = IndexBlock::of_index(k);
        self.blocks.binary_search_by(|b| b.range.cmp(&r)).ok().map(|i| &self.blocks[i])
    }

    /// `(sign, base magnitude, perturbation exponent)` of coefficient `k`.
    pub fn coefficient(&self, k: &BigUint) -> Option<(i8, QS2, Option<u64>)> {
        self.block_of(k).map(|b| (b.sign(k), b.magnitude.clone(), b.perturbation))
    }

    /// The signed coefficient including its perturbation, for indices small enough to
    /// write `2^-(s+k)` out.
    pub fn exact_coefficient(&self, k: u64) -> Option<QS2> {
        let kb = BigUint::from(k);
        let (sign, base, s) = self.coefficient(&kb)?;
        let mag = match s {
            Some(s) => &base + &QS2::from(pow2(-((s + k) as i64))),
            None => base,
        };
        Some(if sign < 0 { -mag } else { mag })
    }

    /// Sum of the base parts of blocks `[0, end)`.
    pub fn partial_base_sum(&self, end: usize) -> StepFunction {
        self.blocks[..end].iter().fold(StepFunction::zero(), |acc, b| acc.add(&b.base_function()))
    }

    pub fn base_sum(&self) -> StepFunction {
        self.partial_base_sum(self.blocks.len())
    }

    pub fn perturbation_mass(&self) -> Rational {
        self.blocks.iter().map(|b| b.perturbation_mass()).sum()
    }

    /// `sum_k a_k`-style bound of `∫|sum|`: the base sum's exact norm plus perturbation mass.
    pub fn l1_bound(&self) -> Bound {
        Bound {
            value: self.base_sum().l1(),
            perturbation: self.perturbation_mass(),
            method: Method::Exact,
        }
    }

    /// Upper bound of the largest coefficient, i.e. the first block's.
    pub fn max_coefficient(&self) -> Option<Bound> {
        self.blocks.first().map(|b| {
            let (value, perturbation) = b.max_coefficient_bound();
            Bound { value, perturbation, method: Method::Exact }
        })
    }

    /// Certified bound of `max_M ∫ |sum_{start <= k <= M} c_k W_k| w` over every cut `M`.
    /// Cuts at block ends are exact; cuts inside a block add the block majorant to the
    /// exact norm of the preceding blocks (`w <= 1` is required for the majorant step).
    pub fn prefix_norms(&self, weight: Option<&StepFunction>, cache: &mut IntegralCache) -> PrefixNorms {
        let mut sum = StepFunction::zero();
        let mut best = QS2::zero();
        let mut best_method = Method::Exact;
        let mut block_end_max = QS2::zero();
        let mut worst = 0;
        let mut previous = QS2::zero();
        for (i, b) in self.blocks.iter().enumerate() {
            if !b.single_index() {
                let inner = &previous + &b.majorant();
                if inner > best {
                    best = inner;
                    best_method = Method::Majorant;
                    worst = i;
                }
            }
            sum = sum.add(&b.base_function());
            previous = cache.abs_integral(&sum, weight);
            if previous > block_end_max {
                block_end_max = previous.clone();
            }
            if previous > best {
                best = previous.clone();
                best_method = Method::Exact;
                worst = i;
            }
        }
        PrefixNorms {
            bound: Bound { value: best, perturbation: self.perturbation_mass(), method: best_method },
            block_end_max,
            worst_block: worst,
        }
    }

    /// Structural proof that `a_k` is non-increasing (or strictly decreasing) and positive
    /// across the whole index range.
    pub fn check_decreasing(&self, strict: bool) -> MonotoneCheck {
        let fail = |pairs, msg: String| MonotoneCheck { pass: false, strict, block_pairs_checked: pairs, violation: Some(msg) };
        for (i, b) in self.blocks.iter().enumerate() {
            if !b.magnitude.is_positive() && b.perturbation.is_none() {
                return fail(i, format!("block {i} has a zero coefficient"));
            }
            if strict && !b.single_index() && b.perturbation.is_none() {
                return fail(i, format!("block {i} is constant over several indices"));
            }
        }
        for (i, w) in self.blocks.windows(2).enumerate() {
            let (p, n) = (&w[0], &w[1]);
            let last = p.range.end() - 1u32;
            let first = n.range.start();
            if let Err(msg) = certify_step(p, &last, n, &first, strict) {
                return fail(i, format!("blocks {i}/{}: {msg}", i + 1));
            }
        }
        MonotoneCheck {
            pass: true,
            strict,
            block_pairs_checked: self.blocks.len().saturating_sub(1),
            violation: None,
        }
    }

    /// Exact coefficients of the whole range when it ends below `limit`.
    pub fn dense_coefficients(&self, limit: u64) -> Option<Vec<(u64, QS2)>> {
        let end = self.end()?.to_u64().filter(|e| *e <= limit)?;
        let start = self.start()?.to_u64()?;
        Some(
            (start..end)
                .filter_map(|k| self.exact_coefficient(k).map(|c| (k, c)))
                .collect(),
        )
    }

    /// Evaluate the base sum at a point, summing block functions one by one.
    pub fn eval_base(&self, x: &DyadicRational) -> QS2 {
        self.blocks.iter().map(|b| b.base_function().eval(x).clone()).sum()
    }

    /// Blocks whose base functions vanish off `cell`.
    pub fn supported_in(&self, cell: &DyadicInterval) -> bool {
        self.blocks.iter().all(|b| match &b.signs {
            SignPattern::Flat { atom, .. } => cell.contains_interval(&atom.delta),
            SignPattern::Plus => false,
        })
    }

    pub fn to_records(&self) -> Vec<BlockRecord> {
        self.blocks.iter().map(BlockRecord::from).collect()
    }

    pub fn from_records(records: &[BlockRecord]) -> Result<Self> {
        let mut s = WalshSeries::new();
        for r in records {
            s.push(r.to_block()?)?;
        }
        Ok(s)
    }
}

/// `last(p) > first(n)` (or `>=`), where `last(p) = b_p + 2^-(s_p + k_last)` and
/// `first(n) = b_n + 2^-(s_n + k_first)`, without writing out the powers.
fn certify_step(
    p: &CoefficientBlock,
    k_last: &BigUint,
    n: &CoefficientBlock,
    k_first: &BigUint,
    strict: bool,
) -> std::result::Result<(), String> {
    let exp = |s: Option<u64>, k: &BigUint| s.map(|s| k + BigUint::from(s));
    let ep = exp(p.perturbation, k_last);
    let en = exp(n.perturbation, k_first);
    let diff = &p.magnitude - &n.magnitude;
    if diff.is_negative() {
        return Err(format!("base magnitude rises from {} to {}", p.magnitude, n.magnitude));
    }
    if diff.is_zero() {
        return match (ep, en) {
            (_, None) if !strict => Ok(()),
            (Some(_), None) => Ok(()),
            (None, None) => Err("equal constant coefficients".into()),
            (None, Some(_)) => Err("perturbation raises the next coefficient".into()),
            (Some(a), Some(b)) if a < b || (!strict && a == b) => Ok(()),
            (Some(_), Some(_)) => Err("perturbation order breaks the decrease".into()),
        };
    }
    // diff > 0: enough that 2^-(en) < diff
    let Some(en) = en else { return Ok(()) };
    let r = diff.rational_lower_bound().expect("positive");
    let e = log2_lower_exponent(&r);
    if en > BigUint::from(e) {
        Ok(())
    } else {
        let en = en.to_u64().ok_or("exponent overflow")?;
        if QS2::from(pow2(-(en as i64))) < diff {
            Ok(())
        } else {
            Err("perturbation exceeds the gap between blocks".into())
        }
    }
}

/// Serialized form of one block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub range: IndexBlock,
    pub magnitude: QS2,
    pub kind: BlockKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub atom: Option<AtomRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub perturbation: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub delta: DyadicInterval,
    pub negate: bool,
}

impl From<&CoefficientBlock> for BlockRecord {
    fn from(b: &CoefficientBlock) -> Self {
        BlockRecord {
            range: b.range,
            magnitude: b.magnitude.clone(),
            kind: b.kind,
            atom: match &b.signs {
                SignPattern::Plus => None,
                SignPattern::Flat { atom, negate } => {
                    Some(AtomRecord { delta: atom.delta.clone(), negate: *negate })
                }
            },
            perturbation: b.perturbation,
        }
    }
}

impl BlockRecord {
    pub fn to_block(&self) -> Result<CoefficientBlock> {
        let signs = match (&self.atom, self.range) {
            (None, _) => SignPattern::Plus,
            (Some(a), IndexBlock::Level(m)) => SignPattern::Flat {
                atom: Arc::new(FlatPoly::new(a.delta.clone(), m)?),
                negate: a.negate,
            },
            (Some(_), IndexBlock::Zero) => {
                return Err(Error::Invalid("flat signs on the zero block".into()))
            }
        };
        Ok(CoefficientBlock {
            range: self.range,
            magnitude: self.magnitude.clone(),
            signs,
            kind: self.kind,
            perturbation: self.perturbation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::DyadicSet;
    use crate::walsh::walsh_eval_u64;

    fn iv(l: u64, k: u32) -> DyadicInterval {
        DyadicInterval::new(l, k).unwrap()
    }

    fn filler(n: u32, b: QS2) -> CoefficientBlock {
        CoefficientBlock::plus(IndexBlock::Level(n), b, BlockKind::Filler)
    }

    /// A small cascade-shaped series: fillers, one atom, more fillers.
    fn sample() -> WalshSeries {
        let atom = Arc::new(FlatPoly::new(iv(1, 2), 4).unwrap());
        let mut s = WalshSeries::new();
        s.push(filler(1, QS2::from_ratio(1, 2))).unwrap();
        s.push(filler(2, QS2::from_ratio(1, 2))).unwrap();
        s.push(filler(3, atom.magnitude.scale(&Rational::new(3.into(), 1.into())))).unwrap();
        s.push(CoefficientBlock::atom(atom.clone(), atom.magnitude.scale(&Rational::new(3.into(), 1.into())), true)).unwrap();
        s.push(filler(5, QS2::from_ratio(1, 64))).unwrap();
        s
    }

    /// Dense oracle: grid of every prefix sum, computed from Walsh values directly.
    fn dense_prefix_max(s: &WalshSeries) -> QS2 {
        let j = s.top_level().unwrap() + 1;
        let mut grid = vec![QS2::zero(); 1 << j];
        let mut best = QS2::zero();
        for (k, c) in s.dense_coefficients(1 << 12).unwrap() {
            for (g, v) in grid.iter_mut().enumerate() {
                let w = walsh_eval_u64(k, &DyadicRational::from_u64(g as u64, j));
                if w > 0 {
                    *v += &c;
                } else {
                    *v -= &c;
                }
            }
            let l1: QS2 = grid.iter().map(|v| v.abs()).sum::<QS2>().scale_pow2(-(j as i64));
            best = best.max(l1);
        }
        best
    }

    #[test]
    fn base_sum_matches_coefficients() {
        let s = sample();
        let grid = s.base_sum().grid(6, 22).unwrap();
        let c = crate::walsh::fwht(&grid, 22).unwrap().coefficients;
        for (k, v) in c.iter().enumerate() {
            let expect = s.exact_coefficient(k as u64).unwrap_or_else(QS2::zero);
            assert_eq!(v, &expect, "k={k}");
        }
    }

    #[test]
    fn prefix_bound_dominates_dense_maximum() {
        let s = sample();
        let mut cache = IntegralCache::new();
        let p = s.prefix_norms(None, &mut cache);
        let dense = dense_prefix_max(&s);
        assert!(p.bound.total() >= dense);
        assert!(p.block_end_max <= dense);
        let u = s.unsigned();
        let pu = u.prefix_norms(None, &mut cache);
        assert!(pu.bound.total() >= dense_prefix_max(&u));
    }

    #[test]
    fn monotone_checks() {
        let s = sample();
        assert!(s.check_decreasing(false).pass);
        assert!(!s.check_decreasing(true).pass);
        let p = s.perturbed(3);
        let c = p.check_decreasing(true);
        assert!(c.pass, "{c:?}");
        let dense = p.dense_coefficients(1 << 12).unwrap();
        for w in dense.windows(2) {
            assert!(w[1].1.abs() < w[0].1.abs());
        }
        let mut bad = WalshSeries::new();
        bad.push(filler(1, QS2::from_ratio(1, 8))).unwrap();
        bad.push(filler(2, QS2::from_ratio(1, 4))).unwrap();
        assert!(!bad.check_decreasing(false).pass);
    }

    #[test]
    fn certified_gap_against_huge_indices() {
        // gap 2^-10 against a perturbation at k = 2^300: certified without materializing
        let mut s = WalshSeries::new();
        s.push(filler(299, QS2::from_ratio(1, 512))).unwrap();
        s.push(filler(300, QS2::from_ratio(1, 1024))).unwrap();
        assert!(s.perturbed(1).check_decreasing(true).pass);
    }

    #[test]
    fn perturbation_mass_bounds_tail() {
        let s = sample().perturbed(2);
        let exact: Rational = (2u64..64).map(|k| pow2(-(2 + k as i64))).sum();
        assert!(s.perturbation_mass() >= exact);
    }

    #[test]
    fn weighted_prefix_not_above_plain() {
        let s = sample();
        let w = StepFunction::from_triples(&[(0, 1, QS2::one()), (1, 1, QS2::from_ratio(1, 8))]).unwrap();
        let mut cache = IntegralCache::new();
        let a = s.prefix_norms(Some(&w), &mut cache);
        let b = s.prefix_norms(None, &mut cache);
        assert!(a.bound.total() <= b.bound.total());
        assert_eq!(s.base_sum().integrate(&DyadicSet::unit(), Some(&w)) <= a.block_end_max, true);
    }

    #[test]
    fn record_round_trip() {
        let s = sample().perturbed(4);
        let json = serde_json::to_string(&s.to_records()).unwrap();
        let back: Vec<BlockRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(WalshSeries::from_records(&back).unwrap(), s);
    }
}
