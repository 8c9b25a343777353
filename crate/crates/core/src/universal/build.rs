//! The universal function: a head block followed by every prepared stage.

use num_bigint::BigUint;
use num_traits::One;

use crate::dyadic::{IntegralCache, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{pow2, Rational, QS2};
use crate::report::{Check, Mode, VerificationReport};
use crate::walsh::series::{BlockKind, Bound, CoefficientBlock, IndexBlock, Method, SignPattern, WalshSeries};
use crate::weight::{build_weight, WeightFunction, WeightOptions};

#[derive(Clone, Debug)]
pub struct UniversalFunction {
    pub weight: WeightFunction,
    /// Indices `[0, 2^N0)` with `a_k = b + 2^-(k+1)`, `b` the first stage's leading base coefficient.
    pub head: WalshSeries,
    /// Head blocks, then each stage's blocks with the stage's signs.
    pub signed: WalshSeries,
    /// `stage_blocks[m - 1]` is the block range of stage `m` inside `signed`.
    pub stage_blocks: Vec<std::ops::Range<usize>>,
}

impl UniversalFunction {
    pub fn from_weight(weight: WeightFunction) -> Result<Self> {
        let first = weight.stages.first().ok_or_else(|| Error::Precondition("no stages".into()))?;
        let lead = first.h.blocks().first().ok_or_else(|| Error::Invalid("empty first stage".into()))?;
        let mut head = WalshSeries::new();
        let mut ranges = vec![IndexBlock::Zero];
        ranges.extend((0..first.start_level).map(IndexBlock::Level));
        for (k, r) in ranges.into_iter().enumerate() {
            // single indices carry b + 2^-(k+1) exactly
            let b = if k < 2 {
                let a = &lead.magnitude + &QS2::from(pow2(-(k as i64) - 1));
                CoefficientBlock::plus(r, a, BlockKind::Head)
            } else {
                let mut b = CoefficientBlock::plus(r, lead.magnitude.clone(), BlockKind::Head);
                b.perturbation = Some(1);
                b
            };
            head.push(b)?;
        }
        let mut signed = head.clone();
        let mut stage_blocks = Vec::with_capacity(weight.stages.len());
        for s in &weight.stages {
            let start = signed.blocks().len();
            signed.append(&s.h)?;
            stage_blocks.push(start..signed.blocks().len());
        }
        Ok(UniversalFunction { weight, head, signed, stage_blocks })
    }

    /// `g = Σ a_k W_k`, every sign `+1`.
    pub fn coefficients(&self) -> WalshSeries {
        self.signed.unsigned()
    }

    pub fn stage_count(&self) -> u32 {
        self.stage_blocks.len() as u32
    }

    /// Index level `N_m` where stage `m` ends; `N_0` is where the head ends.
    pub fn end_level(&self, m: u32) -> u32 {
        if m == 0 {
            self.weight.stages[0].start_level
        } else {
            self.weight.stages[m as usize - 1].end_level
        }
    }

    /// `a_k` with its sign under the stage signs, for `k` in range.
    pub fn coefficient(&self, k: &BigUint) -> Option<(i8, QS2, Option<u64>)> {
        self.signed.coefficient(k)
    }

    pub fn mode(&self) -> Mode {
        self.weight.mode()
    }

    /// `P_m` without signs.
    pub fn stage_p(&self, m: u32) -> WalshSeries {
        self.weight.stages[m as usize - 1].h.unsigned()
    }
}

pub fn build_universal(delta: &Rational, opts: &WeightOptions) -> Result<UniversalFunction> {
    UniversalFunction::from_weight(build_weight(delta, opts)?)
}

pub fn verify_universal(g: &UniversalFunction) -> VerificationReport {
    let mode = g.mode();
    let mut checks = Vec::new();
    let coeffs = g.coefficients();

    let mono = coeffs.check_decreasing(true);
    checks.push(Check::flag("strictly_decreasing", mono.pass, mode, true, mono.violation));
    let head_ok = g.head.blocks().iter().all(|b| b.kind == BlockKind::Head && b.signs == SignPattern::Plus)
        && g.signed.blocks()[..g.head.blocks().len()] == *g.head.blocks();
    checks.push(Check::flag("head_block", head_ok, mode, true, None));
    let magnitudes = g.signed.blocks().iter().zip(coeffs.blocks()).all(|(a, b)| a.magnitude == b.magnitude && a.range == b.range);
    checks.push(Check::flag("signed_and_unsigned_share_magnitudes", magnitudes, mode, true, None));

    let mut cache = IntegralCache::new();
    let mut total = g.head.l1_bound();
    let mut claim = &total.total() + &QS2::from(Rational::one() / Rational::from_integer(4.into()));
    claim = &claim - &QS2::from(pow2(-(g.stage_count() as i64) - 2));
    let mut tails = Vec::with_capacity(g.stage_blocks.len());
    for s in &g.weight.stages {
        let m = s.m;
        let paper = s.mode == Mode::Paper;
        let p = s.h.unsigned();
        if let Some(top) = p.max_coefficient() {
            checks.push(Check::below(&format!("stage_{m}_below_2^-m"), &top, &QS2::from(pow2(-(m as i64))), s.mode, true));
        }
        let pre = p.prefix_norms(None, &mut cache).bound;
        checks.push(Check::below(&format!("stage_{m}_plain_prefix"), &pre, &QS2::from(pow2(-(m as i64) - 2)), s.mode, paper));
        let l1 = p.l1_bound();
        tails.push(l1.clone());
        total = total.add(&l1);
    }
    // Σ_m ∫|P_m| against Σ_m 2^-(m+2) plus the head
    let fine = g.weight.stages.iter().all(|s| s.mode == Mode::Paper);
    checks.push(
        Check::below("l1_mass", &total, &claim, mode, fine)
            .with_detail(format!("{} stages, total {}", g.stage_count(), total.total().to_decimal(12))),
    );
    let mut tail = Bound { value: QS2::zero(), perturbation: Rational::from_integer(0.into()), method: Method::Exact };
    let mut tail_ok = true;
    let mut last: Option<QS2> = None;
    for b in tails.iter().rev() {
        tail = tail.add(b);
        if let Some(l) = &last {
            tail_ok &= tail.total() > *l;
        }
        last = Some(tail.total());
    }
    checks.push(Check::flag("tail_mass_monotone", tail_ok, mode, true, None));
    let zero_sign_free = g.signed.blocks().iter().all(|b| b.magnitude.is_positive() || b.perturbation.is_some());
    checks.push(Check::flag("coefficients_positive", zero_sign_free, mode, true, None));
    VerificationReport::new("universal", mode, checks)
}

/// Base sum of blocks `range` of a series.
pub(crate) fn block_sum(s: &WalshSeries, range: std::ops::Range<usize>) -> StepFunction {
    s.blocks()[range].iter().fold(StepFunction::zero(), |acc, b| acc.add(&b.base_function()))
}

pub(crate) fn block_perturbation(s: &WalshSeries, range: std::ops::Range<usize>) -> Rational {
    s.blocks()[range].iter().map(|b| b.perturbation_mass()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;

    #[test]
    fn head_rule_and_monotone_sequence() {
        let g = build_universal(&parse_rational("1/4").unwrap(), &WeightOptions { m_max: 4, ..Default::default() }).unwrap();
        let lead = g.weight.stages[0].h.blocks()[0].magnitude.clone();
        for k in 0..2u64 {
            assert_eq!(g.signed.exact_coefficient(k).unwrap(), &lead + &QS2::from(pow2(-(k as i64) - 1)));
        }
        let a1 = g.signed.exact_coefficient(1).unwrap();
        let a2 = g.signed.exact_coefficient(2).unwrap().abs();
        assert!(a1 > a2);
        let rep = verify_universal(&g);
        assert!(rep.pass, "{:#?}", rep.failures());
        assert_eq!(g.end_level(0), 1);
    }
}
