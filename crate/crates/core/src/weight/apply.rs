//! Approximating a step function in the weighted norm with a prepared stage and a bridge.
//!
//! For `n0`, `ε` and `f`, pick the first stage `m0 > max(ñ, log2(8/ε))` that starts above
//! level `n0` and whose `f_m0` is within `ε/4` of `f` in `L^1`. The indices between `2^n0`
//! and the stage get the constant coefficient `b + 2^-(k+m0)` with `b` the stage's leading
//! base coefficient, all with sign `+1`.

use num_bigint::BigUint;
use serde::Serialize;

use super::build::WeightFunction;
use crate::dyadic::{DyadicSet, IntegralCache, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{pow2, Rational, QS2};
use crate::report::{Check, Mode, VerificationReport};
use crate::walsh::series::{BlockKind, Bound, CoefficientBlock, IndexBlock, Method, SignPattern, WalshSeries};

#[derive(Clone, Debug)]
pub struct WeightedPair {
    pub n0: u32,
    pub epsilon: Rational,
    pub f: StepFunction,
    pub m0: u32,
    pub mode: Mode,
    /// Bridge blocks followed by the stage's blocks.
    pub h: WalshSeries,
    pub p: WalshSeries,
    pub bridge_blocks: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageChoice {
    pub m0: u32,
    pub distance: QS2,
}

/// First stage satisfying the selection rules, or the reason none does.
pub fn select_stage(w: &WeightFunction, n0: u32, epsilon: &Rational, f: &StepFunction) -> Result<StageChoice> {
    let quarter = QS2::from(epsilon / Rational::from_integer(4.into()));
    let eight = Rational::from_integer(8.into());
    let mut closest: Option<(u32, QS2)> = None;
    for s in &w.stages {
        if s.m <= w.n_tilde || pow2(s.m as i64) * epsilon <= eight || s.start_level <= n0 {
            continue;
        }
        let d = f.sub(&s.f).l1();
        if d < quarter {
            return Ok(StageChoice { m0: s.m, distance: d });
        }
        if closest.as_ref().is_none_or(|(_, c)| d < *c) {
            closest = Some((s.m, d));
        }
    }
    Err(Error::SearchExhausted(match closest {
        Some((m, d)) => format!("no stage within ε/4 of f; closest is stage {m} at L1 distance {}", d.to_decimal(12)),
        None => format!("no stage past ñ = {} and log2(8/ε) starting above level {n0}", w.n_tilde),
    }))
}

pub fn weighted_build(n0: u32, epsilon: &Rational, f: &StepFunction, w: &WeightFunction) -> Result<WeightedPair> {
    if !(epsilon > &Rational::from_integer(0.into()) && epsilon < &Rational::from_integer(1.into())) {
        return Err(Error::Precondition("need 0 < ε < 1".into()));
    }
    let choice = select_stage(w, n0, epsilon, f)?;
    let stage = w.stage(choice.m0).expect("selected stage exists");
    let lead = stage.h.blocks().first().ok_or_else(|| Error::Invalid("empty stage".into()))?;
    let mut h = WalshSeries::new();
    for n in n0..stage.start_level {
        let mut b = CoefficientBlock::plus(IndexBlock::Level(n), lead.magnitude.clone(), BlockKind::Bridge);
        b.perturbation = Some(choice.m0 as u64);
        h.push(b)?;
    }
    let bridge_blocks = h.blocks().len();
    h.append(&stage.h)?;
    Ok(WeightedPair {
        n0,
        epsilon: epsilon.clone(),
        f: f.clone(),
        m0: choice.m0,
        mode: stage.mode,
        p: h.unsigned(),
        h,
        bridge_blocks,
    })
}

pub fn verify_weighted_pair(pair: &WeightedPair, w: &WeightFunction) -> VerificationReport {
    let mode = pair.mode;
    let paper = mode == Mode::Paper;
    let eps = QS2::from(pair.epsilon.clone());
    let stage = w.stage(pair.m0).expect("stage of the pair");
    let mut checks = Vec::new();

    // selection rules
    let m0 = pair.m0;
    let rules = m0 > w.n_tilde
        && pow2(m0 as i64) * &pair.epsilon > Rational::from_integer(8.into())
        && stage.start_level > pair.n0;
    checks.push(Check::flag("stage_selection", rules, mode, true, Some(format!("m0 = {m0}"))));
    let dist = pair.f.sub(&stage.f).l1();
    checks.push(Check::below(
        "stage_function_distance",
        &Bound::exact(dist.clone()),
        &QS2::from(&pair.epsilon / Rational::from_integer(4.into())),
        mode,
        true,
    ));

    // layout: bridge +1, then the stage
    let bridge = &pair.h.blocks()[..pair.bridge_blocks];
    let layout = pair.h.start() == Some(BigUint::from(1u32) << pair.n0)
        && bridge.iter().all(|b| b.kind == BlockKind::Bridge && b.signs == SignPattern::Plus)
        && pair.h.blocks()[pair.bridge_blocks..] == *stage.h.blocks();
    checks.push(Check::flag("bridge_layout", layout, mode, true, None));

    // statement 1
    let mono = pair.h.check_decreasing(true);
    checks.push(Check::flag("statement1_strict_decrease", mono.pass, mode, true, mono.violation));
    if let Some(top) = pair.h.max_coefficient() {
        checks.push(Check::below("statement1_below_eps", &top, &eps, mode, paper));
    }

    // statement 2 and its chain
    let unit = DyadicSet::unit();
    let base = pair.h.base_sum();
    let s2 = Bound {
        value: pair.f.sub(&base).abs().integrate(&unit, Some(&w.mu)),
        perturbation: pair.h.perturbation_mass(),
        method: Method::Exact,
    };
    checks.push(Check::below("statement2", &s2, &eps, mode, paper));
    let stage_err = stage.f.sub(&stage.h.base_sum()).abs().integrate(&unit, Some(&w.mu));
    let bridge_mass = bridge.iter().fold(StepFunction::zero(), |acc, b| acc.add(&b.base_function())).l1();
    let chain = &(&dist + &stage_err) + &bridge_mass;
    checks.push(Check::flag(
        "statement2_chain",
        s2.value <= chain,
        mode,
        true,
        Some(format!("exact {} <= chain {}", s2.value.to_decimal(12), chain.to_decimal(12))),
    ));

    // statement 3
    let mut cache = IntegralCache::new();
    let s3 = pair.h.prefix_norms(Some(&w.mu), &mut cache).bound;
    let claim3 = &pair.f.abs().integrate(&unit, Some(&w.mu)) + &eps;
    checks.push(Check::below("statement3_weighted_prefix", &s3, &claim3, mode, paper));

    // statement 4
    let s4 = pair.p.prefix_norms(None, &mut cache).bound;
    checks.push(Check::below("statement4_prefix", &s4, &eps, mode, paper));
    VerificationReport::new("lemma4", mode, checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;
    use crate::weight::{build_weight, WeightOptions};

    fn weight() -> WeightFunction {
        build_weight(&parse_rational("1/4").unwrap(), &WeightOptions::default()).unwrap()
    }

    #[test]
    fn own_stage_function_is_selected() {
        let w = weight();
        let eps = parse_rational("3/4").unwrap();
        // stages past ñ = 3 with 2^m ε > 8: m >= 4
        let f = w.stage(5).unwrap().f.clone();
        let pair = weighted_build(1, &eps, &f, &w).unwrap();
        assert_eq!(pair.m0, 5);
        assert_eq!(pair.bridge_blocks as u32, w.stage(5).unwrap().start_level - 1);
        let rep = verify_weighted_pair(&pair, &w);
        assert!(rep.pass, "{:#?}", rep.failures());
        assert_eq!(rep.check("statement2_chain").unwrap().pass, true);
        let top = pair.h.exact_coefficient(2).unwrap();
        let lead = &w.stage(5).unwrap().h.blocks()[0].magnitude;
        assert_eq!(top, lead + &QS2::from(pow2(-(2 + 5))));
    }

    #[test]
    fn far_target_reports_closest() {
        let w = weight();
        let f = StepFunction::constant(QS2::from_int(100));
        let err = weighted_build(1, &parse_rational("1/2").unwrap(), &f, &w).unwrap_err();
        assert!(matches!(err, Error::SearchExhausted(_)));
    }
}
