//! Chained cascades approximating a step function piece by piece.
//!
//! The pieces are refined to one common level small enough that `3|γ_j||Δ_j| < ε/8`. Piece
//! `j` gets its own cascade starting where the previous one ended, with tolerance
//! `min(ε/(8ν0²), ε/2^(j+1))` and every coefficient below the previous cascade's last one.
//! Adding `2^-(N0+k)` to every coefficient then makes the sequence strictly decreasing.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::build::{build_cascade, CascadePair};
use super::schedule::{choose_schedule, LevelPolicy, ScheduleRequest, DEFAULT_CELL_LIMIT, DEFAULT_INDEX_BIT_CAP};
use super::verify::{verify_cascade, VerifyOptions};
use crate::dyadic::{DyadicInterval, DyadicSet, IntegralCache, Piece, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{format_rational, log2_lower_exponent, pow2, Rational, QS2};
use crate::report::{Check, Mode, VerificationReport};
use crate::walsh::series::{Bound, Method, WalshSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadePolicy {
    Paper,
    Toy,
}

#[derive(Clone, Debug)]
pub struct StepApproxRequest {
    pub f: StepFunction,
    pub epsilon: Rational,
    pub n0: u32,
    /// Stages per piece; `None` takes the smallest `q > log2(1/ε)`.
    pub q: Option<u32>,
    pub policy: CascadePolicy,
    pub magnitude_cap: Option<QS2>,
    pub index_bit_cap: u32,
    pub cell_limit: usize,
    pub piece_limit: usize,
    /// Refine the pieces to the common level of `refinement_level`; otherwise use the
    /// maximal pieces of `f` (toy runs only).
    pub refine: bool,
}

impl StepApproxRequest {
    pub fn new(f: StepFunction, epsilon: Rational, n0: u32, policy: CascadePolicy) -> Self {
        StepApproxRequest {
            f,
            epsilon,
            n0,
            q: None,
            policy,
            magnitude_cap: None,
            index_bit_cap: DEFAULT_INDEX_BIT_CAP,
            cell_limit: DEFAULT_CELL_LIMIT,
            piece_limit: 1 << 12,
            refine: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepApprox {
    pub f: StepFunction,
    pub epsilon: Rational,
    pub n0: u32,
    pub q: u32,
    pub mode: Mode,
    /// The refined pieces `γ_j χ_(Δ_j)`, in index order.
    pub pieces: Vec<Piece>,
    pub refined: bool,
    pub tolerances: Vec<Rational>,
    pub subs: Vec<CascadePair>,
    /// Perturbation exponent `N0`.
    pub perturbation: u64,
    pub h: WalshSeries,
    pub p: WalshSeries,
    pub e_eps: DyadicSet,
}

impl StepApprox {
    /// `n`, the series ends at `2^n`.
    pub fn end_level(&self) -> u32 {
        self.subs.last().map(|s| s.schedule.end_level()).unwrap_or(self.n0)
    }
}

/// Smallest `q` with `q > log2(1/ε)`.
pub fn default_stage_count(epsilon: &Rational) -> u32 {
    let mut q = (log2_lower_exponent(epsilon) as u32).saturating_sub(1).max(1);
    while pow2(-(q as i64)) >= *epsilon {
        q += 1;
    }
    q
}

/// Smallest `N0` with `2^-N0 < ε/2`.
pub fn perturbation_exponent(epsilon: &Rational) -> u64 {
    default_stage_count(&(epsilon / Rational::from_integer(2.into()))) as u64
}

/// Common level at which `3 |γ| 2^-L < ε/8` for every value.
pub fn refinement_level(f: &StepFunction, epsilon: &Rational) -> u32 {
    let max = f.max_abs();
    let claim = QS2::from(epsilon / Rational::from_integer(8.into()));
    let mut level = f.level();
    while max.scale(&(pow2(-(level as i64)) * Rational::from_integer(3.into()))) >= claim {
        level += 1;
    }
    level
}

pub fn build_step_approx(req: &StepApproxRequest) -> Result<StepApprox> {
    if !(req.epsilon.is_positive() && req.epsilon < Rational::one()) {
        return Err(Error::Precondition("need 0 < ε < 1".into()));
    }
    if !req.refine && req.policy == CascadePolicy::Paper {
        return Err(Error::Precondition("paper mode needs the refinement".into()));
    }
    let pieces = if req.refine {
        let level = refinement_level(&req.f, &req.epsilon);
        if level > 62 || (1u64 << level) as usize > req.piece_limit {
            return Err(Error::Infeasible {
                stage: 0,
                interval: 0,
                reason: format!("refinement to level {level} exceeds {} pieces", req.piece_limit),
            });
        }
        req.f.refine(level, level)?
    } else {
        req.f.pieces(req.piece_limit)?
    };
    if let Some(p) = pieces.iter().find(|p| p.value.is_zero()) {
        return Err(Error::Precondition(format!("zero value on {}", p.cell)));
    }
    if pieces.iter().any(|p| !p.value.is_rational()) {
        return Err(Error::Precondition("piece values must be rational".into()));
    }
    let q = req.q.unwrap_or_else(|| default_stage_count(&req.epsilon));
    let nu0 = Rational::from_integer(BigUint::from(pieces.len()).into());
    let base = &req.epsilon / (Rational::from_integer(8.into()) * &nu0 * &nu0);
    let mut subs: Vec<CascadePair> = Vec::with_capacity(pieces.len());
    let mut tolerances = Vec::with_capacity(pieces.len());
    let mut n0 = req.n0;
    for (j, piece) in pieces.iter().enumerate() {
        let eps_j = base.clone().min(&req.epsilon * pow2(-(j as i64 + 2)));
        let policy = match req.policy {
            CascadePolicy::Paper => LevelPolicy::Paper,
            CascadePolicy::Toy => LevelPolicy::ToyMinimal { k1: None },
        };
        let mut sreq = ScheduleRequest::new(n0, piece.cell.clone(), eps_j.clone(), piece.value.rational_part().clone(), q, policy);
        sreq.index_bit_cap = req.index_bit_cap;
        sreq.cell_limit = req.cell_limit;
        let cap = match subs.last() {
            Some(prev) => prev.h.blocks().last().map(|b| b.magnitude.clone()),
            None => req.magnitude_cap.clone(),
        };
        let eps_cap = QS2::from(eps_j.clone());
        sreq.magnitude_cap = Some(cap.map_or(eps_cap.clone(), |c| c.min(eps_cap)));
        let schedule = choose_schedule(&sreq).map_err(|e| match e {
            Error::Infeasible { stage, reason, .. } => Error::Infeasible {
                stage,
                interval: j + 1,
                reason: format!("piece {} ({}): {reason}", j + 1, piece.cell),
            },
            other => other,
        })?;
        let pair = build_cascade(&schedule)?;
        n0 = schedule.end_level();
        tolerances.push(eps_j);
        subs.push(pair);
    }
    let perturbation = perturbation_exponent(&req.epsilon);
    let mut h = WalshSeries::new();
    for s in &subs {
        h.append(&s.h)?;
    }
    let h = h.perturbed(perturbation);
    let e_eps = subs.iter().fold(DyadicSet::empty(), |acc, s| acc.union(&s.e));
    Ok(StepApprox {
        f: req.f.clone(),
        epsilon: req.epsilon.clone(),
        n0: req.n0,
        q,
        mode: match req.policy {
            CascadePolicy::Paper => Mode::Paper,
            CascadePolicy::Toy => Mode::Toy,
        },
        pieces,
        refined: req.refine,
        tolerances,
        subs,
        perturbation,
        p: h.unsigned(),
        h,
        e_eps,
    })
}

#[derive(Clone, Debug)]
pub struct StepVerifyOptions {
    pub seed: u64,
    pub subsets: usize,
    pub cascade: VerifyOptions,
}

impl Default for StepVerifyOptions {
    fn default() -> Self {
        StepVerifyOptions { seed: 0, subsets: 50, cascade: VerifyOptions::default() }
    }
}

/// Seeded dyadic subsets of `E_ε`: single dyadic windows, random unions at a fixed level,
/// and the sets where a block-end partial sum exceeds `|f|`.
pub fn sample_subsets(approx: &StepApprox, count: usize, seed: u64) -> Vec<DyadicSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let abs_f = approx.f.abs();
    let blocks = approx.h.blocks();
    let mut out = Vec::with_capacity(count);
    let mut partial: Option<(usize, StepFunction)> = None;
    for i in 0..count {
        let set = match i % 3 {
            0 => {
                let level = rng.gen_range(1..=8u32);
                let index = rng.gen_biguint_below(&(BigUint::one() << level));
                let cell = DyadicInterval::from_big(index, level).expect("index below 2^level");
                DyadicSet::interval(&cell)
            }
            1 => {
                let cells: Vec<DyadicInterval> = (0..64u64)
                    .filter(|_| rng.gen_bool(0.5))
                    .map(|l| DyadicInterval::new(l, 6).expect("level 6 cell"))
                    .collect();
                DyadicSet::from_intervals(&cells)
            }
            _ => {
                let cut = rng.gen_range(1..=blocks.len());
                let start = match &partial {
                    Some((c, _)) if *c <= cut => partial.take().expect("checked"),
                    _ => (0, StepFunction::zero()),
                };
                let sum = blocks[start.0..cut].iter().fold(start.1, |acc, b| acc.add(&b.base_function()));
                let big = sum.abs().sub(&abs_f).level_set(&|v| v.is_positive());
                partial = Some((cut, sum));
                big
            }
        };
        out.push(set.intersect(&approx.e_eps));
    }
    out
}

pub fn verify_step_approx(approx: &StepApprox, opts: &StepVerifyOptions) -> VerificationReport {
    let mode = approx.mode;
    let quantitative = mode == Mode::Paper;
    let eps = QS2::from(approx.epsilon.clone());
    let mut checks = Vec::new();

    // statement 1
    let mono = approx.h.check_decreasing(true);
    checks.push(Check::flag("statement1_strict_decrease", mono.pass, mode, true, mono.violation));
    if let Some(top) = approx.h.max_coefficient() {
        checks.push(Check::below("statement1_below_eps", &top, &eps, mode, quantitative));
    }
    let chained = approx.subs.windows(2).all(|w| {
        let last = &w[0].h.blocks().last().expect("nonempty").magnitude;
        let first = &w[1].h.blocks().first().expect("nonempty").magnitude;
        first < last && w[1].h.start() == w[0].h.end()
    });
    checks.push(Check::flag("chaining", chained, mode, true, None));

    // measure of E_ε
    let measure = QS2::from(approx.e_eps.measure());
    let expected: Rational = approx.subs.iter().map(|s| s.e.measure()).sum();
    checks.push(Check::equal("measure_E_eps_sum", &measure, &QS2::from(expected), mode));
    let floor = QS2::from(Rational::one() - &approx.epsilon);
    checks.push(
        Check::above("measure_E_eps", &measure, &floor, mode, true)
            .with_detail(format!("q = {}, |E_ε| = {}", approx.q, format_rational(&approx.e_eps.measure()))),
    );

    // statement 2
    let h = approx.h.base_sum();
    let diff = approx.f.sub(&h).abs().integrate(&approx.e_eps, None);
    let s2 = Bound { value: diff, perturbation: approx.h.perturbation_mass(), method: Method::Exact };
    checks.push(Check::below("statement2", &s2, &eps, mode, quantitative));

    // statement 3 on E_ε and sampled subsets
    let mut worst: Option<(usize, QS2)> = None;
    let mut sets = vec![approx.e_eps.clone()];
    sets.extend(sample_subsets(approx, opts.subsets, opts.seed));
    let abs_f = approx.f.abs();
    let mut first = None;
    for (i, e) in sets.iter().enumerate() {
        let w = StepFunction::on_set(e, &QS2::one());
        let mut cache = IntegralCache::new();
        let pn = approx.h.prefix_norms(Some(&w), &mut cache);
        let claim = &abs_f.integrate(e, None) + &eps;
        let slack = pn.bound.slack(&claim);
        if i == 0 {
            first = Some(Check::below("statement3_on_E_eps", &pn.bound, &claim, mode, quantitative));
        }
        if worst.as_ref().is_none_or(|(_, s)| slack < *s) {
            worst = Some((i, slack));
        }
    }
    checks.extend(first);
    let (wi, ws) = worst.expect("at least E_ε");
    checks.push(Check::flag(
        "statement3_sampled_subsets",
        ws.is_positive(),
        mode,
        quantitative,
        Some(format!("{} sets, smallest slack {} at set {wi}", sets.len(), ws.to_decimal(12))),
    ));

    // statement 4
    let mut cache = IntegralCache::new();
    let s4 = approx.p.prefix_norms(None, &mut cache);
    checks.push(Check::below("statement4_prefix", &s4.bound, &eps, mode, quantitative));

    // per-piece cascades
    for (j, s) in approx.subs.iter().enumerate() {
        let rep = verify_cascade(s, &opts.cascade);
        let failed: Vec<String> = rep.failures().iter().map(|c| c.name.clone()).collect();
        checks.push(Check::flag(
            &format!("piece_{}_cascade", j + 1),
            failed.is_empty(),
            mode,
            true,
            (!failed.is_empty()).then(|| failed.join(", ")),
        ));
    }
    let pieces_ok = approx.pieces.iter().all(|p| {
        let bound = p.value.abs().scale(&(p.cell.measure() * Rational::from_integer(3.into())));
        bound < QS2::from(&approx.epsilon / Rational::from_integer(8.into()))
    });
    checks.push(Check::flag(
        "refinement",
        pieces_ok,
        mode,
        approx.refined,
        Some(format!("{} pieces{}", approx.pieces.len(), if approx.refined { "" } else { ", unrefined" })),
    ));
    let n0_ok = pow2(-(approx.perturbation as i64)) < &approx.epsilon / Rational::from_integer(2.into());
    checks.push(Check::flag(
        "perturbation_exponent",
        n0_ok,
        mode,
        true,
        Some(format!("N0 = {}", approx.perturbation)),
    ));
    VerificationReport::new("lemma3", mode, checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn refinement_example() {
        let f = StepFunction::constant(QS2::one());
        assert_eq!(refinement_level(&f, &r("1/2")), 6);
        assert_eq!(f.refine(6, 6).unwrap().len(), 64);
    }

    #[test]
    fn exponents() {
        assert_eq!(default_stage_count(&r("1/2")), 2);
        assert_eq!(default_stage_count(&r("1/3")), 2);
        assert_eq!(default_stage_count(&r("1/4")), 3);
        assert_eq!(default_stage_count(&r("9/10")), 1);
        assert_eq!(perturbation_exponent(&r("1/2")), 3);
        assert_eq!(perturbation_exponent(&r("9/10")), 2);
    }

    fn two_piece() -> StepFunction {
        StepFunction::from_triples(&[(0, 1, QS2::from_ratio(1, 32)), (1, 1, QS2::from_ratio(-1, 64))]).unwrap()
    }

    #[test]
    fn paper_q1_two_pieces() {
        let mut req = StepApproxRequest::new(two_piece(), r("1/2"), 1, CascadePolicy::Paper);
        req.q = Some(1);
        let a = build_step_approx(&req).unwrap();
        assert_eq!(a.pieces.len(), 2);
        assert_eq!(a.e_eps.measure(), r("1/2"));
        let rep = verify_step_approx(&a, &StepVerifyOptions { subsets: 6, ..Default::default() });
        let failed: Vec<_> = rep.failures().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["measure_E_eps"], "{:#?}", rep.failures());
    }

    #[test]
    fn paper_default_q_is_infeasible() {
        let req = StepApproxRequest::new(two_piece(), r("1/2"), 1, CascadePolicy::Paper);
        assert!(matches!(build_step_approx(&req), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn toy_chain_is_strictly_decreasing() {
        let mut req = StepApproxRequest::new(StepFunction::constant(QS2::one()), r("1/2"), 2, CascadePolicy::Toy);
        req.q = Some(1);
        let a = build_step_approx(&req).unwrap();
        assert_eq!(a.pieces.len(), 64);
        assert!(a.h.check_decreasing(true).pass);
        assert_eq!(a.h.start().unwrap(), BigUint::from(4u32));
    }
}
