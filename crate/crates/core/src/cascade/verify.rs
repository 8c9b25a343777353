//! Exact verification of a cascade pair.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Signed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::build::CascadePair;
use crate::dyadic::{DyadicSet, IntegralCache, StepFunction};
use crate::exact::{pow2, DyadicRational, Rational, QS2};
use crate::report::{Check, Mode, VerificationReport};
use crate::walsh::fwht;
use crate::walsh::series::{BlockKind, Bound, IndexBlock, SignPattern};

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub j_max: u32,
    pub seed: u64,
    pub samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { j_max: crate::dyadic::DEFAULT_J_MAX, seed: 0, samples: 200 }
    }
}

/// `sum_{k=2^n}^{2^(n+1)-1} W_k(x)`: `2^n` on `[0, 2^-(n+1))`, `-2^n` on `[2^-(n+1), 2^-n)`.
fn filler_kernel_at(n: u32, x: &DyadicRational) -> QS2 {
    let x = x.to_rational();
    if x < pow2(-(n as i64 + 1)) {
        QS2::from(pow2(n as i64))
    } else if x < pow2(-(n as i64)) {
        QS2::from(-pow2(n as i64))
    } else {
        QS2::zero()
    }
}

/// `-(2^q - 1) γ` on `Ẽ_q`, `γ` on `E_q`, `0` off `Δ`.
pub fn expected_h_tilde(pair: &CascadePair) -> StepFunction {
    let gamma = QS2::from(pair.schedule.gamma.clone());
    let low = QS2::from(-(pow2(pair.q() as i64) - Rational::one()) * &pair.schedule.gamma);
    StepFunction::on_set(&pair.e_tilde, &low).add(&StepFunction::on_set(&pair.e, &gamma))
}

/// `sum_ν sum_i (K_i - K_(i-1) - 1) b_i`, the filler mass bounding both parts of statement 2.
pub fn filler_mass(pair: &CascadePair) -> QS2 {
    let s = &pair.schedule;
    let mut total = QS2::zero();
    for st in &s.stages {
        for (i, (level, m)) in st.levels.iter().zip(&st.magnitudes).enumerate() {
            let prev = s.previous_level(st.nu, i + 1);
            total += m.scale(&Rational::from_integer((level - prev - 1).into()));
        }
    }
    total
}

pub fn verify_cascade(pair: &CascadePair, opts: &VerifyOptions) -> VerificationReport {
    let s = &pair.schedule;
    let mode = s.mode;
    let quantitative = mode == Mode::Paper;
    let eps = QS2::from(s.epsilon.clone());
    let gamma = QS2::from(s.gamma.clone());
    let delta_set = DyadicSet::interval(&s.delta);
    let delta_measure = s.delta.measure();
    let mut checks = Vec::new();

    // statement 1
    let mono = pair.h.check_decreasing(false);
    checks.push(Check::flag("statement1_monotone", mono.pass, mode, true, mono.violation));
    let top = pair.h.max_coefficient().expect("nonempty series");
    checks.push(Check::below("statement1_below_eps", &top, &eps, mode, quantitative));

    // statement 2
    let h = pair.h.base_sum();
    let target = StepFunction::indicator(&s.delta, gamma.clone());
    let on_e = target.sub(&h).abs().integrate(&pair.e, None);
    checks.push(Check::below("statement2_on_E", &Bound::exact(on_e.clone()), &eps, mode, quantitative));
    let off = h.abs().integrate(&delta_set.complement(), None);
    checks.push(Check::below("statement2_off_delta", &Bound::exact(off.clone()), &eps, mode, quantitative));
    let chain = filler_mass(pair);
    checks.push(Check::below("statement2_bound_chain", &Bound::exact(chain.clone()), &eps, mode, quantitative));
    checks.push(Check::flag(
        "statement2_exact_within_chain",
        on_e <= chain && off <= chain,
        mode,
        true,
        Some(format!("on E {}, off Δ {}, chain {}", on_e.to_decimal(12), off.to_decimal(12), chain.to_decimal(12))),
    ));

    // statements 3 and 4
    let mut cache = IntegralCache::new();
    let s3 = pair.h.prefix_norms(None, &mut cache);
    let claim3 = &gamma.abs().scale(&(delta_measure.clone() * Rational::from_integer(3.into()))) + &eps;
    checks.push(Check::below("statement3_prefix", &s3.bound, &claim3, mode, quantitative));
    let s4 = pair.p.prefix_norms(None, &mut cache);
    checks.push(Check::below("statement4_prefix", &s4.bound, &eps, mode, quantitative));

    // measures and nesting
    let one = Rational::one();
    checks.push(Check::equal(
        "measure_E",
        &QS2::from(pair.e.measure()),
        &QS2::from((&one - pow2(-(s.q as i64))) * &delta_measure),
        mode,
    ));
    let mut outer = delta_set.clone();
    for st in &s.stages {
        checks.push(Check::equal(
            &format!("measure_E_tilde_{}", st.nu),
            &QS2::from(st.e_tilde.measure()),
            &QS2::from(pow2(-(st.nu as i64)) * &delta_measure),
            mode,
        ));
        checks.push(Check::flag(&format!("nesting_{}", st.nu), st.e_tilde.is_subset(&outer), mode, true, None));
        outer = st.e_tilde.clone();
    }
    checks.push(Check::flag(
        "partition_of_delta",
        pair.e.union(&pair.e_tilde) == delta_set && pair.e.intersect(&pair.e_tilde).is_empty(),
        mode,
        true,
        None,
    ));

    // H̃_q value set
    let expected = expected_h_tilde(pair);
    checks.push(Check::flag("h_tilde_values", &expected == pair.h_tilde_q(), mode, true, None));

    // decomposition H = H̃ + fillers at sampled points
    let top_level = pair.h.top_level().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let bound = BigUint::one() << (top_level + 2);
    let fillers: Vec<(u32, QS2)> = pair.fillers().map(|(n, m)| (n, m.clone())).collect();
    let mut mismatch = None;
    for i in 0..opts.samples {
        let x = DyadicRational::new(rng.gen_biguint_below(&bound), top_level + 2);
        let lhs = h.eval(&x).clone();
        let rhs = fillers.iter().fold(expected.eval(&x).clone(), |acc, (n, m)| &acc + &(m * &filler_kernel_at(*n, &x)));
        if lhs != rhs {
            mismatch = Some(format!("sample {i}: H = {lhs}, H̃ + fillers = {rhs}"));
            break;
        }
    }
    checks.push(Check::flag(
        "decomposition_sampled",
        mismatch.is_none(),
        mode,
        true,
        mismatch.or_else(|| Some(format!("{} points", opts.samples))),
    ));

    // sign layout and spectrum
    let negate = s.gamma.is_negative();
    let mut layout = Ok(());
    let mut expected_level = s.n0;
    let mut atoms = s.stages.iter().flat_map(|st| st.atoms.iter());
    for (i, b) in pair.h.blocks().iter().enumerate() {
        if b.range != IndexBlock::Level(expected_level) {
            layout = Err(format!("block {i} at {:?}, expected level {expected_level}", b.range));
            break;
        }
        expected_level += 1;
        let ok = match (&b.kind, &b.signs) {
            (BlockKind::Filler, SignPattern::Plus) => true,
            (BlockKind::Atom, SignPattern::Flat { atom, negate: ng }) => {
                *ng == negate && atoms.next().is_some_and(|a| a == atom)
            }
            _ => false,
        };
        if !ok {
            layout = Err(format!("block {i} has the wrong sign rule"));
            break;
        }
    }
    if layout.is_ok() && expected_level != s.end_level() {
        layout = Err(format!("series ends at level {expected_level}, schedule at {}", s.end_level()));
    }
    checks.push(Check::flag("sign_layout", layout.is_ok(), mode, true, layout.err()));
    let same_magnitudes = pair.h.blocks().iter().zip(pair.p.blocks()).all(|(a, b)| a.magnitude == b.magnitude && a.range == b.range)
        && pair.p.blocks().iter().all(|b| b.signs == SignPattern::Plus);
    checks.push(Check::flag("p_unsigned_h", same_magnitudes, mode, true, None));

    // dense cross-check
    if top_level < opts.j_max {
        let dense = h.grid(top_level + 1, opts.j_max).and_then(|g| fwht(&g, opts.j_max));
        let detail = match dense {
            Ok(c) => c
                .coefficients
                .iter()
                .enumerate()
                .find(|(k, v)| pair.h.exact_coefficient(*k as u64).unwrap_or_else(QS2::zero) != **v)
                .map(|(k, _)| format!("coefficient {k} differs")),
            Err(e) => Some(e.to_string()),
        };
        checks.push(Check::flag("dense_cross_check", detail.is_none(), mode, true, detail));
    } else {
        checks.push(Check::flag(
            "dense_cross_check",
            true,
            mode,
            false,
            Some(format!("skipped: level {} above J_max {}", top_level + 1, opts.j_max)),
        ));
    }
    if s.q > 1 {
        checks.push(Check::flag(
            "maximal_interval_cells",
            true,
            mode,
            false,
            Some("stages after the first use the maximal dyadic intervals of the previous exceptional set".into()),
        ));
    }
    VerificationReport::new("lemma2", mode, checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{build_cascade, choose_schedule, LevelPolicy, ScheduleRequest};
    use crate::dyadic::DyadicInterval;
    use crate::exact::parse_rational;

    fn run(l: u64, k: u32, eps: &str, gamma: &str, q: u32, policy: LevelPolicy) -> VerificationReport {
        let req = ScheduleRequest::new(
            1,
            DyadicInterval::new(l, k).unwrap(),
            parse_rational(eps).unwrap(),
            parse_rational(gamma).unwrap(),
            q,
            policy,
        );
        let pair = build_cascade(&choose_schedule(&req).unwrap()).unwrap();
        verify_cascade(&pair, &VerifyOptions::default())
    }

    #[test]
    fn paper_q1_example_passes() {
        let rep = run(0, 1, "9/10", "1", 1, LevelPolicy::Paper);
        assert!(rep.pass, "{:#?}", rep.failures());
        assert!(rep.checks.iter().all(|c| c.pass));
        assert_eq!(rep.check("dense_cross_check").unwrap().required, true);
    }

    #[test]
    fn paper_q1_negative_gamma() {
        let rep = run(1, 2, "1/2", "-2", 1, LevelPolicy::Paper);
        assert!(rep.checks.iter().all(|c| c.pass), "{:#?}", rep.failures());
    }

    #[test]
    fn toy_q2_structure() {
        let rep = run(0, 1, "1/2", "1/3", 2, LevelPolicy::ToyMinimal { k1: None });
        assert!(rep.pass, "{:#?}", rep.failures());
        assert_eq!(rep.mode, Mode::Toy);
    }

    #[test]
    fn filler_kernel_matches_transform_sum() {
        use crate::walsh::walsh_eval_u64;
        for n in 0..5u32 {
            for k in 0..(1u64 << 7) {
                let x = DyadicRational::from_u64(k, 7);
                let direct: i64 = ((1u64 << n)..(2u64 << n)).map(|j| walsh_eval_u64(j, &x) as i64).sum();
                assert_eq!(filler_kernel_at(n, &x), QS2::from_int(direct));
            }
        }
    }
}
