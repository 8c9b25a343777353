//! Greedy choice of stages and signs driving the weighted error of the signed partial sums
//! of the universal function towards a target.
//!
//! Stage `q` takes the residual `r_q = f - Σ_(k < 2^N(ν_(q-1))) δ_k a_k W_k` (the head alone
//! for `q = 1`), picks the first stage `ν_q > ν_(q-1)` with `∫|r_q - f_ν| μ < 2^-(q+2)`,
//! and adopts that stage's signs; every other block keeps sign `+1`.
//! When no stage qualifies and fallback is allowed, the stage with the smallest resulting
//! error is taken, preferring those that certifiably lower it; such stages are uncertified.

use rayon::prelude::*;
use serde::Serialize;

use super::build::{block_perturbation, block_sum, UniversalFunction};
use crate::dyadic::{DyadicSet, IntegralCache, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{pow2, Rational, QS2};
use crate::report::{Check, Mode, VerificationReport};
use crate::walsh::series::{Bound, Method, SignPattern};

#[derive(Clone, Debug)]
pub struct SelectOptions {
    pub depth: u32,
    pub allow_fallback: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions { depth: 3, allow_fallback: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageStep {
    pub q: u32,
    pub nu: u32,
    /// The partial sum ends at index `2^end_level`.
    pub end_level: u32,
    /// `∫|r_q - f_ν| μ`.
    pub residual_distance: Bound,
    pub distance_ok: bool,
    /// `∫|f - Σ_(k < 2^N(ν_q)) δ_k a_k W_k| μ`.
    pub error: Bound,
    /// `2^-q`.
    pub bound: QS2,
    /// Weighted prefix norms inside the chosen block, against `2^-(q-3)`.
    pub prefix: Bound,
    pub prefix_bound: QS2,
    pub mode: Mode,
    /// Every ingredient stage ran in paper mode and the distance qualified.
    pub certified: bool,
}

#[derive(Clone, Debug)]
pub struct SignSelection {
    pub target: StepFunction,
    pub depth: u32,
    pub steps: Vec<StageStep>,
    /// `∫|f - P0| μ`, the error before the first stage.
    pub initial_error: Bound,
}

impl SignSelection {
    pub fn nus(&self) -> Vec<u32> {
        self.steps.iter().map(|s| s.nu).collect()
    }

    /// `δ_k` on the blocks of stage `m`: `None` means `+1` throughout.
    pub fn uses_stage_signs(&self, m: u32) -> bool {
        self.nus().contains(&m)
    }
}

/// Base sum and perturbation mass of the partial sum through the end of stage `upto`,
/// with stage signs on `chosen` and `+1` elsewhere.
struct Partial {
    sum: StepFunction,
    perturbation: num_rational::BigRational,
}

fn stage_functions(g: &UniversalFunction) -> (Vec<StepFunction>, Vec<StepFunction>) {
    let p: Vec<StepFunction> = g.stage_blocks.par_iter().map(|r| block_sum(&g.coefficients(), r.clone())).collect();
    let h: Vec<StepFunction> = g.stage_blocks.par_iter().map(|r| block_sum(&g.signed, r.clone())).collect();
    (p, h)
}

/// `|W_k| = 1`, so a perturbation of coefficient mass `p` moves a `μ`-weighted norm by at
/// most `p ∫μ`.
fn weighted_error(f: &StepFunction, partial: &Partial, mu: &StepFunction, mass: &Rational) -> Bound {
    Bound {
        value: f.sub(&partial.sum).abs().integrate(&DyadicSet::unit(), Some(mu)),
        perturbation: &partial.perturbation * mass,
        method: Method::Exact,
    }
}

/// Certified `a < b` for two error bounds whose exact values lie within their perturbation.
fn certainly_below(a: &Bound, b: &Bound) -> bool {
    a.total() < &b.value - &QS2::from(b.perturbation.clone())
}

pub fn approximate(g: &UniversalFunction, f: &StepFunction, opts: &SelectOptions) -> Result<SignSelection> {
    if opts.depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let total = g.stage_count();
    if opts.depth > total {
        return Err(Error::Precondition(format!("depth {} exceeds the {total} stages", opts.depth)));
    }
    if f.pieces(1 << 16).map(|p| p.iter().any(|x| !x.value.is_rational())).unwrap_or(true) {
        return Err(Error::Precondition("the target must be a rational step function".into()));
    }
    let mu = &g.weight.mu;
    let mass = mu.integrate(&DyadicSet::unit(), None).rational_upper_bound();
    let (p_sums, h_sums) = stage_functions(g);
    let p_pert: Vec<_> = g.stage_blocks.iter().map(|r| block_perturbation(&g.signed, r.clone())).collect();
    let head_len = g.head.blocks().len();
    let mut partial = Partial { sum: block_sum(&g.signed, 0..head_len), perturbation: block_perturbation(&g.signed, 0..head_len) };
    let initial_error = weighted_error(f, &partial, mu, &mass);
    let mut previous_error = initial_error.clone();
    let mut last_nu = 0u32;
    let mut steps = Vec::with_capacity(opts.depth as usize);
    for q in 1..=opts.depth {
        let residual = f.sub(&partial.sum);
        let limit = total - (opts.depth - q);
        let candidates: Vec<u32> = (last_nu + 1..=limit).collect();
        let threshold = QS2::from(pow2(-(q as i64) - 2));
        // each candidate: distance, resulting partial sum and error
        let evaluated: Vec<(u32, Bound, Partial, Bound)> = candidates
            .par_iter()
            .map(|&nu| {
                let stage = &g.weight.stages[nu as usize - 1];
                let d = Bound {
                    value: residual.sub(&stage.f).abs().integrate(&DyadicSet::unit(), Some(mu)),
                    perturbation: &partial.perturbation * &mass,
                    method: Method::Exact,
                };
                let mut sum = partial.sum.clone();
                let mut pert = partial.perturbation.clone();
                for m in last_nu + 1..nu {
                    sum = sum.add(&p_sums[m as usize - 1]);
                    pert += &p_pert[m as usize - 1];
                }
                sum = sum.add(&h_sums[nu as usize - 1]);
                pert += &p_pert[nu as usize - 1];
                let next = Partial { sum, perturbation: pert };
                let err = weighted_error(f, &next, mu, &mass);
                (nu, d, next, err)
            })
            .collect();
        let qualifying = evaluated.iter().position(|(_, d, _, _)| d.total() < threshold);
        let pick = match qualifying {
            Some(i) => i,
            None if opts.allow_fallback => evaluated
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let stays = |e: &Bound| !certainly_below(e, &previous_error);
                    stays(&a.1 .3)
                        .cmp(&stays(&b.1 .3))
                        .then(a.1 .3.total().cmp(&b.1 .3.total()))
                        .then(a.1 .0.cmp(&b.1 .0))
                })
                .map(|(i, _)| i)
                .ok_or_else(|| Error::SearchExhausted(format!("stage {q}: no stages left")))?,
            None => {
                let best = evaluated.iter().min_by(|a, b| a.1.total().cmp(&b.1.total()));
                return Err(Error::SearchExhausted(match best {
                    Some((nu, d, _, _)) => format!(
                        "stage {q}: no stage within 2^-{} of the residual; closest is {nu} at {}",
                        q + 2,
                        d.total().to_decimal(12)
                    ),
                    None => format!("stage {q}: no stages left"),
                }));
            }
        };
        let (nu, distance, next, error) = evaluated.into_iter().nth(pick).expect("picked candidate");
        let stage = &g.weight.stages[nu as usize - 1];
        let mut cache = IntegralCache::new();
        let prefix = stage.h.prefix_norms(Some(mu), &mut cache).bound;
        let ingredients_paper = (last_nu + 1..=nu).all(|m| g.weight.stages[m as usize - 1].mode == Mode::Paper);
        let distance_ok = distance.total() < threshold;
        steps.push(StageStep {
            q,
            nu,
            end_level: stage.end_level,
            residual_distance: distance,
            distance_ok,
            bound: QS2::from(pow2(-(q as i64))),
            prefix_bound: QS2::from(pow2(3 - q as i64)),
            prefix,
            mode: if ingredients_paper { Mode::Paper } else { Mode::Toy },
            certified: ingredients_paper && distance_ok,
            error: error.clone(),
        });
        previous_error = error;
        partial = next;
        last_nu = nu;
    }
    Ok(SignSelection { target: f.clone(), depth: opts.depth, steps, initial_error })
}

pub fn verify_selection(g: &UniversalFunction, sel: &SignSelection) -> VerificationReport {
    let mode = if sel.steps.iter().all(|s| s.certified) { Mode::Paper } else { Mode::Toy };
    let mut checks = Vec::new();
    let nus = sel.nus();
    checks.push(Check::flag("nu_increasing", nus.windows(2).all(|w| w[0] < w[1]), mode, true, Some(format!("{nus:?}"))));

    // δ_k = ±1 everywhere: stage signs on chosen blocks, +1 elsewhere
    let mut signs_ok = true;
    for (i, r) in g.stage_blocks.iter().enumerate() {
        let chosen = nus.contains(&(i as u32 + 1));
        if !chosen {
            signs_ok &= g.coefficients().blocks()[r.clone()].iter().all(|b| b.signs == SignPattern::Plus);
        }
    }
    signs_ok &= g.head.blocks().iter().all(|b| b.signs == SignPattern::Plus);
    checks.push(Check::flag("signs_plus_off_chosen_blocks", signs_ok, mode, true, None));
    let mono = g.coefficients().check_decreasing(true);
    checks.push(Check::flag("coefficients_strictly_decreasing", mono.pass, mode, true, mono.violation));

    let mut previous = sel.initial_error.clone();
    let mut decreasing = true;
    for s in &sel.steps {
        decreasing &= certainly_below(&s.error, &previous);
        previous = s.error.clone();
        let q = s.q;
        checks.push(Check::below(&format!("stage_{q}_error"), &s.error, &s.bound, s.mode, s.certified));
        checks.push(Check::below(&format!("stage_{q}_prefix"), &s.prefix, &s.prefix_bound, s.mode, s.certified));
        checks.push(Check::flag(
            &format!("stage_{q}_certified"),
            s.certified,
            s.mode,
            false,
            Some(if s.certified {
                "paper ingredients, qualifying distance".into()
            } else {
                format!(
                    "{}residual distance {}",
                    if s.mode == Mode::Toy { "toy ingredients, " } else { "" },
                    s.residual_distance.total().to_decimal(12)
                )
            }),
        ));
    }
    checks.push(Check::flag(
        "errors_strictly_decreasing",
        decreasing,
        mode,
        true,
        Some(
            std::iter::once(&sel.initial_error)
                .chain(sel.steps.iter().map(|s| &s.error))
                .map(|e| e.total().to_decimal(12))
                .collect::<Vec<_>>()
                .join(" > "),
        ),
    ));
    VerificationReport::new("theorem", mode, checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;
    use crate::universal::build_universal;
    use crate::weight::WeightOptions;

    fn g() -> UniversalFunction {
        build_universal(&parse_rational("1/4").unwrap(), &WeightOptions::default()).unwrap()
    }

    #[test]
    fn three_stage_selection() {
        let g = g();
        let f = StepFunction::from_grid(&[QS2::from_int(3), QS2::from_int(-1)]).unwrap();
        let sel = approximate(&g, &f, &SelectOptions::default()).unwrap();
        assert_eq!(sel.steps.len(), 3);
        let rep = verify_selection(&g, &sel);
        for name in ["nu_increasing", "signs_plus_off_chosen_blocks", "coefficients_strictly_decreasing"] {
            assert!(rep.check(name).unwrap().pass, "{name}");
        }
        // six toy stages cannot lower this target's weighted error at every step
        let failed: Vec<_> = rep.failures().iter().map(|c| c.name.clone()).collect();
        assert!(failed.iter().all(|n| n == "errors_strictly_decreasing"), "{failed:?}");
        // ν_q <= M - (Q - q)
        for s in &sel.steps {
            assert!(s.nu <= g.stage_count() - (3 - s.q));
        }
    }

    #[test]
    fn head_plus_stage_function_has_zero_distance() {
        let g = g();
        let head = block_sum(&g.signed, 0..g.head.blocks().len());
        let f = head.add(&g.weight.stages[0].f);
        let sel = approximate(&g, &f, &SelectOptions { depth: 1, allow_fallback: false }).unwrap();
        assert_eq!(sel.steps[0].nu, 1);
        assert!(sel.steps[0].residual_distance.value.is_zero());
        assert!(sel.steps[0].distance_ok);
    }

    #[test]
    fn depth_beyond_stages_is_refused() {
        let g = g();
        let f = StepFunction::constant(QS2::one());
        assert!(approximate(&g, &f, &SelectOptions { depth: 7, allow_fallback: true }).is_err());
    }
}
