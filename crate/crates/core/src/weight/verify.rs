//! Exact checks of the weight and of the stage bounds it is built to guarantee.

use num_traits::One;

use super::build::{stage_tolerance, WeightFunction, WeightStage};
use crate::dyadic::{DyadicSet, IntegralCache, StepFunction};
use crate::exact::{format_rational, pow2, Rational, QS2};
use crate::report::{Check, Mode, VerificationReport};
use crate::walsh::series::{Bound, Method, WalshSeries};

/// `∫_S |H| w` for the series `H`: exact on the base sum, perturbation scaled by `max w`.
pub fn weighted_series_norm(h: &WalshSeries, over: &DyadicSet, weight: &StepFunction) -> Bound {
    let top = weight.max_abs();
    let value = h.base_sum().abs().integrate(over, Some(weight));
    let pert = h.perturbation_mass();
    Bound { value, perturbation: pert_times(&pert, &top), method: Method::Exact }
}

/// Perturbation mass times a weight bound, kept rational by rounding the weight up to 1.
fn pert_times(pert: &Rational, top: &QS2) -> Rational {
    if *top <= QS2::one() {
        match top.rational_part() {
            r if top.is_rational() => pert * r,
            _ => pert.clone(),
        }
    } else {
        pert.clone()
    }
}

/// Largest weighted prefix norm of `h` over `S`: the better of the weighted majorant bound
/// and `max_S w` times the unweighted one.
pub fn weighted_prefix_bound(h: &WalshSeries, over: &DyadicSet, weight: &StepFunction, cache: &mut IntegralCache) -> Bound {
    let w = weight.zip(&StepFunction::on_set(over, &QS2::one()), &|a, b| a * b);
    let direct = h.prefix_norms(Some(&w), cache).bound;
    let top = w.max_abs();
    let plain = h.prefix_norms(None, cache).bound;
    let scaled = Bound { value: &plain.value * &top, perturbation: pert_times(&plain.perturbation, &top), method: Method::Majorant };
    if scaled.total() < direct.total() {
        scaled
    } else {
        direct
    }
}

fn stage_checks(w: &WeightFunction, s: &WeightStage, checks: &mut Vec<Check>) {
    let m = s.m;
    let mode = s.mode;
    let paper = mode == Mode::Paper;
    let tol = QS2::from(stage_tolerance(m));
    checks.push(Check::flag(
        &format!("stage_{m}_mode"),
        true,
        mode,
        false,
        Some(match &s.fallback {
            Some(why) => format!("toy: {why}"),
            None => "paper".into(),
        }),
    ));
    checks.push(Check::above(
        &format!("stage_{m}_measure_E"),
        &QS2::from(s.e.measure()),
        &QS2::from(Rational::one() - stage_tolerance(m)),
        mode,
        paper,
    ));
    if let Some(top) = s.h.max_coefficient() {
        let cap = QS2::from(pow2(-2 * s.start_level as i64));
        checks.push(Check::below(&format!("stage_{m}_coefficient_cap"), &top, &cap, mode, paper));
    }
    let diff = s.f.sub(&s.h.base_sum()).abs().integrate(&s.e, None);
    let on_e = Bound { value: diff, perturbation: s.h.perturbation_mass(), method: Method::Exact };
    checks.push(Check::below(&format!("stage_{m}_error_on_E"), &on_e, &tol, mode, paper));
    let mut cache = IntegralCache::new();
    let p4 = s.p().prefix_norms(None, &mut cache).bound;
    checks.push(Check::below(&format!("stage_{m}_plain_prefix"), &p4, &tol, mode, paper));
    checks.push(Check::flag(
        &format!("stage_{m}_h_at_least_one"),
        s.h_m >= QS2::one(),
        mode,
        true,
        Some(s.h_m.to_decimal(12)),
    ));

    if m < w.n_tilde {
        return;
    }
    let outside = w.omega(m).complement();
    let b46 = weighted_series_norm(&s.h, &outside, &w.mu);
    checks.push(Check::below(&format!("bound_H_off_omega_{m}"), &b46, &tol, mode, true));
    let b47 = s.f.abs().integrate(&outside, Some(&w.mu));
    checks.push(Check::below(&format!("bound_f_off_omega_{m}"), &Bound::exact(b47), &tol, mode, true));
    let b48 = weighted_prefix_bound(&s.h, &outside, &w.mu, &mut cache);
    checks.push(Check::below(&format!("bound_prefix_off_omega_{m}"), &b48, &tol, mode, true));

    let unit = DyadicSet::unit();
    let err = Bound {
        value: s.f.sub(&s.h.base_sum()).abs().integrate(&unit, Some(&w.mu)),
        perturbation: pert_times(&s.h.perturbation_mass(), &w.mu.max_abs()),
        method: Method::Exact,
    };
    checks.push(Check::below(&format!("weighted_error_{m}"), &err, &QS2::from(pow2(-(m as i64) + 1)), mode, paper));
    if m > w.n_tilde {
        let pre = weighted_prefix_bound(&s.h, &unit, &w.mu, &mut cache);
        let claim = &s.f.abs().integrate(&unit, Some(&w.mu)) + &QS2::from(pow2(-(m as i64) + 1));
        checks.push(Check::below(&format!("weighted_prefix_{m}"), &pre, &claim, mode, paper));
    }
}

pub fn verify_weight(w: &WeightFunction) -> VerificationReport {
    let mode = w.mode();
    let mut checks = Vec::new();
    let nt = w.n_tilde;
    checks.push(Check::flag(
        "n_tilde",
        pow2(-(nt as i64)) < w.delta && (nt == 1 || pow2(-(nt as i64) + 1) >= w.delta),
        mode,
        true,
        Some(format!("ñ = {nt}")),
    ));
    checks.push(Check::flag("truncated", true, mode, false, Some(format!("{} stages", w.m_max))));

    // Ω nesting and E = Ω_ñ
    let nested = w.omega.windows(2).all(|p| p[0].is_subset(&p[1]));
    checks.push(Check::flag("omega_nesting", nested, mode, true, None));
    let e_ok = (nt..=w.m_max).all(|m| w.e().is_subset(&w.stages[m as usize - 1].e));
    checks.push(Check::flag("E_inside_later_stages", e_ok, mode, true, None));

    // μ_n recomputed by multiplication
    let mut product = QS2::one();
    let mut recomputed = true;
    let mut decreasing = true;
    for (i, (s, mu)) in w.stages.iter().zip(&w.mu_values).enumerate() {
        product = &product * &s.h_m;
        recomputed &= (mu * &product).scale(&pow2(i as i64 + 2)) == QS2::one();
        if i > 0 {
            decreasing &= *mu < w.mu_values[i - 1];
        }
        decreasing &= mu.is_positive() && *mu <= QS2::from(pow2(-(i as i64 + 2)));
    }
    recomputed &= (&w.mu_remainder * &product).scale(&pow2(w.m_max as i64 + 2)) == QS2::one();
    decreasing &= w.mu_values.last().is_none_or(|last| w.mu_remainder < *last);
    checks.push(Check::flag("mu_values_recomputed", recomputed, mode, true, None));
    checks.push(Check::flag("mu_values_decreasing", decreasing, mode, true, None));

    // the piecewise form of μ
    let range_ok = w.mu.min_value().is_positive() && w.mu.max_abs() <= QS2::one();
    checks.push(Check::flag("mu_in_unit_range", range_ok, mode, true, None));
    let mut shells_ok = true;
    if nt <= w.m_max {
        shells_ok &= w.mu.level_set(&|v| *v == QS2::one()) == w.e();
        for n in nt + 1..=w.m_max {
            let shell = w.omega(n).difference(&w.omega(n - 1));
            let mu_n = &w.mu_values[n as usize - 1];
            shells_ok &= w.mu.level_set(&|v| v == mu_n) == shell;
        }
        let rest = w.omega(w.m_max).complement();
        shells_ok &= w.mu.level_set(&|v| *v == w.mu_remainder) == rest;
    } else {
        shells_ok &= w.mu == StepFunction::constant(QS2::one());
    }
    checks.push(Check::flag("mu_on_shells", shells_ok, mode, true, None));

    // measure of {μ = 1}
    let ones = w.mu.level_set(&|v| *v == QS2::one()).measure();
    checks.push(
        Check::above("measure_mu_one", &QS2::from(ones.clone()), &QS2::from(Rational::one() - &w.delta), mode, true)
            .with_detail(format!("|{{μ = 1}}| = {}, |E| = {}", format_rational(&ones), format_rational(&w.e().measure()))),
    );

    // chained coefficients over all stages
    let (pass, detail) = match w.series() {
        Ok(s) => {
            let c = s.check_decreasing(true);
            (c.pass, c.violation)
        }
        Err(e) => (false, Some(e.to_string())),
    };
    checks.push(Check::flag("stage_coefficients_decreasing", pass, mode, true, detail));

    for s in &w.stages {
        stage_checks(w, s, &mut checks);
    }
    if w.stages.is_empty() {
        checks.push(Check::flag("stages_present", false, mode, true, None));
    }
    VerificationReport::new("lemma4_weight", mode, checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;
    use crate::weight::{build_weight, WeightOptions};

    #[test]
    fn toy_weight_structure_and_bounds() {
        let w = build_weight(&parse_rational("1/4").unwrap(), &WeightOptions::default()).unwrap();
        let rep = verify_weight(&w);
        let failed: Vec<_> = rep.failures().iter().map(|c| c.name.clone()).collect();
        // only the measure of {μ = 1} is out of reach with one-stage toy cascades
        assert_eq!(failed, vec!["measure_mu_one".to_string()], "{:#?}", rep.failures());
        for m in 3..=6 {
            for name in ["bound_H_off_omega", "bound_f_off_omega", "bound_prefix_off_omega"] {
                assert!(rep.check(&format!("{name}_{m}")).unwrap().pass);
            }
        }
    }
}
