//! Stages `m = 1..M` of step approximations to the enumerated `f_m`, and the weight `μ`
//! assembled from their good sets.
//!
//! With `Ω_n = E_n ∩ ... ∩ E_M` and `ñ` the smallest `n` with `2^-n < δ`, the weight is `1`
//! on `Ω_ñ`, `μ_n = 2^-(n+1) / (h_1 ... h_n)` on `Ω_n \ Ω_(n-1)` for `ñ < n <= M`, and
//! `2^-(M+2) / (h_1 ... h_M)` on the unprocessed remainder `[0,1) \ Ω_M`.

use num_traits::One;
use serde::{Deserialize, Serialize};

use super::enumerate::{EnumerationParams, StepEnumeration};
use crate::cascade::schedule::{DEFAULT_CELL_LIMIT, DEFAULT_INDEX_BIT_CAP};
use crate::cascade::{build_step_approx, CascadePolicy, StepApprox, StepApproxRequest};
use crate::dyadic::{DyadicSet, IntegralCache, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{pow2, Rational, QS2};
use crate::report::Mode;
use crate::walsh::series::WalshSeries;

pub const DEFAULT_STAGE_COUNT: u32 = 6;

/// How each stage's step approximation is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StagePolicy {
    /// Every quantitative condition; an infeasible stage is an error.
    Paper,
    /// Paper mode, falling back to a one-stage cascade on the unrefined pieces.
    PaperElseToy,
    Toy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightOptions {
    pub m_max: u32,
    pub enumeration: EnumerationParams,
    pub policy: StagePolicy,
    pub index_bit_cap: u32,
    pub cell_limit: usize,
    pub piece_limit: usize,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions {
            m_max: DEFAULT_STAGE_COUNT,
            enumeration: EnumerationParams::default(),
            policy: StagePolicy::PaperElseToy,
            index_bit_cap: DEFAULT_INDEX_BIT_CAP,
            cell_limit: DEFAULT_CELL_LIMIT,
            piece_limit: 1 << 12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeightStage {
    pub m: u32,
    pub f: StepFunction,
    pub epsilon: Rational,
    pub mode: Mode,
    /// Why paper mode was not used.
    pub fallback: Option<String>,
    pub q: u32,
    /// The block covers indices `[2^start_level, 2^end_level)`.
    pub start_level: u32,
    pub end_level: u32,
    /// Signed coefficients, perturbation included.
    pub h: WalshSeries,
    pub e: DyadicSet,
    /// `1 + ∫|f_m| + (certified bound of the largest prefix norm of H_m)`.
    pub h_m: QS2,
    /// The step approximation the stage came from; absent after reloading.
    pub approx: Option<StepApprox>,
}

impl WeightStage {
    pub fn p(&self) -> WalshSeries {
        self.h.unsigned()
    }

    pub fn from_approx(m: u32, approx: StepApprox, fallback: Option<String>) -> Self {
        let mut cache = IntegralCache::new();
        let prefix = approx.h.prefix_norms(None, &mut cache).bound.total();
        let h_m = &(&QS2::one() + &approx.f.l1()) + &prefix;
        WeightStage {
            m,
            f: approx.f.clone(),
            epsilon: approx.epsilon.clone(),
            mode: approx.mode,
            fallback,
            q: approx.q,
            start_level: approx.n0,
            end_level: approx.end_level(),
            h: approx.h.clone(),
            e: approx.e_eps.clone(),
            h_m,
            approx: Some(approx),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeightFunction {
    pub delta: Rational,
    pub m_max: u32,
    pub n_tilde: u32,
    pub enumeration: EnumerationParams,
    pub stages: Vec<WeightStage>,
    /// `omega[n - 1] = Ω_n` for `n = 1..=M + 1`; `Ω_(M+1) = [0,1)`.
    pub omega: Vec<DyadicSet>,
    /// `mu_values[n - 1] = μ_n` for `n = 1..=M`.
    pub mu_values: Vec<QS2>,
    pub mu_remainder: QS2,
    pub mu: StepFunction,
    /// Always set: only `M` stages of the infinite construction were run.
    pub truncated: bool,
}

/// Smallest `n >= 1` with `2^-n < δ`, i.e. `floor(log_(1/2) δ) + 1`.
pub fn n_tilde(delta: &Rational) -> u32 {
    let mut n = 1;
    while pow2(-(n as i64)) >= *delta {
        n += 1;
    }
    n
}

/// `ε_m = 2^-(m+1)`.
pub fn stage_tolerance(m: u32) -> Rational {
    pow2(-(m as i64 + 1))
}

impl WeightFunction {
    /// Derive `Ω_n`, `μ_n` and `μ` from finished stages.
    pub fn from_stages(delta: Rational, enumeration: EnumerationParams, stages: Vec<WeightStage>) -> Result<Self> {
        if !(delta > Rational::from_integer(0.into()) && delta < Rational::one()) {
            return Err(Error::Precondition("need 0 < δ < 1".into()));
        }
        let m_max = stages.len() as u32;
        if stages.iter().enumerate().any(|(i, s)| s.m != i as u32 + 1) {
            return Err(Error::Invalid("stages must be numbered 1..M".into()));
        }
        let nt = n_tilde(&delta);
        let mut omega = vec![DyadicSet::unit(); m_max as usize + 1];
        for n in (1..=m_max as usize).rev() {
            omega[n - 1] = stages[n - 1].e.intersect(&omega[n]);
        }
        let mut product = QS2::one();
        let mut mu_values = Vec::with_capacity(m_max as usize);
        for (i, s) in stages.iter().enumerate() {
            product = &product * &s.h_m;
            mu_values.push(QS2::from(pow2(-(i as i64 + 2))).checked_div(&product)?);
        }
        let mu_remainder = QS2::from(pow2(-(m_max as i64 + 2))).checked_div(&product)?;
        let mu = if nt > m_max {
            StepFunction::constant(QS2::one())
        } else {
            let mut mu = StepFunction::on_set(&omega[nt as usize - 1], &QS2::one());
            for n in nt + 1..=m_max {
                let shell = omega[n as usize - 1].difference(&omega[n as usize - 2]);
                mu = mu.add(&StepFunction::on_set(&shell, &mu_values[n as usize - 1]));
            }
            mu.add(&StepFunction::on_set(&omega[m_max as usize - 1].complement(), &mu_remainder))
        };
        Ok(WeightFunction {
            delta,
            m_max,
            n_tilde: nt,
            enumeration,
            stages,
            omega,
            mu_values,
            mu_remainder,
            mu,
            truncated: true,
        })
    }

    /// `Ω_n`, with `Ω_n = [0,1)` past the last stage.
    pub fn omega(&self, n: u32) -> DyadicSet {
        assert!(n >= 1);
        self.omega.get(n as usize - 1).cloned().unwrap_or_else(DyadicSet::unit)
    }

    /// `E = Ω_ñ`.
    pub fn e(&self) -> DyadicSet {
        self.omega(self.n_tilde)
    }

    pub fn stage(&self, m: u32) -> Option<&WeightStage> {
        self.stages.get((m as usize).checked_sub(1)?)
    }

    /// Paper mode when every stage ran in paper mode.
    pub fn mode(&self) -> Mode {
        if self.stages.iter().all(|s| s.mode == Mode::Paper) {
            Mode::Paper
        } else {
            Mode::Toy
        }
    }

    /// Index level where the last stage ends.
    pub fn end_level(&self) -> u32 {
        self.stages.last().map(|s| s.end_level).unwrap_or(1)
    }

    /// All stage series in index order.
    pub fn series(&self) -> Result<WalshSeries> {
        let mut s = WalshSeries::new();
        for st in &self.stages {
            s.append(&st.h)?;
        }
        Ok(s)
    }
}

fn stage_request(f: &StepFunction, m: u32, n0: u32, cap: Option<QS2>, opts: &WeightOptions, policy: CascadePolicy) -> StepApproxRequest {
    let mut req = StepApproxRequest::new(f.clone(), stage_tolerance(m), n0, policy);
    req.index_bit_cap = opts.index_bit_cap;
    req.cell_limit = opts.cell_limit;
    req.piece_limit = opts.piece_limit;
    req.magnitude_cap = cap;
    if policy == CascadePolicy::Toy {
        req.q = Some(1);
        req.refine = false;
    }
    req
}

/// Build stage `m` on `f`, starting at level `n0`, with every coefficient below `cap`.
pub fn build_stage(m: u32, f: &StepFunction, n0: u32, cap: Option<QS2>, opts: &WeightOptions) -> Result<WeightStage> {
    let tag = |e: Error| match e {
        Error::Infeasible { stage, interval, reason } => {
            Error::Infeasible { stage, interval, reason: format!("weight stage {m}: {reason}") }
        }
        other => other,
    };
    let paper_cap = {
        let c = QS2::from(pow2(-2 * n0 as i64));
        Some(cap.clone().map_or(c.clone(), |x| x.min(c)))
    };
    let fallback = match opts.policy {
        StagePolicy::Toy => Some("toy policy".to_string()),
        StagePolicy::Paper | StagePolicy::PaperElseToy => {
            match build_step_approx(&stage_request(f, m, n0, paper_cap, opts, CascadePolicy::Paper)) {
                Ok(a) => return Ok(WeightStage::from_approx(m, a, None)),
                Err(e @ Error::Infeasible { .. }) if opts.policy == StagePolicy::PaperElseToy => Some(e.to_string()),
                Err(e) => return Err(tag(e)),
            }
        }
    };
    let a = build_step_approx(&stage_request(f, m, n0, cap, opts, CascadePolicy::Toy)).map_err(tag)?;
    Ok(WeightStage::from_approx(m, a, fallback))
}

/// Run stages `1..=M` on the enumerated `f_1, ..., f_M` and assemble the weight.
pub fn build_weight(delta: &Rational, opts: &WeightOptions) -> Result<WeightFunction> {
    if opts.m_max == 0 {
        return Err(Error::Precondition("need at least one stage".into()));
    }
    let functions: Vec<StepFunction> = StepEnumeration::new(opts.enumeration).take(opts.m_max as usize).collect();
    if functions.len() < opts.m_max as usize {
        return Err(Error::Precondition(format!("the enumeration has only {} functions", functions.len())));
    }
    let mut stages: Vec<WeightStage> = Vec::with_capacity(functions.len());
    for (i, f) in functions.iter().enumerate() {
        let n0 = stages.last().map_or(1, |s| s.end_level);
        let cap = stages.last().and_then(|s| s.h.blocks().last()).map(|b| b.magnitude.clone());
        stages.push(build_stage(i as u32 + 1, f, n0, cap, opts)?);
    }
    WeightFunction::from_stages(delta.clone(), opts.enumeration, stages)
}
