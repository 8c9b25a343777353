//! Cut levels `K_i^(ν)` for the cascade.
//!
//! Stage `ν` places one flat atom on every cell of its cell list: stage 1 splits `Δ` into
//! cells of level `K1 + 1`, later stages take the maximal dyadic intervals of `Ẽ_(ν-1)`,
//! coarsest first. The atom on a cell of level `L` with top level `K` has coefficient
//! magnitude `2^(ν-1) |γ| 2^-(K+L)/2`, shared by the filler levels `K_(i-1)+1 .. K-1`.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::dyadic::{DyadicInterval, DyadicSet, DyadicTree};
use crate::error::{Error, Result};
use crate::exact::{format_rational, half_power, pow2, Rational, QS2};
use crate::flat::FlatPoly;
use crate::report::Mode;

/// Default cap on any cut level.
pub const DEFAULT_INDEX_BIT_CAP: u32 = 4096;
/// Default cap on the number of cells listed for one stage.
pub const DEFAULT_CELL_LIMIT: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LevelPolicy {
    /// Minimal levels subject to every quantitative condition of the proof.
    Paper,
    /// Minimal levels subject to the structural conditions only. `k1` defaults to
    /// `K - 1`, i.e. `Δ` itself is the single stage-one cell.
    ToyMinimal { k1: Option<i64> },
    /// Caller-supplied levels, one list per stage. `k1` defaults to the value making
    /// the stage-one count equal the length of the first list.
    ToyExplicit { k1: Option<i64>, levels: Vec<Vec<u32>> },
}

impl LevelPolicy {
    pub fn mode(&self) -> Mode {
        match self {
            LevelPolicy::Paper => Mode::Paper,
            _ => Mode::Toy,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScheduleRequest {
    pub n0: u32,
    pub delta: DyadicInterval,
    pub epsilon: Rational,
    pub gamma: Rational,
    pub q: u32,
    pub policy: LevelPolicy,
    pub index_bit_cap: u32,
    pub cell_limit: usize,
    /// Every coefficient must stay strictly below this.
    pub magnitude_cap: Option<QS2>,
}

impl ScheduleRequest {
    pub fn new(n0: u32, delta: DyadicInterval, epsilon: Rational, gamma: Rational, q: u32, policy: LevelPolicy) -> Self {
        ScheduleRequest {
            n0,
            delta,
            epsilon,
            gamma,
            q,
            policy,
            index_bit_cap: DEFAULT_INDEX_BIT_CAP,
            cell_limit: DEFAULT_CELL_LIMIT,
            magnitude_cap: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub nu: u32,
    pub cells: Vec<DyadicInterval>,
    pub levels: Vec<u32>,
    pub magnitudes: Vec<QS2>,
    pub atoms: Vec<Arc<FlatPoly>>,
    /// `Ẽ_ν`, the union of the atoms' `-1` sets.
    pub e_tilde: DyadicSet,
}

impl Stage {
    pub fn count(&self) -> usize {
        self.cells.len()
    }

    pub fn last_level(&self) -> u32 {
        *self.levels.last().expect("stages are never empty")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Feasibility {
    pub max_level: u32,
    /// Bit length of the largest index, `K_max + 1`.
    pub index_bits: u32,
    pub index_bit_cap: u32,
    pub largest_stage: usize,
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub n0: u32,
    pub delta: DyadicInterval,
    pub epsilon: Rational,
    pub gamma: Rational,
    pub q: u32,
    pub k1: i64,
    pub mode: Mode,
    pub stages: Vec<Stage>,
    pub feasibility: Feasibility,
}

#[derive(Serialize)]
struct StageView<'a> {
    nu: u32,
    #[serde(rename = "N")]
    count: usize,
    levels: &'a [u32],
    cell_levels: Vec<u32>,
}

#[derive(Serialize)]
struct ScheduleView<'a> {
    n0: u32,
    delta: &'a DyadicInterval,
    epsilon: String,
    gamma: String,
    q: u32,
    #[serde(rename = "K1")]
    k1: i64,
    mode: Mode,
    stages: Vec<StageView<'a>>,
    feasibility: &'a Feasibility,
}

impl Serialize for Schedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScheduleView {
            n0: self.n0,
            delta: &self.delta,
            epsilon: format_rational(&self.epsilon),
            gamma: format_rational(&self.gamma),
            q: self.q,
            k1: self.k1,
            mode: self.mode,
            stages: self
                .stages
                .iter()
                .map(|st| StageView {
                    nu: st.nu,
                    count: st.count(),
                    levels: &st.levels,
                    cell_levels: st.cells.iter().map(|c| c.level()).collect(),
                })
                .collect(),
            feasibility: &self.feasibility,
        }
        .serialize(s)
    }
}

impl Schedule {
    pub fn levels(&self) -> Vec<Vec<u32>> {
        self.stages.iter().map(|s| s.levels.clone()).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.count()).collect()
    }

    /// `n_q = K_(N_q)^(q) + 1`; the series ends at `2^(n_q)`.
    pub fn end_level(&self) -> u32 {
        self.stages.last().map(|s| s.last_level() + 1).unwrap_or(self.n0)
    }

    pub fn e_tilde(&self) -> &DyadicSet {
        &self.stages.last().expect("q >= 1").e_tilde
    }

    /// `E_q = Δ \ Ẽ_q`.
    pub fn e(&self) -> DyadicSet {
        DyadicSet::interval(&self.delta).difference(self.e_tilde())
    }

    /// `K_(i-1)^(ν)` for atom `i` of stage `nu` (both 1-based).
    pub fn previous_level(&self, nu: u32, i: usize) -> u32 {
        if i > 1 {
            self.stages[nu as usize - 1].levels[i - 2]
        } else if nu > 1 {
            self.stages[nu as usize - 2].last_level()
        } else {
            self.n0 - 1
        }
    }
}

/// `2^(ν-1) |γ| 2^-(K+L)/2`.
pub fn atom_magnitude(gamma: &Rational, nu: u32, level: u32, cell_level: u32) -> QS2 {
    half_power((level + cell_level) as i64).scale(&(gamma.abs() * pow2(nu as i64 - 1)))
}

/// Smallest `K1 > K` with `|γ| 2^-(K1+1)/2 < ε/2`.
pub fn minimal_k1(k: u32, epsilon: &Rational, gamma: &Rational, cap: u32) -> Result<u32> {
    let half_eps = QS2::from(epsilon / Rational::from_integer(2.into()));
    (k + 1..=cap)
        .find(|k1| half_power(*k1 as i64 + 1).scale(&gamma.abs()) < half_eps)
        .ok_or_else(|| Error::Infeasible { stage: 1, interval: 0, reason: format!("no K1 <= {cap}") })
}

struct Scan<'a> {
    req: &'a ScheduleRequest,
    nu: u32,
    count: usize,
    previous: u32,
    last_magnitude: Option<QS2>,
}

impl Scan<'_> {
    fn structural(&self, level: u32, cell: u32) -> bool {
        level > self.previous && level >= cell + 2 && (level - cell) % 2 == 0
    }

    fn monotone(&self, magnitude: &QS2) -> bool {
        match &self.last_magnitude {
            Some(last) => magnitude <= last,
            None => self.req.magnitude_cap.as_ref().is_none_or(|cap| magnitude < cap),
        }
    }

    /// Conditions b) and c).
    fn quantitative(&self, level: u32, magnitude: &QS2) -> bool {
        let eps = &self.req.epsilon;
        let b_claim = QS2::from(eps / Rational::from_integer(BigUint::from(self.count).into()) * pow2(-(self.nu as i64 + 1)));
        let b = magnitude.scale(&Rational::from_integer((level - self.previous).into()));
        let c = half_power(level as i64 + 1).scale(&(self.req.gamma.abs() * pow2(self.nu as i64)));
        b < b_claim && c < QS2::from(eps / Rational::from_integer(2.into()))
    }

    fn minimal(&self, cell: u32, paper: bool) -> Option<u32> {
        let mut level = (self.previous + 1).max(cell + 2);
        if (level - cell) % 2 == 1 {
            level += 1;
        }
        while level <= self.req.index_bit_cap {
            let m = atom_magnitude(&self.req.gamma, self.nu, level, cell);
            if self.monotone(&m) && (!paper || self.quantitative(level, &m)) {
                return Some(level);
            }
            level += 2;
        }
        None
    }
}

pub fn choose_schedule(req: &ScheduleRequest) -> Result<Schedule> {
    if !(req.epsilon.is_positive() && req.epsilon < Rational::from_integer(1.into())) {
        return Err(Error::Precondition("need 0 < ε < 1".into()));
    }
    if req.gamma.is_zero() {
        return Err(Error::Precondition("need γ ≠ 0".into()));
    }
    if req.q == 0 || req.n0 == 0 {
        return Err(Error::Precondition("need q >= 1 and n0 >= 1".into()));
    }
    let k = req.delta.level();
    let k1: i64 = match &req.policy {
        LevelPolicy::Paper => minimal_k1(k, &req.epsilon, &req.gamma, req.index_bit_cap)? as i64,
        LevelPolicy::ToyMinimal { k1 } => k1.unwrap_or(k as i64 - 1),
        LevelPolicy::ToyExplicit { k1, levels } => match k1 {
            Some(v) => *v,
            None => {
                let n = levels.first().map(|l| l.len()).unwrap_or(0);
                if n == 0 || !n.is_power_of_two() {
                    return Err(Error::Invalid(format!("stage-one level count {n} is not a power of two")));
                }
                k as i64 - 1 + n.trailing_zeros() as i64
            }
        },
    };
    if k1 < k as i64 - 1 {
        return Err(Error::Precondition(format!("K1 = {k1} gives cells coarser than Δ")));
    }
    if let LevelPolicy::ToyExplicit { levels, .. } = &req.policy {
        if levels.len() != req.q as usize {
            return Err(Error::Invalid(format!("{} level lists for q = {}", levels.len(), req.q)));
        }
    }

    let mut stages: Vec<Stage> = Vec::new();
    let mut previous = req.n0 - 1;
    let mut last_magnitude: Option<QS2> = None;
    for nu in 1..=req.q {
        let mut cells = match stages.last() {
            None => req.delta.subdivide((k1 + 1) as u32, req.cell_limit).map_err(|_| Error::Infeasible {
                stage: 1,
                interval: 0,
                reason: format!("N_1 = 2^{} cells exceed the cell limit {}", k1 + 1 - k as i64, req.cell_limit),
            })?,
            Some(prev) => {
                let count = prev.e_tilde.interval_count();
                let room = BigUint::from(req.index_bit_cap.saturating_sub(previous));
                if count > room {
                    return Err(Error::Infeasible {
                        stage: nu,
                        interval: 0,
                        reason: format!(
                            "N_{nu} = {count} atoms need levels beyond K = {previous} + {count}, over the cap {}",
                            req.index_bit_cap
                        ),
                    });
                }
                if count.to_usize().is_none_or(|c| c > req.cell_limit) {
                    return Err(Error::Infeasible {
                        stage: nu,
                        interval: 0,
                        reason: format!("N_{nu} = {count} cells exceed the cell limit {}", req.cell_limit),
                    });
                }
                prev.e_tilde.intervals(req.cell_limit)?
            }
        };
        cells.sort_by(|a, b| a.level().cmp(&b.level()).then_with(|| a.cmp(b)));
        let count = cells.len();
        let mut levels = Vec::with_capacity(count);
        let mut magnitudes = Vec::with_capacity(count);
        let mut atoms = Vec::with_capacity(count);
        for (i, cell) in cells.iter().enumerate() {
            let scan = Scan { req, nu, count, previous, last_magnitude: last_magnitude.clone() };
            let level = match &req.policy {
                LevelPolicy::Paper => scan.minimal(cell.level(), true),
                LevelPolicy::ToyMinimal { .. } => scan.minimal(cell.level(), false),
                LevelPolicy::ToyExplicit { levels: given, .. } => {
                    let given = &given[nu as usize - 1];
                    if given.len() != count {
                        return Err(Error::Invalid(format!(
                            "stage {nu} has {count} cells but {} levels were supplied",
                            given.len()
                        )));
                    }
                    let level = given[i];
                    if !scan.structural(level, cell.level()) {
                        return Err(Error::Invalid(format!(
                            "level {level} for cell {cell} after K = {previous} breaks increase or parity"
                        )));
                    }
                    Some(level)
                }
            };
            let level = level.ok_or_else(|| Error::Infeasible {
                stage: nu,
                interval: i + 1,
                reason: format!("no admissible level up to the cap {}", req.index_bit_cap),
            })?;
            let m = atom_magnitude(&req.gamma, nu, level, cell.level());
            atoms.push(Arc::new(FlatPoly::new(cell.clone(), level)?));
            levels.push(level);
            magnitudes.push(m.clone());
            previous = level;
            last_magnitude = Some(m);
        }
        let parts: Vec<(DyadicInterval, DyadicTree<bool>)> = atoms
            .iter()
            .map(|a| (a.delta.clone(), a.relative_signs().map(&|s| *s < 0)))
            .collect();
        let e_tilde = DyadicSet::from_tree(DyadicTree::assemble(&parts, false));
        stages.push(Stage { nu, cells, levels, magnitudes, atoms, e_tilde });
    }
    let largest_stage = stages.iter().map(|s| s.count()).max().unwrap_or(0);
    let max_level = previous;
    Ok(Schedule {
        n0: req.n0,
        delta: req.delta.clone(),
        epsilon: req.epsilon.clone(),
        gamma: req.gamma.clone(),
        q: req.q,
        k1,
        mode: req.policy.mode(),
        stages,
        feasibility: Feasibility { max_level, index_bits: max_level + 1, index_bit_cap: req.index_bit_cap, largest_stage },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::parse_rational;

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn iv(l: u64, k: u32) -> DyadicInterval {
        DyadicInterval::new(l, k).unwrap()
    }

    /// The stage-one conditions with uniform cells, in floating point.
    fn oracle_stage_one(n0: u32, k: u32, eps: f64, gamma: f64) -> (u32, Vec<u32>) {
        let k1 = (k + 1..).find(|k1| gamma.abs() * 2f64.powf(-(*k1 as f64 + 1.0) / 2.0) < eps / 2.0).unwrap();
        let n1 = 1u32 << (k1 - k + 1);
        let mut prev = n0 - 1;
        let mut out = vec![];
        for _ in 0..n1 {
            let kk = (prev + 1..)
                .find(|kk| {
                    *kk > k1
                        && (kk - k1 - 1) % 2 == 0
                        && *kk > k1 + 1
                        && ((kk - prev) as f64) * gamma.abs() * 2f64.powf(-((kk + k1 + 1) as f64) / 2.0)
                            < eps / (4.0 * n1 as f64)
                        && 2.0 * gamma.abs() * 2f64.powf(-((kk + 1) as f64) / 2.0) < eps / 2.0
                })
                .unwrap();
            out.push(kk);
            prev = kk;
        }
        (k1, out)
    }

    fn float(s: &str) -> f64 {
        match s.split_once('/') {
            Some((p, q)) => p.parse::<f64>().unwrap() / q.parse::<f64>().unwrap(),
            None => s.parse().unwrap(),
        }
    }

    #[test]
    fn paper_example() {
        let req = ScheduleRequest::new(1, iv(0, 1), r("9/10"), r("1"), 1, LevelPolicy::Paper);
        let s = choose_schedule(&req).unwrap();
        assert_eq!(s.k1, 2);
        assert_eq!(s.levels(), vec![vec![13, 15, 17, 19]]);
        assert_eq!(s.feasibility.index_bits, 20);
        assert_eq!(s.e_tilde().measure(), r("1/4"));
        assert_eq!(s.e().measure(), r("1/4"));
    }

    #[test]
    fn k1_scan() {
        assert_eq!(minimal_k1(1, &r("1/2"), &r("1"), 100).unwrap(), 4);
        assert_eq!(minimal_k1(1, &r("9/10"), &r("1"), 100).unwrap(), 2);
    }

    #[test]
    fn matches_float_oracle() {
        for (l, k) in [(0u64, 0u32), (0, 1), (1, 2)] {
            for eps in ["1/2", "9/10"] {
                for gamma in ["1", "-2", "1/3"] {
                    let req = ScheduleRequest::new(1, iv(l, k), r(eps), r(gamma), 1, LevelPolicy::Paper);
                    let s = choose_schedule(&req).unwrap();
                    let (e, g) = (float(eps), float(gamma));
                    let (k1, levels) = oracle_stage_one(1, k, e, g);
                    assert_eq!(s.k1, k1 as i64, "Δ=[{l},{k}] ε={eps} γ={gamma}");
                    assert_eq!(s.levels()[0], levels, "Δ=[{l},{k}] ε={eps} γ={gamma}");
                }
            }
        }
    }

    #[test]
    fn paper_q2_is_detected_infeasible() {
        let req = ScheduleRequest::new(1, iv(0, 1), r("9/10"), r("1"), 2, LevelPolicy::Paper);
        match choose_schedule(&req) {
            Err(Error::Infeasible { stage, .. }) => assert_eq!(stage, 2),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn toy_explicit_example() {
        let policy = LevelPolicy::ToyExplicit { k1: None, levels: vec![vec![5, 7]] };
        let s = choose_schedule(&ScheduleRequest::new(1, DyadicInterval::unit(), r("1/2"), r("1"), 1, policy)).unwrap();
        assert_eq!(s.mode, Mode::Toy);
        assert_eq!(s.k1, 0);
        assert_eq!(s.counts(), vec![2]);
        let bad = LevelPolicy::ToyExplicit { k1: None, levels: vec![vec![5, 7]] };
        assert!(choose_schedule(&ScheduleRequest::new(1, iv(0, 1), r("1/2"), r("1"), 1, bad)).is_err());
    }

    #[test]
    fn toy_minimal_recursion_measures() {
        for q in 1..=3u32 {
            let req = ScheduleRequest::new(1, iv(1, 2), r("1/2"), r("1"), q, LevelPolicy::ToyMinimal { k1: None });
            let s = choose_schedule(&req).unwrap();
            let mut last = 0;
            for st in &s.stages {
                assert_eq!(st.e_tilde.measure(), r("1/4") * pow2(-(st.nu as i64)));
                assert!(st.levels.iter().all(|k| *k > last));
                last = st.last_level();
                assert!(st.magnitudes.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }

    #[test]
    fn magnitude_cap_pushes_levels_up() {
        let mut req = ScheduleRequest::new(1, DyadicInterval::unit(), r("1/2"), r("1"), 1, LevelPolicy::ToyMinimal { k1: None });
        let free = choose_schedule(&req).unwrap();
        req.magnitude_cap = Some(QS2::from_ratio(1, 100));
        let capped = choose_schedule(&req).unwrap();
        assert!(capped.stages[0].levels[0] > free.stages[0].levels[0]);
        assert!(capped.stages[0].magnitudes[0] < QS2::from_ratio(1, 100));
    }
}
