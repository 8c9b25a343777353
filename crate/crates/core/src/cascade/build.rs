//! Assembly of the polynomial pair `(P, H)` from a schedule.

use num_traits::Signed;
use serde::Serialize;

use super::schedule::Schedule;
use crate::dyadic::{DyadicInterval, DyadicSet, DyadicTree, SetRecord, StepFunction};
use crate::error::Result;
use crate::exact::{pow2, QS2};
use crate::walsh::series::{BlockKind, BlockRecord, CoefficientBlock, IndexBlock, WalshSeries};

#[derive(Clone, Debug)]
pub struct CascadePair {
    pub schedule: Schedule,
    /// Signed series: filler signs `+1`, atom signs from the flat polynomials.
    pub h: WalshSeries,
    /// The same magnitudes with every sign `+1`.
    pub p: WalshSeries,
    /// `E_q = Δ \ Ẽ_q`.
    pub e: DyadicSet,
    pub e_tilde: DyadicSet,
    /// `H̃_ν` for `ν = 1..q`: the sum of the atoms of stages `1..ν`.
    pub h_tilde: Vec<StepFunction>,
}

impl CascadePair {
    pub fn q(&self) -> u32 {
        self.schedule.q
    }

    /// `H̃_q`.
    pub fn h_tilde_q(&self) -> &StepFunction {
        self.h_tilde.last().expect("q >= 1")
    }

    /// Filler blocks, as `(level, magnitude)`.
    pub fn fillers(&self) -> impl Iterator<Item = (u32, &QS2)> {
        self.h.blocks().iter().filter(|b| b.kind == BlockKind::Filler).map(|b| match b.range {
            IndexBlock::Level(n) => (n, &b.magnitude),
            IndexBlock::Zero => (0, &b.magnitude),
        })
    }
}

#[derive(Serialize)]
pub struct CascadeRecord<'a> {
    pub schedule: &'a Schedule,
    pub e: SetRecord,
    pub e_tilde: SetRecord,
    pub blocks: Vec<BlockRecord>,
}

impl<'a> From<&'a CascadePair> for CascadeRecord<'a> {
    fn from(c: &'a CascadePair) -> Self {
        CascadeRecord { schedule: &c.schedule, e: SetRecord::new(&c.e), e_tilde: SetRecord::new(&c.e_tilde), blocks: c.h.to_records() }
    }
}

pub fn build_cascade(schedule: &Schedule) -> Result<CascadePair> {
    let negate = schedule.gamma.is_negative();
    let mut h = WalshSeries::new();
    let mut previous = schedule.n0 - 1;
    let mut h_tilde = Vec::with_capacity(schedule.stages.len());
    let mut acc = StepFunction::zero();
    for stage in &schedule.stages {
        for ((atom, level), magnitude) in stage.atoms.iter().zip(&stage.levels).zip(&stage.magnitudes) {
            for n in previous + 1..*level {
                h.push(CoefficientBlock::plus(IndexBlock::Level(n), magnitude.clone(), BlockKind::Filler))?;
            }
            h.push(CoefficientBlock::atom(atom.clone(), magnitude.clone(), negate))?;
            previous = *level;
        }
        let c = QS2::from(&schedule.gamma * pow2(stage.nu as i64 - 1));
        let parts: Vec<(DyadicInterval, DyadicTree<QS2>)> = stage
            .atoms
            .iter()
            .map(|a| (a.delta.clone(), a.relative_function(&c).tree().clone()))
            .collect();
        acc = acc.add(&StepFunction::from_tree(DyadicTree::assemble(&parts, QS2::zero())));
        h_tilde.push(acc.clone());
    }
    Ok(CascadePair {
        p: h.unsigned(),
        h,
        e: schedule.e(),
        e_tilde: schedule.e_tilde().clone(),
        h_tilde,
        schedule: schedule.clone(),
    })
}
