//! JSON form of a weight. Sets and `μ` are listed as intervals when short, and as shared
//! node tables otherwise; reloading recomputes `Ω_n` and `μ` from the stored stages.

use serde::{Deserialize, Serialize};

use super::build::{WeightFunction, WeightStage};
use super::enumerate::EnumerationParams;
use crate::dyadic::{FunctionRecord, SetRecord, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{format_rational, parse_rational, rational_str, Rational, QS2};
use crate::report::Mode;
use crate::walsh::series::{BlockRecord, WalshSeries};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub m: u32,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fallback: Option<String>,
    pub f: StepFunction,
    #[serde(with = "rational_str")]
    pub epsilon: Rational,
    pub q: u32,
    #[serde(rename = "N_start")]
    pub start_level: u32,
    #[serde(rename = "N_m")]
    pub end_level: u32,
    pub h_m: QS2,
    #[serde(rename = "E_m")]
    pub e: SetRecord,
    pub blocks: Vec<BlockRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub delta: String,
    #[serde(rename = "M_max")]
    pub m_max: u32,
    #[serde(rename = "n_tilde")]
    pub n_tilde: u32,
    pub truncated: bool,
    pub enumeration: EnumerationParams,
    pub stages: Vec<StageRecord>,
    pub mu_values: Vec<QS2>,
    pub mu_remainder: QS2,
    pub mu_pieces: FunctionRecord,
}

impl From<&WeightFunction> for WeightRecord {
    fn from(w: &WeightFunction) -> Self {
        WeightRecord {
            delta: format_rational(&w.delta),
            m_max: w.m_max,
            n_tilde: w.n_tilde,
            truncated: w.truncated,
            enumeration: w.enumeration,
            stages: w
                .stages
                .iter()
                .map(|s| StageRecord {
                    m: s.m,
                    mode: s.mode,
                    fallback: s.fallback.clone(),
                    f: s.f.clone(),
                    epsilon: s.epsilon.clone(),
                    q: s.q,
                    start_level: s.start_level,
                    end_level: s.end_level,
                    h_m: s.h_m.clone(),
                    e: SetRecord::new(&s.e),
                    blocks: s.h.to_records(),
                })
                .collect(),
            mu_values: w.mu_values.clone(),
            mu_remainder: w.mu_remainder.clone(),
            mu_pieces: FunctionRecord::new(&w.mu),
        }
    }
}

impl WeightRecord {
    /// Rebuild the weight; `Ω_n`, `μ_n` and `μ` are recomputed and must match the record.
    pub fn to_weight(&self) -> Result<WeightFunction> {
        let mut stages = Vec::with_capacity(self.stages.len());
        for r in &self.stages {
            stages.push(WeightStage {
                m: r.m,
                f: r.f.clone(),
                epsilon: r.epsilon.clone(),
                mode: r.mode,
                fallback: r.fallback.clone(),
                q: r.q,
                start_level: r.start_level,
                end_level: r.end_level,
                h: WalshSeries::from_records(&r.blocks)?,
                e: r.e.to_set()?,
                h_m: r.h_m.clone(),
                approx: None,
            });
        }
        let w = WeightFunction::from_stages(parse_rational(&self.delta)?, self.enumeration, stages)?;
        if w.m_max != self.m_max || w.n_tilde != self.n_tilde {
            return Err(Error::Invalid("stage count or ñ does not match the stages".into()));
        }
        if w.mu_values != self.mu_values || w.mu_remainder != self.mu_remainder {
            return Err(Error::Invalid("stored μ values differ from the recomputed ones".into()));
        }
        if w.mu != self.mu_pieces.to_function()? {
            return Err(Error::Invalid("stored μ differs from the recomputed one".into()));
        }
        Ok(w)
    }
}

pub fn weight_to_json(w: &WeightFunction) -> Result<String> {
    serde_json::to_string_pretty(&WeightRecord::from(w)).map_err(|e| Error::Invalid(e.to_string()))
}

pub fn weight_from_json(s: &str) -> Result<WeightFunction> {
    let r: WeightRecord = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    r.to_weight()
}
