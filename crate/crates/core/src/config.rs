//! Run configuration shared by the command line and the bindings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cascade::schedule::{DEFAULT_CELL_LIMIT, DEFAULT_INDEX_BIT_CAP};
use crate::dyadic::DEFAULT_J_MAX;
use crate::error::{Error, Result};
use crate::weight::{EnumerationParams, StagePolicy, WeightOptions};

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "WALSHU_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerationBudget {
    /// Largest level `L` of enumerated step functions.
    #[serde(rename = "L", skip_serializing_if = "Option::is_none", default)]
    pub max_level: Option<u32>,
    /// Largest value weight `D`.
    #[serde(rename = "D", skip_serializing_if = "Option::is_none", default)]
    pub max_weight: Option<u32>,
    /// Number of enumerated functions processed into weight stages.
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "J_max")]
    pub j_max: u32,
    pub index_bit_cap: u32,
    pub cell_limit: usize,
    pub enumeration: EnumerationBudget,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            j_max: DEFAULT_J_MAX,
            index_bit_cap: DEFAULT_INDEX_BIT_CAP,
            cell_limit: DEFAULT_CELL_LIMIT,
            enumeration: EnumerationBudget { max_level: None, max_weight: None, count: 6 },
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("J_max", self.j_max as u64),
            ("index_bit_cap", self.index_bit_cap as u64),
            ("cell_limit", self.cell_limit as u64),
            ("enumeration.count", self.enumeration.count as u64),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Precondition(format!("{name} must be positive")));
            }
        }
        if self.enumeration.max_level.is_some_and(|l| l == 0) && self.enumeration.max_weight.is_some_and(|d| d < 2) {
            return Err(Error::Precondition("enumeration caps leave no functions".into()));
        }
        if self.enumeration.max_weight == Some(0) {
            return Err(Error::Precondition("D must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// `output_dir`, unless the environment names another.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output_dir.clone(),
        }
    }

    pub fn weight_options(&self) -> WeightOptions {
        WeightOptions {
            m_max: self.enumeration.count,
            enumeration: EnumerationParams {
                max_level: self.enumeration.max_level,
                max_weight: self.enumeration.max_weight,
            },
            policy: StagePolicy::PaperElseToy,
            index_bit_cap: self.index_bit_cap,
            cell_limit: self.cell_limit,
            ..WeightOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.enumeration.max_level = Some(3);
        c.seed = 17;
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), c.to_json());
    }

    #[test]
    fn rejects_zero_budgets_and_unknown_fields() {
        let mut c = RunConfig::default();
        c.j_max = 0;
        assert!(RunConfig::from_json(&c.to_json()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::default().to_json()).unwrap();
        v["extra"] = 1.into();
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }
}
