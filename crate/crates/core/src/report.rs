//! Verification reports shared by every construction.

use serde::{Deserialize, Serialize};

use num_traits::Zero;

use crate::exact::{format_rational, QS2};
use crate::walsh::series::{Bound, Method};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every quantitative condition of the proof was enforced.
    Paper,
    /// Structure only; quantitative claims are reported but not certified.
    Toy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claimed_bound: Option<QS2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub computed_value: Option<QS2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub computed_decimal: Option<String>,
    /// Extra rational slack added to `computed_value` (perturbation mass).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<String>,
    pub method: Method,
    pub mode: Mode,
    pub required: bool,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// `bound < claim`.
    pub fn below(name: &str, bound: &Bound, claim: &QS2, mode: Mode, required: bool) -> Self {
        let total = bound.total();
        Check {
            name: name.into(),
            claimed_bound: Some(claim.clone()),
            computed_decimal: Some(total.to_decimal(12)),
            computed_value: Some(bound.value.clone()),
            perturbation: (!bound.perturbation.is_zero()).then(|| format_rational(&bound.perturbation)),
            method: bound.method,
            mode,
            required,
            pass: total < *claim,
            detail: None,
        }
    }

    /// `value == expected`.
    pub fn equal(name: &str, value: &QS2, expected: &QS2, mode: Mode) -> Self {
        Check {
            name: name.into(),
            claimed_bound: Some(expected.clone()),
            computed_value: Some(value.clone()),
            computed_decimal: Some(value.to_decimal(12)),
            perturbation: None,
            method: Method::Exact,
            mode,
            required: true,
            pass: value == expected,
            detail: None,
        }
    }

    /// `value > bound`.
    pub fn above(name: &str, value: &QS2, bound: &QS2, mode: Mode, required: bool) -> Self {
        Check {
            name: name.into(),
            claimed_bound: Some(bound.clone()),
            computed_value: Some(value.clone()),
            computed_decimal: Some(value.to_decimal(12)),
            perturbation: None,
            method: Method::Exact,
            mode,
            required,
            pass: value > bound,
            detail: None,
        }
    }

    pub fn flag(name: &str, pass: bool, mode: Mode, required: bool, detail: Option<String>) -> Self {
        Check {
            name: name.into(),
            claimed_bound: None,
            computed_value: None,
            computed_decimal: None,
            perturbation: None,
            method: Method::Exact,
            mode,
            required,
            pass,
            detail,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub subject: String,
    pub mode: Mode,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn new(subject: impl Into<String>, mode: Mode, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass || !c.required);
        VerificationReport { subject: subject.into(), mode, pass, checks }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.required && !c.pass).collect()
    }
}
