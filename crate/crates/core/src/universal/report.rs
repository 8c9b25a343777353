//! Per-stage convergence table of a sign selection.

use serde::Serialize;

use super::select::SignSelection;
use crate::error::{Error, Result};
use crate::report::Mode;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub q: u32,
    pub nu_q: u32,
    /// The partial sum runs over indices below `2^N`.
    #[serde(rename = "N")]
    pub n: u32,
    pub weighted_error: String,
    pub weighted_error_decimal: String,
    pub bound: String,
    pub pass: bool,
    pub mode: Mode,
}

pub fn convergence_report(sel: &SignSelection) -> Vec<ConvergenceRow> {
    sel.steps
        .iter()
        .map(|s| {
            let total = s.error.total();
            ConvergenceRow {
                q: s.q,
                nu_q: s.nu,
                n: s.end_level,
                weighted_error: total.to_string(),
                weighted_error_decimal: total.to_decimal(12),
                bound: s.bound.to_string(),
                pass: total < s.bound,
                mode: if s.certified { Mode::Paper } else { Mode::Toy },
            }
        })
        .collect()
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::StepFunction;
    use crate::exact::{parse_rational, QS2};
    use crate::universal::{approximate, build_universal, SelectOptions};
    use crate::weight::WeightOptions;

    #[test]
    fn one_row_per_stage_and_decimals_agree() {
        let g = build_universal(&parse_rational("1/4").unwrap(), &WeightOptions { m_max: 3, ..Default::default() }).unwrap();
        let f = StepFunction::constant(QS2::from_int(2));
        let sel = approximate(&g, &f, &SelectOptions { depth: 1, allow_fallback: true }).unwrap();
        let rows = convergence_report(&sel);
        assert_eq!(rows.len(), 1);
        let exact: QS2 = rows[0].weighted_error.parse().unwrap();
        let dec: f64 = rows[0].weighted_error_decimal.parse().unwrap();
        assert!((exact.to_f64() - dec).abs() < 1e-11);
        let csv = convergence_csv(&rows).unwrap();
        assert!(csv.starts_with("q,nu_q,N,weighted_error,weighted_error_decimal,bound,pass,mode\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
