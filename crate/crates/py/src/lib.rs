//! Python bindings. Exact values cross the boundary as strings (`"p/q"`, `"a+b*sqrt2"`),
//! reports and records as JSON text.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use walsh_universal::cascade::{build_cascade, choose_schedule, verify_cascade, LevelPolicy, ScheduleRequest, VerifyOptions};
use walsh_universal::config::RunConfig;
use walsh_universal::dyadic::{DyadicInterval, DyadicSet, Piece, StepFunction};
use walsh_universal::exact::{parse_rational, DyadicRational, QS2};
use walsh_universal::flat::{verify_flat_poly, FlatPoly};
use walsh_universal::report::VerificationReport;
use walsh_universal::universal::{
    approximate, build_universal, convergence_csv, convergence_report, universal_from_json, universal_to_json,
    verify_selection, verify_universal, SelectOptions, UniversalFunction,
};
use walsh_universal::walsh::{fwht, inverse_fwht, verify_walsh, walsh_eval_u64, WalshVerifyOptions};
use walsh_universal::weight::{build_weight, verify_weight, weight_from_json, weight_to_json, WeightFunction};

fn err(e: walsh_universal::Error) -> PyErr {
    match e {
        walsh_universal::Error::Parse(_) | walsh_universal::Error::Invalid(_) | walsh_universal::Error::Precondition(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn report_json(r: &VerificationReport) -> String {
    serde_json::to_string(r).expect("reports serialize")
}

fn qs2(s: &str) -> PyResult<QS2> {
    s.parse::<QS2>().map_err(err)
}

/// A dyadic step function on `[0,1)` with exact values.
#[pyclass(name = "StepFunction", frozen)]
struct PyStepFunction(StepFunction);

#[pymethods]
impl PyStepFunction {
    /// From `(l, K, value)` triples covering `[0,1)`.
    #[new]
    fn new(pieces: Vec<(u64, u32, String)>) -> PyResult<Self> {
        let mut ps = Vec::with_capacity(pieces.len());
        for (l, k, v) in pieces {
            ps.push(Piece { cell: DyadicInterval::new(l, k).map_err(err)?, value: qs2(&v)? });
        }
        StepFunction::from_pieces(&ps).map(PyStepFunction).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let ps: Vec<Piece> = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        StepFunction::from_pieces(&ps).map(PyStepFunction).map_err(err)
    }

    /// `(l, K, value)` triples of the maximal pieces.
    fn pieces(&self) -> PyResult<Vec<(String, u32, String)>> {
        let ps = self.0.pieces(1 << 16).map_err(err)?;
        Ok(ps.into_iter().map(|p| (p.cell.index().to_string(), p.cell.level(), p.value.to_string())).collect())
    }

    /// Value at `n / 2^level`.
    fn eval(&self, n: u64, level: u32) -> String {
        self.0.eval(&DyadicRational::from_u64(n, level)).to_string()
    }

    fn integral(&self) -> String {
        self.0.integral().to_string()
    }

    fn l1(&self) -> String {
        self.0.l1().to_string()
    }

    fn __add__(&self, other: &PyStepFunction) -> Self {
        PyStepFunction(self.0.add(&other.0))
    }

    fn __sub__(&self, other: &PyStepFunction) -> Self {
        PyStepFunction(self.0.sub(&other.0))
    }

    fn __eq__(&self, other: &PyStepFunction) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("StepFunction({:?})", self.0)
    }
}

/// The constant-magnitude polynomial on indices `[2^M, 2^(M+1))` supported on `Δ`.
#[pyclass(name = "FlatPoly", frozen)]
struct PyFlatPoly(FlatPoly);

#[pymethods]
impl PyFlatPoly {
    #[new]
    #[pyo3(signature = (k, m, l = 0))]
    fn new(k: u32, m: u32, l: u64) -> PyResult<Self> {
        FlatPoly::new(DyadicInterval::new(l, k).map_err(err)?, m).map(PyFlatPoly).map_err(err)
    }

    #[getter]
    fn magnitude(&self) -> String {
        self.0.magnitude.to_string()
    }

    fn coefficient(&self, k: u64) -> String {
        self.0.coefficient(&k.into()).to_string()
    }

    fn function(&self) -> PyStepFunction {
        PyStepFunction(self.0.function(&QS2::one()))
    }

    #[pyo3(signature = (budget = 22))]
    fn verify(&self, budget: u32) -> PyResult<String> {
        verify_flat_poly(&self.0, budget).map(|r| report_json(&r)).map_err(err)
    }
}

#[pyclass(name = "Weight", frozen)]
struct PyWeight(WeightFunction);

#[pymethods]
impl PyWeight {
    #[staticmethod]
    #[pyo3(signature = (delta = "1/4", m_max = 6))]
    fn build(delta: &str, m_max: u32) -> PyResult<Self> {
        let mut opts = RunConfig::default().weight_options();
        opts.m_max = m_max;
        build_weight(&parse_rational(delta).map_err(err)?, &opts).map(PyWeight).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        weight_from_json(text).map(PyWeight).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        weight_to_json(&self.0).map_err(err)
    }

    fn verify(&self) -> String {
        report_json(&verify_weight(&self.0))
    }

    #[getter]
    fn n_tilde(&self) -> u32 {
        self.0.n_tilde
    }

    #[getter]
    fn mu_values(&self) -> Vec<String> {
        self.0.mu_values.iter().map(|v| v.to_string()).collect()
    }

    /// `|{μ = 1}|`.
    fn measure_mu_one(&self) -> String {
        let s: DyadicSet = self.0.mu.level_set(&|v| *v == QS2::one());
        walsh_universal::exact::format_rational(&s.measure())
    }

    fn mu(&self) -> PyStepFunction {
        PyStepFunction(self.0.mu.clone())
    }
}

#[pyclass(name = "Universal", frozen)]
struct PyUniversal(UniversalFunction);

#[pymethods]
impl PyUniversal {
    #[staticmethod]
    #[pyo3(signature = (delta = "1/4", m_max = 6))]
    fn build(delta: &str, m_max: u32) -> PyResult<Self> {
        let mut opts = RunConfig::default().weight_options();
        opts.m_max = m_max;
        build_universal(&parse_rational(delta).map_err(err)?, &opts).map(PyUniversal).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        universal_from_json(text).map(PyUniversal).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        universal_to_json(&self.0).map_err(err)
    }

    fn verify(&self) -> String {
        report_json(&verify_universal(&self.0))
    }

    fn stage_count(&self) -> u32 {
        self.0.stage_count()
    }

    /// `a_k` with its stage sign, exactly.
    fn coefficient(&self, k: u64) -> Option<String> {
        self.0.signed.exact_coefficient(k).map(|c| c.to_string())
    }

    /// Sign selection towards `target`: `(report JSON, convergence CSV)`.
    #[pyo3(signature = (target, depth = 3))]
    fn approximate(&self, py: Python<'_>, target: &PyStepFunction, depth: u32) -> PyResult<(String, String)> {
        let g = &self.0;
        let f = &target.0;
        let sel = py
            .detach(|| approximate(g, f, &SelectOptions { depth, allow_fallback: true }))
            .map_err(err)?;
        let csv = convergence_csv(&convergence_report(&sel)).map_err(err)?;
        Ok((report_json(&verify_selection(g, &sel)), csv))
    }
}

#[pyfunction]
fn walsh_eval(n: u64, x_numerator: u64, x_level: u32) -> i8 {
    walsh_eval_u64(n, &DyadicRational::from_u64(x_numerator, x_level))
}

/// Exact Paley-ordered coefficients of the grid values.
#[pyfunction]
#[pyo3(signature = (values, budget = 22))]
fn walsh_transform(values: Vec<String>, budget: u32) -> PyResult<Vec<String>> {
    let v = values.iter().map(|s| qs2(s)).collect::<PyResult<Vec<_>>>()?;
    Ok(fwht(&v, budget).map_err(err)?.coefficients.iter().map(|c| c.to_string()).collect())
}

#[pyfunction]
#[pyo3(signature = (coefficients, budget = 22))]
fn inverse_walsh_transform(coefficients: Vec<String>, budget: u32) -> PyResult<Vec<String>> {
    let c = coefficients.iter().map(|s| qs2(s)).collect::<PyResult<Vec<_>>>()?;
    let level = c.len().trailing_zeros();
    let arr = walsh_universal::walsh::CoefficientArray { level, coefficients: c };
    Ok(inverse_fwht(&arr, budget).map_err(err)?.iter().map(|v| v.to_string()).collect())
}

#[pyfunction]
#[pyo3(name = "verify_walsh", signature = (max_m = 8, exact_level = 12, float_level = 20, seed = 0))]
fn py_verify_walsh(max_m: u32, exact_level: u32, float_level: u32, seed: u64) -> String {
    report_json(&verify_walsh(&WalshVerifyOptions { max_m, exact_level, float_level, seed, ..Default::default() }))
}

/// Build and verify the cascade on `Δ = [l 2^-K, (l+1) 2^-K)`.
#[pyfunction]
#[pyo3(signature = (eps, gamma, delta_l = 0, delta_k = 0, q = 1, toy = false))]
fn verify_cascade_on(py: Python<'_>, eps: &str, gamma: &str, delta_l: u64, delta_k: u32, q: u32, toy: bool) -> PyResult<String> {
    let policy = if toy { LevelPolicy::ToyMinimal { k1: None } } else { LevelPolicy::Paper };
    let req = ScheduleRequest::new(
        1,
        DyadicInterval::new(delta_l, delta_k).map_err(err)?,
        parse_rational(eps).map_err(err)?,
        parse_rational(gamma).map_err(err)?,
        q,
        policy,
    );
    py.detach(|| {
        let pair = build_cascade(&choose_schedule(&req)?)?;
        Ok(report_json(&verify_cascade(&pair, &VerifyOptions::default())))
    })
    .map_err(err)
}

#[pymodule]
fn walsh_universal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStepFunction>()?;
    m.add_class::<PyFlatPoly>()?;
    m.add_class::<PyWeight>()?;
    m.add_class::<PyUniversal>()?;
    m.add_function(wrap_pyfunction!(walsh_eval, m)?)?;
    m.add_function(wrap_pyfunction!(walsh_transform, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_walsh_transform, m)?)?;
    m.add_function(wrap_pyfunction!(py_verify_walsh, m)?)?;
    m.add_function(wrap_pyfunction!(verify_cascade_on, m)?)?;
    Ok(())
}
