//! Python bindings for `qflow_core`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qflow_core::conformal_ops::{self, liouville_energy};
use qflow_core::mobius_gauge::{self, GaugeOptions, MobiusBoost};
use qflow_core::morse_gate::{check_prescribed, MorseOptions};
use qflow_core::s4_spectral::{self as spectral, GridSpec, SpectralField, SphereTransform};
use qflow_core::workbench::{self, RunConfig};
use qflow_core::QflowError;

fn py_err(e: QflowError) -> PyErr {
    match e {
        QflowError::Parse(_) | QflowError::Config(_) | QflowError::Mismatch { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Real spherical-harmonic expansion on S⁴ up to a band limit.
#[pyclass(name = "Field", from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: SpectralField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(band_limit: usize, coeffs: Vec<f64>) -> PyResult<Self> {
        if coeffs.len() != spectral::coeff_count(band_limit) {
            return Err(PyValueError::new_err(format!(
                "band limit {band_limit} needs {} coefficients, got {}",
                spectral::coeff_count(band_limit),
                coeffs.len()
            )));
        }
        Ok(PyField { inner: SpectralField::from_coeffs(band_limit, coeffs) })
    }

    #[staticmethod]
    fn zeros(band_limit: usize) -> Self {
        PyField { inner: SpectralField::zeros(band_limit) }
    }

    #[staticmethod]
    fn constant(band_limit: usize, c: f64) -> Self {
        PyField { inner: SpectralField::constant(band_limit, c) }
    }

    /// The coordinate function `x_{axis+1}`.
    #[staticmethod]
    fn coordinate(band_limit: usize, axis: usize) -> PyResult<Self> {
        if axis >= 5 {
            return Err(PyValueError::new_err("axis must be in 0..5"));
        }
        Ok(PyField { inner: SpectralField::coordinate(band_limit, axis) })
    }

    #[getter]
    fn band_limit(&self) -> usize {
        self.inner.band_limit()
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    fn scaled(&self, a: f64) -> Self {
        PyField { inner: self.inner.scaled(a) }
    }

    fn evaluate(&self, point: [f64; 5]) -> PyResult<f64> {
        spectral::evaluate_at(&self.inner, &point).map_err(py_err)
    }

    fn paneitz(&self) -> Self {
        PyField { inner: spectral::apply_paneitz(&self.inner) }
    }

    fn laplacian(&self) -> Self {
        PyField { inner: spectral::apply_laplacian(&self.inner) }
    }

    fn liouville_energy(&self) -> f64 {
        liouville_energy(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.coeffs().len()
    }

    fn __repr__(&self) -> String {
        format!("Field(band_limit={}, coeffs={})", self.inner.band_limit(), self.inner.coeffs().len())
    }
}

/// Quadrature grid with forward and inverse transforms.
#[pyclass(name = "Transform")]
struct PyTransform {
    inner: SphereTransform,
}

#[pymethods]
impl PyTransform {
    #[new]
    #[pyo3(signature = (band_limit, oversample=2))]
    fn new(band_limit: usize, oversample: usize) -> PyResult<Self> {
        let spec = GridSpec::new(band_limit, oversample).map_err(py_err)?;
        Ok(PyTransform { inner: SphereTransform::new(&spec).map_err(py_err)? })
    }

    #[getter]
    fn band_limit(&self) -> usize {
        self.inner.band_limit()
    }

    fn nodes(&self) -> Vec<[f64; 5]> {
        self.inner.grid().nodes().to_vec()
    }

    /// Quadrature weights for `dv_c`.
    fn weights(&self) -> Vec<f64> {
        self.inner.grid().weights()
    }

    fn synthesize(&self, field: &PyField) -> PyResult<Vec<f64>> {
        self.inner.synthesize_values(&field.inner).map_err(py_err)
    }

    fn analyze(&self, values: Vec<f64>) -> PyResult<PyField> {
        if values.len() != self.inner.grid().len() {
            return Err(PyValueError::new_err(format!("expected {} nodal values", self.inner.grid().len())));
        }
        Ok(PyField { inner: self.inner.analyze_values(&values) })
    }

    fn q_curvature(&self, u: &PyField) -> PyResult<Vec<f64>> {
        conformal_ops::q_curvature(&self.inner, &u.inner).map(|g| g.into_values()).map_err(py_err)
    }

    fn volume(&self, u: &PyField) -> PyResult<f64> {
        conformal_ops::volume(&self.inner, &u.inner).map_err(py_err)
    }

    fn beckner_gap(&self, u: &PyField) -> PyResult<f64> {
        conformal_ops::beckner_gap(&self.inner, &u.inner).map_err(py_err)
    }

    fn center_of_mass(&self, u: &PyField) -> PyResult<[f64; 5]> {
        mobius_gauge::center_of_mass(&self.inner, &u.inner).map_err(py_err)
    }

    /// Conformal factor of the boost with the given pole and dilation.
    fn boost_factor(&self, pole: [f64; 5], t: f64) -> PyResult<PyField> {
        let b = MobiusBoost::along(pole, t).map_err(py_err)?;
        Ok(PyField { inner: b.factor_field(&self.inner).map_err(py_err)? })
    }

    /// Returns `(v, boost_parameter)` with `v` in the zero center-of-mass gauge.
    fn normalize(&self, u: &PyField) -> PyResult<(PyField, [f64; 5])> {
        let g = mobius_gauge::normalize(&self.inner, &u.inner, &GaugeOptions::default()).map_err(py_err)?;
        Ok((PyField { inner: g.v }, g.boost.parameter()))
    }
}

#[pyfunction]
fn paneitz_eigenvalue(k: usize) -> f64 {
    spectral::paneitz_eigenvalue(k)
}

/// Critical-point census and existence verdict for an `f` spec.
#[pyfunction]
fn check_f<'py>(py: Python<'py>, spec: &str) -> PyResult<Bound<'py, PyDict>> {
    let f = workbench::parse_f_field(spec).map_err(py_err)?;
    let r = check_prescribed(&f, &MorseOptions::default()).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("m", r.m.to_vec())?;
    d.set_item("feasible", r.feasible)?;
    d.set_item("condition_satisfied", r.condition_satisfied)?;
    d.set_item("degree_sum", r.degree_sum)?;
    d.set_item("violations", r.hypothesis_violations.clone())?;
    d.set_item("report", r.to_text())?;
    Ok(d)
}

/// Runs the flow from config text; writes artifacts to `out_dir` when given.
#[pyfunction]
#[pyo3(signature = (config, out_dir=None))]
fn run<'py>(py: Python<'py>, config: &str, out_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let mut c = RunConfig::parse(config).map_err(py_err)?;
    let tmp;
    c.out_dir = match out_dir {
        Some(d) => d,
        None => {
            tmp = tempfile::tempdir().map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
            tmp.path().to_path_buf()
        }
    };
    let (v, wall) = py.detach(|| workbench::execute_run(&c)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("verdict", v.kind.name())?;
    d.set_item("final_t", v.final_t)?;
    d.set_item("final_alpha", v.final_alpha)?;
    d.set_item("accepted", v.accepted)?;
    d.set_item("rejected", v.rejected)?;
    d.set_item("calabi", v.steps.last().map(|s| s.calabi))?;
    d.set_item("flow_energy", v.steps.iter().map(|s| s.e_f).collect::<Vec<_>>())?;
    d.set_item("concentration_point", v.concentration_point)?;
    d.set_item("warnings", v.warnings.clone())?;
    d.set_item("wall_time", wall)?;
    d.set_item("final_u", PyField { inner: v.final_u })?;
    Ok(d)
}

#[pymodule]
fn qflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyTransform>()?;
    m.add_function(wrap_pyfunction!(paneitz_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(check_f, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("VOLUME_S4", spectral::VOLUME_S4)?;
    Ok(())
}
