use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use complementary::fem::{self, PointLocator};
use complementary::geometry::{LossCoefficient, MediaSpec, Point, RadialLayout, RingSource, SourceSpec};
use complementary::harness::{self, output::to_json, ExperimentConfig, FemContext};
use complementary::spectral::{self, RadialField};
use complementary::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Refused(_) | Error::RasterTooLarge { .. } => {
            PyValueError::new_err(e.to_string())
        }
        Error::InvalidLayout(_) | Error::InvalidSource(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Layout", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyLayout(RadialLayout);

#[pymethods]
impl PyLayout {
    #[new]
    #[pyo3(signature = (r1 = 1.0, r2 = 2.0, outer = 8.0))]
    fn new(r1: f64, r2: f64, outer: f64) -> PyResult<Self> {
        RadialLayout::new(r1, r2, outer).map(Self).map_err(err)
    }

    #[getter]
    fn r1(&self) -> f64 {
        self.0.r1()
    }

    #[getter]
    fn r2(&self) -> f64 {
        self.0.r2()
    }

    #[getter]
    fn r3(&self) -> f64 {
        self.0.r3()
    }

    #[getter]
    fn outer(&self) -> f64 {
        self.0.outer_radius()
    }

    fn __repr__(&self) -> String {
        format!("Layout(r1={}, r2={}, r3={}, R={})", self.0.r1(), self.0.r2(), self.0.r3(), self.0.outer_radius())
    }
}

/// Ring sources `c δ(r − r0)/r e^{inθ}` as `(n, c, r0)` triples.
fn source(rings: Vec<(u32, Complex64, f64)>) -> SourceSpec {
    SourceSpec::rings(rings.into_iter().map(|(n, amplitude, r0)| RingSource { n, amplitude, r0 }).collect())
}

#[pyclass(name = "Config")]
struct PyConfig(ExperimentConfig);

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ExperimentConfig::from_toml_str(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_path(path: std::path::PathBuf) -> PyResult<Self> {
        ExperimentConfig::from_path(&path).map(Self).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.0.to_toml_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.0.seed = seed;
    }

    fn layout(&self) -> PyResult<PyLayout> {
        self.0.layout().map(PyLayout).map_err(err)
    }
}

#[pyfunction]
fn run_sweep<'py>(py: Python<'py>, cfg: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let rep = py.detach(|| harness::run_delta_sweep(&cfg.0)).map_err(err)?;
    loads(py, &to_json(&rep))
}

#[pyfunction]
fn run_invisibility<'py>(py: Python<'py>, cfg: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let rep = py.detach(|| harness::run_invisibility_check(&cfg.0)).map_err(err)?;
    loads(py, &to_json(&rep))
}

#[pyfunction]
fn run_blowup<'py>(py: Python<'py>, cfg: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let rep = py.detach(|| harness::run_blowup_check(&cfg.0)).map_err(err)?;
    loads(py, &to_json(&rep))
}

#[pyfunction]
fn run_crossval<'py>(py: Python<'py>, cfg: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let rep = py.detach(|| harness::run_cross_validation(&cfg.0)).map_err(err)?;
    loads(py, &to_json(&rep))
}

#[pyfunction]
fn check_complementary<'py>(py: Python<'py>, cfg: &PyConfig) -> PyResult<Bound<'py, PyAny>> {
    let rep = py.detach(|| harness::run_check_complementary(&cfg.0)).map_err(err)?;
    loads(py, &rep.to_json().to_string())
}

#[pyfunction]
fn render_svg(py: Python<'_>, cfg: &PyConfig) -> PyResult<String> {
    py.detach(|| harness::render_config(&cfg.0)).map_err(err)
}

/// Compatibility verdict of a ring source as `(status, ratio)`.
#[pyfunction]
fn classify_source(layout: &PyLayout, rings: Vec<(u32, Complex64, f64)>) -> PyResult<(String, f64)> {
    let v = spectral::classify_source(&layout.0, &source(rings)).map_err(err)?;
    Ok((format!("{:?}", v.status), v.ratio))
}

#[pyclass(name = "SpectralField", frozen)]
struct PySpectralField {
    field: RadialField,
    layout: RadialLayout,
}

#[pymethods]
impl PySpectralField {
    fn __call__(&self, x: f64, y: f64) -> Complex64 {
        self.field.value(Point::new(x, y))
    }

    fn gradient(&self, x: f64, y: f64) -> (Complex64, Complex64) {
        let [gx, gy] = self.field.gradient(Point::new(x, y));
        (gx, gy)
    }

    /// `(‖u‖²_{L²}, ‖u‖²_{H¹})` on `lo < r < hi`, whole disk by default.
    #[pyo3(signature = (lo = 0.0, hi = None))]
    fn norms_sq(&self, lo: f64, hi: Option<f64>) -> PyResult<(f64, f64)> {
        let hi = hi.unwrap_or(self.layout.outer_radius());
        let l2 = spectral::field_l2_norm_sq(&self.field, lo, hi).map_err(err)?;
        let h1 = spectral::field_h1_norm_sq(&self.field, lo, hi).map_err(err)?;
        Ok((l2, h1))
    }

    fn modes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let v: Vec<_> = self.field.modes().iter().map(|m| m.to_json()).collect();
        loads(py, &serde_json::Value::Array(v).to_string())
    }
}

/// Lossy solution for `delta > 0`, the free field for `delta = None`.
#[pyfunction]
#[pyo3(signature = (layout, rings, delta = None, n_max = None))]
fn spectral_solve(
    py: Python<'_>,
    layout: &PyLayout,
    rings: Vec<(u32, Complex64, f64)>,
    delta: Option<f64>,
    n_max: Option<u32>,
) -> PyResult<PySpectralField> {
    let src = source(rings);
    let l = layout.0;
    let field = py
        .detach(|| match delta {
            Some(d) => spectral::solve_source_delta(&l, &src, d, n_max),
            None => spectral::solve_source_free(&l, &src, n_max),
        })
        .map_err(err)?;
    Ok(PySpectralField { field, layout: l })
}

/// The limit field `NI` of a compatible source.
#[pyfunction]
#[pyo3(signature = (layout, rings, n_max = None))]
fn spectral_limit(py: Python<'_>, layout: &PyLayout, rings: Vec<(u32, Complex64, f64)>, n_max: Option<u32>) -> PyResult<PySpectralField> {
    let src = source(rings);
    let l = layout.0;
    let field = py.detach(|| spectral::limit_field(&l, &src, n_max)).map_err(err)?;
    Ok(PySpectralField { field, layout: l })
}

#[pyclass(name = "FemField", frozen)]
struct PyFemField {
    field: fem::Field,
    locator: Arc<PointLocator>,
}

#[pymethods]
impl PyFemField {
    fn __call__(&self, x: f64, y: f64) -> Option<Complex64> {
        self.field.eval(&self.locator, Point::new(x, y))
    }

    #[getter]
    fn values(&self) -> Vec<Complex64> {
        self.field.values().to_vec()
    }

    #[getter]
    fn vertices(&self) -> Vec<(f64, f64)> {
        self.field.mesh().vertices.iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn triangles(&self) -> Vec<[usize; 3]> {
        self.field.mesh().triangles.clone()
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.field.residual()
    }
}

/// P1 solution on isotropic media `a`, `sigma`; `delta = None` takes the unit shell.
#[pyfunction]
#[pyo3(signature = (layout, rings, delta = None, h = 0.1, a = 1.0, sigma = 1.0, k = 0.0))]
#[allow(clippy::too_many_arguments)]
fn fem_solve(
    py: Python<'_>,
    layout: &PyLayout,
    rings: Vec<(u32, Complex64, f64)>,
    delta: Option<f64>,
    h: f64,
    a: f64,
    sigma: f64,
    k: f64,
) -> PyResult<(PyFemField, f64)> {
    let media = MediaSpec::isotropic(layout.0, a, sigma);
    let src = source(rings);
    let loss = delta.map_or(LossCoefficient::unit(), LossCoefficient::new);
    let (field, locator, energy) = py
        .detach(|| -> complementary::Result<_> {
            let ctx = FemContext::new(&media, &src, h, k)?;
            let (field, sys, load) = ctx.solve(loss)?;
            let energy = fem::energy_identity_residual(&field, &sys, &load)?;
            Ok((field, ctx.locator, energy))
        })
        .map_err(err)?;
    Ok((PyFemField { field, locator: Arc::new(locator) }, energy))
}

#[pymodule]
fn complementary_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLayout>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySpectralField>()?;
    m.add_class::<PyFemField>()?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_invisibility, m)?)?;
    m.add_function(wrap_pyfunction!(run_blowup, m)?)?;
    m.add_function(wrap_pyfunction!(run_crossval, m)?)?;
    m.add_function(wrap_pyfunction!(check_complementary, m)?)?;
    m.add_function(wrap_pyfunction!(render_svg, m)?)?;
    m.add_function(wrap_pyfunction!(classify_source, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_solve, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_limit, m)?)?;
    m.add_function(wrap_pyfunction!(fem_solve, m)?)?;
    Ok(())
}
