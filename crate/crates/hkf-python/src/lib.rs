use std::cell::RefCell;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hkf::estimators::{coarse_grid, minimize_scalar_from_grid, minimize_simplex as simplex, EstimateResult};
use hkf::experiments::{self as exps, Experiment, ExperimentConfig};
use hkf::gpr::{self, KernelModel, SubsampleScheme};
use hkf::operators::{green_truth as green, IntervalGrid, OperatorEigensystem};
use hkf::oracle;
use hkf::torus::{self, GridField, MaternLike, TorusLattice, Truncation};

fn err(e: hkf::Error) -> PyErr {
    match e {
        hkf::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn truncation(q: u32, extra: u32, sharp: bool) -> Truncation {
    if sharp {
        Truncation::Sharp { half_width: 1u64 << (q + extra).saturating_sub(1) }
    } else {
        Truncation::oversampled(q, extra)
    }
}

/// Matérn-like spectral kernel on the unit torus, with symbol
/// `σ² (4π²|m|² + τ²)^{-s}`.
#[pyclass(name = "SpectralKernel", module = "pyhkf", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpectralKernel {
    inner: torus::SpectralKernel,
}

#[pymethods]
impl PySpectralKernel {
    #[new]
    #[pyo3(signature = (s, sigma=1.0, tau=0.0, d=1, q=9, extra=4, sharp=false))]
    fn new(s: f64, sigma: f64, tau: f64, d: usize, q: u32, extra: u32, sharp: bool) -> PyResult<Self> {
        let sym = MaternLike::new(sigma, tau, s).map_err(err)?;
        sym.check_convergent(d).map_err(err)?;
        Ok(Self { inner: torus::SpectralKernel::new(d, sym, truncation(q, extra, sharp)) })
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.symbol.s
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.symbol.sigma
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.symbol.tau
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    fn __call__(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&x, &y).map_err(err)
    }

    fn gram(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let g = self.inner.gram(&x).map_err(err)?;
        Ok((0..g.nrows()).map(|i| (0..g.ncols()).map(|j| g[(i, j)]).collect()).collect())
    }

    fn eb_loss(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
        gpr::eb_loss(&KernelModel::Torus(self.inner.clone()), &x, &y).map_err(err)
    }

    /// KF loss with the coarsen-by-two subsample.
    fn kf_loss(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
        gpr::kf_loss(&KernelModel::Torus(self.inner.clone()), &x, &SubsampleScheme::CoarsenByTwo, &y).map_err(err)
    }

    fn conditional_mean(&self, x: Vec<Vec<f64>>, y: Vec<f64>, e: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        gpr::conditional_mean(&KernelModel::Torus(self.inner.clone()), &x, &y, &e).map_err(err)
    }

    /// Closed-form EB amplitude for data `y` on `x` (the kernel's own σ is ignored).
    fn sigma_eb(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
        let unit = self.inner.with_symbol(self.inner.symbol.with_sigma(1.0));
        let g = gpr::gram_matrix(&KernelModel::Torus(unit), &x).map_err(err)?;
        hkf::estimators::sigma_eb_closed_form(&y, &g).map_err(err)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner.symbol;
        format!("SpectralKernel(s={}, sigma={}, tau={}, d={})", p.s, p.sigma, p.tau, self.inner.d)
    }
}

/// Fourier coefficients of a lattice field over `B_q^d`.
#[pyclass(name = "SpectralField", module = "pyhkf", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpectralField {
    inner: torus::SpectralField,
}

#[pymethods]
impl PySpectralField {
    #[getter]
    fn q(&self) -> u32 {
        self.inner.q
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    /// Coefficient at frequency `m` as `(re, im)`.
    fn get(&self, m: Vec<i64>) -> PyResult<(f64, f64)> {
        if m.len() != self.inner.d || !self.inner.frequency_box().contains(&m) {
            return Err(PyValueError::new_err("frequency outside B_q^d"));
        }
        let c = self.inner.get(&m);
        Ok((c.re, c.im))
    }

    /// Periodization onto the coarser level `r`.
    fn fold(&self, r: u32) -> PyResult<Self> {
        Ok(Self { inner: self.inner.fold(r).map_err(err)? })
    }

    fn lattice_values(&self) -> Vec<f64> {
        self.inner.lattice_values()
    }

    fn __len__(&self) -> usize {
        self.inner.coeffs.len()
    }
}

/// Periodized coefficients of values given on the lattice `X_q` of `T^d`.
#[pyfunction]
#[pyo3(signature = (values, q, d=1))]
fn dft_alias(values: Vec<f64>, q: u32, d: usize) -> PyResult<PySpectralField> {
    let field = GridField::torus(TorusLattice::new(q, d), values).map_err(err)?;
    Ok(PySpectralField { inner: torus::dft_alias(&field).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (q, d=1))]
fn lattice_points(q: u32, d: usize) -> Vec<Vec<f64>> {
    TorusLattice::new(q, d).points()
}

#[pyfunction]
#[pyo3(signature = (m, q, t, tol=1e-12))]
fn periodized_symbol(m: Vec<i64>, q: u32, t: f64, tol: f64) -> PyResult<f64> {
    torus::periodized_symbol(&m, q, t, tol).map_err(err)
}

/// Karhunen–Loève draw on `X_q`, truncated to `|m|_∞ ≤ half_width`.
#[pyfunction]
#[pyo3(signature = (s, q, seed, instance=0, sigma=1.0, tau=0.0, d=1, half_width=None))]
#[allow(clippy::too_many_arguments)]
fn kl_sample(
    s: f64,
    q: u32,
    seed: u64,
    instance: u64,
    sigma: f64,
    tau: f64,
    d: usize,
    half_width: Option<u64>,
) -> PyResult<Vec<f64>> {
    let sym = MaternLike::new(sigma, tau, s).map_err(err)?;
    let w = half_width.unwrap_or(1u64 << (q + 3));
    Ok(torus::kl_sample(&sym, TorusLattice::new(q, d), w, seed, instance).map_err(err)?.values)
}

#[pyfunction]
#[pyo3(signature = (t, q, d=1))]
fn gram_eigenvalues(t: f64, q: u32, d: usize) -> PyResult<Vec<f64>> {
    oracle::gram_eigenvalues(t, q, d).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (t, q, d=1))]
fn log_det_spectral(t: f64, q: u32, d: usize) -> PyResult<f64> {
    oracle::log_det_spectral(t, q, d).map_err(err)
}

#[pyfunction]
fn eb_loss_spectral(t: f64, tq: &PySpectralField) -> PyResult<f64> {
    oracle::eb_loss_spectral(t, &tq.inner).map_err(err)
}

#[pyfunction]
fn kf_loss_spectral(t: f64, tq: &PySpectralField, tqm1: &PySpectralField) -> PyResult<f64> {
    oracle::kf_loss_spectral(t, &tq.inner, &tqm1.inner).map_err(err)
}

#[pyfunction]
fn ht_norm_sq(field: &PySpectralField, t: f64) -> f64 {
    oracle::ht_norm_sq(&field.inner, t)
}

/// Discrete Green function of `(-Δ)^s` with Dirichlet ends on `n` interior points.
#[pyfunction]
fn green_truth(s: f64, source: f64, n: usize) -> PyResult<Vec<f64>> {
    let lap = OperatorEigensystem::laplacian(IntervalGrid::new(n));
    Ok(green(s, source, &lap).map_err(err)?.values)
}

fn result_dict<'py>(py: Python<'py>, r: &EstimateResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("argmin", r.argmin.clone())?;
    d.set_item("min_loss", r.min_loss)?;
    d.set_item("hit_boundary", r.hit_boundary.clone())?;
    d.set_item("evaluations", r.evaluations)?;
    d.set_item("loss_curve", r.loss_curve.clone())?;
    d.set_item("restart_spread", r.restart_spread.clone())?;
    d.set_item("indeterminate", r.indeterminate.clone())?;
    Ok(d)
}

/// Calls a Python loss, remembering the first exception.
struct PyLoss<'a, 'py> {
    f: &'a Bound<'py, PyAny>,
    failure: RefCell<Option<PyErr>>,
}

impl PyLoss<'_, '_> {
    fn call<A: for<'p> IntoPyObject<'p>>(&self, arg: A) -> f64 {
        match self.f.call1((arg,)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => v,
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn check(self) -> PyResult<()> {
        match self.failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Coarse grid over `[lo, hi]`, then golden-section refinement of the best bracket.
#[pyfunction]
#[pyo3(signature = (loss, lo, hi, coarse_n=200, tol=1e-4))]
fn minimize_scalar<'py>(
    py: Python<'py>,
    loss: &Bound<'py, PyAny>,
    lo: f64,
    hi: f64,
    coarse_n: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    if !(lo < hi) || coarse_n < 2 || !(tol > 0.0) {
        return Err(PyValueError::new_err("need lo < hi, at least two grid points and a positive tolerance"));
    }
    let f = PyLoss { f: loss, failure: RefCell::new(None) };
    let curve: Vec<(f64, f64)> = coarse_grid(lo, hi, coarse_n).into_iter().map(|t| (t, f.call(t))).collect();
    let r = minimize_scalar_from_grid(curve, |t| f.call(t), lo, hi, tol);
    f.check()?;
    result_dict(py, &r.map_err(err)?)
}

/// Bounded Nelder–Mead with restarts.
#[pyfunction]
#[pyo3(signature = (loss, start, bounds, tol=1e-3))]
fn minimize_simplex<'py>(
    py: Python<'py>,
    loss: &Bound<'py, PyAny>,
    start: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let f = PyLoss { f: loss, failure: RefCell::new(None) };
    let r = simplex(|p| f.call(p.to_vec()), &start, &bounds, tol);
    f.check()?;
    result_dict(py, &r.map_err(err)?)
}

#[pyfunction]
fn experiment_names() -> Vec<&'static str> {
    Experiment::ALL.iter().map(|e| e.name()).collect()
}

/// Built-in configuration for an experiment, as JSON.
#[pyfunction]
fn default_config(name: &str) -> PyResult<String> {
    let e = Experiment::parse(name).map_err(err)?;
    serde_json::to_string_pretty(&exps::default_config(e)).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Run an experiment from its JSON configuration and return the report as
/// JSON. With `out_dir`, the CSV and JSON artifacts are written there too.
#[pyfunction]
#[pyo3(signature = (config, out_dir=None))]
fn run_experiment(py: Python<'_>, config: &str, out_dir: Option<PathBuf>) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let report = py.detach(|| exps::run(&cfg)).map_err(err)?;
    if let Some(dir) = out_dir {
        report.write(&dir).map_err(err)?;
    }
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pyhkf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySpectralKernel>()?;
    m.add_class::<PySpectralField>()?;
    m.add_function(wrap_pyfunction!(dft_alias, m)?)?;
    m.add_function(wrap_pyfunction!(lattice_points, m)?)?;
    m.add_function(wrap_pyfunction!(periodized_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(kl_sample, m)?)?;
    m.add_function(wrap_pyfunction!(gram_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(log_det_spectral, m)?)?;
    m.add_function(wrap_pyfunction!(eb_loss_spectral, m)?)?;
    m.add_function(wrap_pyfunction!(kf_loss_spectral, m)?)?;
    m.add_function(wrap_pyfunction!(ht_norm_sq, m)?)?;
    m.add_function(wrap_pyfunction!(green_truth, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_scalar, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(experiment_names, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
