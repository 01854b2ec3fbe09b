//! Python bindings: spectra, filtering errors, special constants and the
//! validation suite. Heavy calls release the GIL.

use fracspec::asymptotics::{first_order_spectrum, special_constants as constants};
use fracspec::error_analysis::{convergence_study, mse_asymptotic, Position};
use fracspec::ia_refine::{refined_eigenpair, HybridSpectrum, IaConfig};
use fracspec::model::{ModelParams, DEFAULT_GL_ORDER};
use fracspec::quad::QuadGrid;
use fracspec::spectral_oracle::{oracle_spectrum, Spectrum, SpectrumMethod};
use fracspec::validation::{run_checks, ValidationConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: fracspec::Error) -> PyErr {
    match e {
        fracspec::Error::Domain(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(format!("{} stage: {other}", other.stage())),
    }
}

fn params(hurst: f64, beta: f64, mu: f64, horizon: f64) -> PyResult<ModelParams> {
    ModelParams::new(hurst, beta, mu, horizon).map_err(to_py)
}

/// Leading eigenpairs of the operator rescaled to [0, 1].
#[pyclass(get_all, frozen, skip_from_py_object, name = "Spectrum")]
#[derive(Debug, Clone)]
pub struct PySpectrum {
    method: String,
    lambdas: Vec<f64>,
    nus: Vec<Option<f64>>,
    phi1: Vec<f64>,
    /// Grid nodes and eigenfunction samples (empty for grid-free methods).
    nodes: Vec<f64>,
    phi: Vec<Vec<f64>>,
}

impl From<Spectrum> for PySpectrum {
    fn from(s: Spectrum) -> Self {
        Self {
            method: s.method.as_str().into(),
            lambdas: s.pairs.iter().map(|p| p.lambda).collect(),
            nus: s.pairs.iter().map(|p| p.nu).collect(),
            phi1: s.pairs.iter().map(|p| p.phi1).collect(),
            nodes: s.grid.map(|g| g.nodes).unwrap_or_default(),
            phi: s.pairs.into_iter().map(|p| p.phi).collect(),
        }
    }
}

#[pymethods]
impl PySpectrum {
    fn __len__(&self) -> usize {
        self.lambdas.len()
    }

    fn __repr__(&self) -> String {
        format!("Spectrum(method={:?}, pairs={})", self.method, self.lambdas.len())
    }
}

/// Nyström eigenpairs on a Gauss-Legendre grid.
#[pyfunction]
#[pyo3(signature = (hurst, beta, n_max, grid = 1000, mu = 1.0, horizon = 1.0, gl_order = DEFAULT_GL_ORDER))]
fn oracle_eigs(
    py: Python<'_>,
    hurst: f64,
    beta: f64,
    n_max: usize,
    grid: usize,
    mu: f64,
    horizon: f64,
    gl_order: usize,
) -> PyResult<PySpectrum> {
    let p = params(hurst, beta, mu, horizon)?;
    py.detach(|| oracle_spectrum(&p, grid, n_max, gl_order)).map(Into::into).map_err(to_py)
}

/// Eigenvalues, frequencies and endpoint values from the first-order formulas.
#[pyfunction]
#[pyo3(signature = (hurst, beta, n_max, mu = 1.0, horizon = 1.0))]
fn first_order_eigs(hurst: f64, beta: f64, n_max: usize, mu: f64, horizon: f64) -> PyResult<PySpectrum> {
    let p = params(hurst, beta, mu, horizon)?;
    first_order_spectrum(&p, n_max, None).map(Into::into).map_err(to_py)
}

/// Refined eigenpair n; returns (nu, lambda, phi(1)). Needs H >= 1/2.
#[pyfunction]
#[pyo3(signature = (hurst, beta, n, grid = 400, mu = 1.0, horizon = 1.0))]
fn refined_eig(
    py: Python<'_>,
    hurst: f64,
    beta: f64,
    n: usize,
    grid: usize,
    mu: f64,
    horizon: f64,
) -> PyResult<(f64, f64, f64)> {
    let p = params(hurst, beta, mu, horizon)?;
    let rp = py
        .detach(|| {
            let g = QuadGrid::unit_gauss_legendre(grid)?;
            refined_eigenpair(n, &p, &g, &IaConfig::default())
        })
        .map_err(to_py)?;
    Ok((rp.refinement.nu, rp.pair.lambda, rp.pair.phi1))
}

/// One (eps, u) entry of an error sweep.
#[pyclass(get_all, frozen, skip_from_py_object, name = "MseRow")]
#[derive(Debug, Clone)]
pub struct PyMseRow {
    eps: f64,
    u: f64,
    u_used: f64,
    p_series: f64,
    p_asymptotic: Option<f64>,
    ratio: Option<f64>,
}

#[pymethods]
impl PyMseRow {
    fn __repr__(&self) -> String {
        format!("MseRow(eps={:e}, u={}, p_series={:e}, ratio={:?})", self.eps, self.u, self.p_series, self.ratio)
    }
}

/// Filtering error from the eigen-series over a decreasing list of noise
/// levels, with the ratio to the small-noise asymptote.
#[pyfunction]
#[pyo3(signature = (hurst, beta, eps, u, spectrum = "oracle", grid = 1000, n_max = None, mu = 1.0, horizon = 1.0))]
#[allow(clippy::too_many_arguments)]
fn mse(
    py: Python<'_>,
    hurst: f64,
    beta: f64,
    eps: Vec<f64>,
    u: Vec<f64>,
    spectrum: &str,
    grid: usize,
    n_max: Option<usize>,
    mu: f64,
    horizon: f64,
) -> PyResult<Vec<PyMseRow>> {
    let p = params(hurst, beta, mu, horizon)?;
    let method: SpectrumMethod = spectrum.parse().map_err(to_py)?;
    let report = py
        .detach(|| match method {
            SpectrumMethod::Oracle => {
                let spec = oracle_spectrum(&p, grid, n_max.unwrap_or(grid), DEFAULT_GL_ORDER)?;
                convergence_study(&p, &eps, &u, &spec, None)
            }
            SpectrumMethod::FirstOrder => {
                let spec = first_order_spectrum(&p, n_max.unwrap_or(20_000), None)?;
                convergence_study(&p, &eps, &u, &spec, None)
            }
            SpectrumMethod::Refined => {
                let total = n_max.unwrap_or(20_000);
                let g = QuadGrid::unit_gauss_legendre(grid)?;
                let spec = HybridSpectrum::new(&p, 30.min(total), total, &g, &IaConfig::default())?;
                convergence_study(&p, &eps, &u, &spec, None)
            }
            SpectrumMethod::ClosedFormOu => Err(fracspec::Error::Domain("use oracle, first_order or refined".into())),
        })
        .map_err(to_py)?;
    Ok(report
        .rows
        .into_iter()
        .map(|r| PyMseRow {
            eps: r.eps,
            u: r.u,
            u_used: r.u_used,
            p_series: r.p_series,
            p_asymptotic: r.p_asymptotic,
            ratio: r.ratio,
        })
        .collect())
}

/// Small-noise asymptote of the error at scaled time u in (0, 1].
#[pyfunction]
#[pyo3(signature = (hurst, eps, u, mu = 1.0))]
fn mse_asymptote(hurst: f64, eps: f64, u: f64, mu: f64) -> PyResult<f64> {
    let p = params(hurst, 0.0, mu, 1.0)?;
    let pos = Position::of(u).ok_or_else(|| PyValueError::new_err("u must lie in (0, 1]"))?;
    if !(eps > 0.0) {
        return Err(PyValueError::new_err("eps must be positive"));
    }
    Ok(mse_asymptotic(pos, eps, &p))
}

/// Constants of the factorization: (b_alpha, eta_h, |X0(i)|, arg X0(i)).
#[pyfunction]
fn special_constants(hurst: f64) -> PyResult<(f64, f64, f64, f64)> {
    let k = constants(hurst, None).map_err(to_py)?;
    Ok((k.b_alpha, k.eta_h, k.x0_at_i.norm(), k.x0_at_i.arg()))
}

/// Run acceptance checks; returns (id, name, passed, detail) per check.
#[pyfunction]
#[pyo3(signature = (checks = None, quick = false))]
fn validate(py: Python<'_>, checks: Option<Vec<u32>>, quick: bool) -> Vec<(u32, String, bool, String)> {
    let cfg = ValidationConfig { quick, ..ValidationConfig::default() };
    py.detach(|| run_checks(&cfg, checks.as_deref()))
        .into_iter()
        .map(|r| (r.id, r.name, r.passed, r.detail))
        .collect()
}

#[pymodule]
fn fracspec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyMseRow>()?;
    m.add_function(wrap_pyfunction!(oracle_eigs, m)?)?;
    m.add_function(wrap_pyfunction!(first_order_eigs, m)?)?;
    m.add_function(wrap_pyfunction!(refined_eig, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(mse_asymptote, m)?)?;
    m.add_function(wrap_pyfunction!(special_constants, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
