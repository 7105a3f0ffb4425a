//! Python module `dbps_py`: targets, the sampler and the diagnostics.

use std::sync::Arc;

use dbps::diagnostics::{self, DiagnosticsSummary};
use dbps::geometry;
use dbps::sampler::{run_chain, GradientMode, RunOptions, SamplerConfig};
use dbps::targets::{
    self, gaussian_target, logistic_target, quartic_target, EventData, MmppModel, MmppParams,
    TargetModel,
};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: dbps::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// A log-density on R^d.
#[pyclass(name = "Target", frozen)]
struct PyTarget {
    inner: Arc<dyn TargetModel>,
}

#[pymethods]
impl PyTarget {
    /// `-sum (x_i / s_i)^4 / 4`.
    #[staticmethod]
    fn quartic(scales: Vec<f64>) -> PyResult<Self> {
        Ok(PyTarget { inner: Arc::new(quartic_target(&scales).map_err(to_py)?) })
    }

    #[staticmethod]
    fn gaussian(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> PyResult<Self> {
        let cov = matrix(&covariance)?;
        Ok(PyTarget { inner: Arc::new(gaussian_target(&mean, &cov).map_err(to_py)?) })
    }

    #[staticmethod]
    fn logistic(d: usize) -> PyResult<Self> {
        Ok(PyTarget { inner: Arc::new(logistic_target(d).map_err(to_py)?) })
    }

    /// Posterior of a cyclic `k`-state MMPP in log-parameters.
    #[staticmethod]
    #[pyo3(signature = (times, t_end, k = 4, prior_sd = 2.0))]
    fn mmpp(times: Vec<f64>, t_end: f64, k: usize, prior_sd: f64) -> PyResult<Self> {
        let data = EventData::new(times, t_end).map_err(to_py)?;
        Ok(PyTarget { inner: Arc::new(MmppModel::cyclic(k, data, prior_sd).map_err(to_py)?) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_density(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.log_density(&x))
    }

    /// Analytic gradient, or `None` when the target has none.
    fn gradient(&self, x: Vec<f64>) -> PyResult<Option<Vec<f64>>> {
        self.check(&x)?;
        Ok(self.inner.gradient(&x))
    }
}

impl PyTarget {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} coordinates, got {}",
                self.inner.dim(),
                x.len()
            )));
        }
        Ok(())
    }
}

fn summary_dict<'py>(py: Python<'py>, s: &DiagnosticsSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n_iters", s.n_iters)?;
    d.set_item("f_b", s.f_b)?;
    d.set_item("f_r", s.f_r)?;
    d.set_item("c_rms", s.c_rms)?;
    d.set_item("ess", s.ess.clone())?;
    d.set_item("ess_min", s.ess_min)?;
    d.set_item("ess_lp", s.ess_lp)?;
    d.set_item("n_degenerate", s.n_degenerate)?;
    d.set_item("evaluations", s.evaluations)?;
    Ok(d)
}

/// Discrete bouncy particle sampler bound to a target.
#[pyclass(name = "Sampler", frozen)]
struct PySampler {
    target: Arc<dyn TargetModel>,
    cfg: SamplerConfig,
}

#[pymethods]
impl PySampler {
    /// `gradient` is one of "analytic", "forward" or "central".
    #[new]
    #[pyo3(signature = (target, delta, eps = 0.0, kappa = 0.0, seed = 0, n_cpt = None, gradient = "analytic"))]
    fn new(
        target: &PyTarget,
        delta: f64,
        eps: f64,
        kappa: f64,
        seed: u64,
        n_cpt: Option<usize>,
        gradient: &str,
    ) -> PyResult<Self> {
        let mode = match gradient {
            "analytic" => GradientMode::Analytic,
            "forward" => GradientMode::ForwardDifference,
            "central" => GradientMode::CentralDifference,
            other => return Err(PyValueError::new_err(format!("unknown gradient mode {other:?}"))),
        };
        let mut cfg = SamplerConfig::new(delta, eps, kappa).with_seed(seed).with_gradient_mode(mode);
        cfg.n_cpt = n_cpt;
        cfg.validate(target.inner.as_ref()).map_err(to_py)?;
        Ok(PySampler { target: target.inner.clone(), cfg })
    }

    /// Runs `n_iters` iterations from `x0`. Returns a dict with the thinned
    /// positions, the full log-density series, the step kinds as a string
    /// of `A`/`B`/`R`/`S` codes, and the summary diagnostics.
    #[pyo3(signature = (x0, n_iters, thin = 1))]
    fn run<'py>(&self, py: Python<'py>, x0: Vec<f64>, n_iters: usize, thin: usize) -> PyResult<Bound<'py, PyDict>> {
        let target = self.target.clone();
        let cfg = self.cfg.clone();
        let trace = py
            .allow_threads(move || run_chain(target.as_ref(), &cfg, &x0, &RunOptions::new(n_iters, thin)))
            .map_err(to_py)?;
        let positions: Vec<Vec<f64>> = (0..trace.n_thinned()).map(|i| trace.position(i).to_vec()).collect();
        let kinds: String = trace.kinds.iter().map(|k| k.code()).collect();
        let out = PyDict::new(py);
        out.set_item("positions", positions)?;
        out.set_item("log_pi", trace.log_pi.clone())?;
        out.set_item("kinds", kinds)?;
        out.set_item("summary", summary_dict(py, &DiagnosticsSummary::from_trace(&trace))?)?;
        Ok(out)
    }
}

/// Reflection of `u` in the hyperplane orthogonal to `v`.
#[pyfunction]
fn reflect(u: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
    geometry::reflect(&u, &v).map_err(to_py)
}

/// Reflection preserving `|u|` and `<u, g>` that moves `u` within span(u, zeta).
#[pyfunction]
fn subset_reflect(u: Vec<f64>, g: Vec<f64>, zeta: Vec<f64>) -> PyResult<Vec<f64>> {
    geometry::subset_reflect(&u, &g, &zeta).map_err(to_py)
}

/// Effective sample size of a scalar series.
#[pyfunction]
fn ess(series: Vec<f64>) -> PyResult<f64> {
    diagnostics::ess(&series).map_err(to_py)
}

/// Log-likelihood of event times on `[0, t_end]` under an MMPP with
/// generator `q` and rates `lam`, started in state 0.
#[pyfunction]
fn mmpp_log_likelihood(q: Vec<Vec<f64>>, lam: Vec<f64>, times: Vec<f64>, t_end: f64) -> PyResult<f64> {
    let params = MmppParams::new(matrix(&q)?, lam).map_err(to_py)?;
    let data = EventData::new(times, t_end).map_err(to_py)?;
    Ok(targets::log_likelihood_params(&params, &data))
}

#[pymodule]
fn dbps_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTarget>()?;
    m.add_class::<PySampler>()?;
    m.add_function(wrap_pyfunction!(reflect, m)?)?;
    m.add_function(wrap_pyfunction!(subset_reflect, m)?)?;
    m.add_function(wrap_pyfunction!(ess, m)?)?;
    m.add_function(wrap_pyfunction!(mmpp_log_likelihood, m)?)?;
    Ok(())
}
