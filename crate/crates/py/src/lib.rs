//! Python bindings for the `noisereg` simulation toolkit.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use noisereg::conditions::{check_a5, check_a5_star, check_generalized_coercivity, classify_regime, default_norm_grid};
use noisereg::integrate::{SchemeKind, Taming};
use noisereg::models::{ModelKind, drift};
use noisereg::{GridSpec, State};

fn err(e: noisereg::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value into plain Python objects.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} `{name}`")))
}

#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: noisereg::Model,
}

#[pymethods]
impl PyModel {
    /// Builds a model. Scalar: `Model("superlinear_sde", c0=1.0)`. Fields need
    /// `n_interior` and their own parameters (`p`, `r`).
    #[new]
    #[pyo3(signature = (kind, *, c0=None, source=1.0, sink=0.0, p=None, eps_reg=1e-8, r=None, length=1.0, n_interior=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: &str,
        c0: Option<f64>,
        source: f64,
        sink: f64,
        p: Option<f64>,
        eps_reg: f64,
        r: Option<f64>,
        length: f64,
        n_interior: Option<usize>,
    ) -> PyResult<Self> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| PyValueError::new_err(format!("{kind} needs `{name}`")));
        let kind = match kind {
            "superlinear_sde" => ModelKind::SuperlinearSde { c0: need(c0, "c0")?, source, sink },
            "p_laplace_hot" => ModelKind::PLaplaceHot { p: need(p, "p")?, eps_reg },
            "fast_diffusion" => ModelKind::FastDiffusion { r: need(r, "r")? },
            "surface_growth" => ModelKind::SurfaceGrowth,
            "heat_validation" => ModelKind::HeatValidation,
            other => return Err(PyValueError::new_err(format!("unknown model kind `{other}`"))),
        };
        let grid = match (kind.is_scalar(), n_interior) {
            (true, _) => None,
            (false, Some(n)) => Some(GridSpec::new(length, n).map_err(err)?),
            (false, None) => return Err(PyValueError::new_err("field models need `n_interior`")),
        };
        Ok(Self { inner: noisereg::make_model(kind, grid).map_err(err)? })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn profile(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.profile())
    }

    /// Sine mode `k` on the grid, scaled to unit H-norm.
    fn sine_mode(&self, k: usize) -> PyResult<Vec<f64>> {
        let grid = self.inner.grid().ok_or_else(|| PyValueError::new_err("scalar model has no grid"))?;
        let mode = grid.sine_mode(k);
        let n = self.inner.h_norm_values(&mode);
        Ok(mode.into_iter().map(|v| v / n).collect())
    }

    fn h_norm(&self, values: Vec<f64>) -> PyResult<f64> {
        noisereg::h_norm(&self.inner, &State::new(values)).map_err(err)
    }

    fn v_norm(&self, values: Vec<f64>) -> PyResult<f64> {
        noisereg::v_norm(&self.inner, &State::new(values)).map_err(err)
    }

    fn drift(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        drift(&self.inner, 0.0, &State::new(values)).map_err(err)
    }

    fn embedding_constant(&self) -> PyResult<f64> {
        noisereg::embedding_constant(&self.inner).map_err(err)
    }

    /// Generalized coercivity estimate on random states.
    #[pyo3(signature = (sample_count=200, seed=0))]
    fn check_coercivity(&self, py: Python<'_>, sample_count: usize, seed: u64) -> PyResult<Py<PyAny>> {
        to_py(py, &check_generalized_coercivity(&self.inner, sample_count, seed).map_err(err)?)
    }
}

#[pyclass(name = "Noise", frozen)]
struct PyNoise {
    inner: noisereg::NoiseSpec,
}

#[pymethods]
impl PyNoise {
    /// Field noise with `channels` equal coefficients `sqrt(gamma / channels)`.
    #[staticmethod]
    #[pyo3(signature = (gamma, m, channels=1))]
    fn uniform(gamma: f64, m: f64, channels: usize) -> PyResult<Self> {
        Ok(Self { inner: noisereg::NoiseSpec::uniform(gamma, m, channels).map_err(err)? })
    }

    /// Scalar noise `c0 |X|^{m-1} X dW`.
    #[staticmethod]
    fn scalar(c0: f64, m: f64) -> PyResult<Self> {
        Ok(Self { inner: noisereg::NoiseSpec::scalar(c0, m).map_err(err)? })
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn hs_norm_sq(&self, model: &PyModel, values: Vec<f64>) -> PyResult<f64> {
        noisereg::hs_norm_sq(&self.inner, &model.inner, &State::new(values)).map_err(err)
    }

    fn adjoint_action_norm_sq(&self, model: &PyModel, values: Vec<f64>) -> PyResult<f64> {
        noisereg::adjoint_action_norm_sq(&self.inner, &model.inner, &State::new(values)).map_err(err)
    }
}

#[pyclass(name = "SimConfig", frozen)]
struct PySimConfig {
    inner: noisereg::SimConfig,
}

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (dt, horizon, scheme="tamed", taming="relative", theta=1.0, blowup_threshold=1e6, extinction_threshold=1e-6, record_stride=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        dt: f64,
        horizon: f64,
        scheme: &str,
        taming: &str,
        theta: f64,
        blowup_threshold: f64,
        extinction_threshold: f64,
        record_stride: Option<usize>,
    ) -> PyResult<Self> {
        let mut cfg = noisereg::SimConfig::new(dt, horizon, parse_enum::<SchemeKind>("scheme", scheme)?);
        cfg.taming = parse_enum::<Taming>("taming", taming)?;
        cfg.theta = theta;
        cfg.blowup_threshold = blowup_threshold;
        cfg.extinction_threshold = extinction_threshold;
        if let Some(s) = record_stride {
            cfg.record_stride = s;
        }
        cfg.validate().map_err(err)?;
        Ok(Self { inner: cfg })
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps()
    }

    fn time_grid(&self) -> Vec<f64> {
        self.inner.time_grid()
    }
}

/// Simulates one path; returns the trajectory record as a dict.
#[pyfunction]
#[pyo3(signature = (model, noise, cfg, x0, seed=0, path_index=0))]
fn run_path(
    py: Python<'_>,
    model: &PyModel,
    noise: &PyNoise,
    cfg: &PySimConfig,
    x0: Vec<f64>,
    seed: u64,
    path_index: u64,
) -> PyResult<Py<PyAny>> {
    let rng = noisereg::RngStream::new(seed, path_index);
    let rec = py
        .detach(|| noisereg::run_path(&model.inner, &noise.inner, &cfg.inner, rng, &State::new(x0)))
        .map_err(err)?;
    to_py(py, &rec)
}

/// Runs `n_paths` paths in parallel and returns the ensemble statistics.
#[pyfunction]
#[pyo3(signature = (model, noise, cfg, x0, n_paths, seed=0))]
fn run_ensemble(
    py: Python<'_>,
    model: &PyModel,
    noise: &PyNoise,
    cfg: &PySimConfig,
    x0: Vec<f64>,
    n_paths: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let stats = py
        .detach(|| noisereg::run_ensemble(&model.inner, &noise.inner, &cfg.inner, &State::new(x0), n_paths, seed))
        .map_err(err)?;
    to_py(py, &stats)
}

#[pyfunction]
fn check_noise_dominance(py: Python<'_>, model: &PyModel, noise: &PyNoise, eta: f64) -> PyResult<Py<PyAny>> {
    let profile = noisereg::CoercivityProfile { additive: None, ..*model.inner.profile() };
    to_py(py, &check_a5(&profile, &noise.inner, eta, &default_norm_grid()).map_err(err)?)
}

#[pyfunction]
fn check_extinction_dominance(py: Python<'_>, model: &PyModel, noise: &PyNoise) -> PyResult<Py<PyAny>> {
    let p = model.inner.profile();
    to_py(py, &check_a5_star(p, &noise.inner, p.alpha, &default_norm_grid()).map_err(err)?)
}

#[pyfunction]
fn regime(py: Python<'_>, c0: f64, m: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &classify_regime(c0, m))
}

#[pyfunction]
fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    noisereg::stats::wilson_interval(successes, n)
}

/// Parses a JSON plan and returns the resolved plan as JSON text.
#[pyfunction]
fn resolve_config(text: &str) -> PyResult<String> {
    noisereg::parse_config(text).and_then(|p| p.to_json()).map_err(err)
}

/// Runs a JSON plan, writing artifacts to its output directory; returns the
/// result summary.
#[pyfunction]
#[pyo3(signature = (text, dump_paths=false))]
fn run_experiment(py: Python<'_>, text: &str, dump_paths: bool) -> PyResult<Py<PyAny>> {
    let plan = noisereg::parse_config(text).map_err(err)?;
    let result = py.detach(|| noisereg::run_experiment(&plan, dump_paths)).map_err(err)?;
    to_py(py, &result)
}

#[pyfunction]
#[pyo3(signature = (name, seed=0, out=PathBuf::from(".")))]
fn figure(py: Python<'_>, name: &str, seed: u64, out: PathBuf) -> PyResult<Py<PyAny>> {
    let outcome = py.detach(|| noisereg::run_figure(name, seed, &out)).map_err(err)?;
    to_py(py, &outcome)
}

#[pymodule(name = "noisereg")]
mod module {
    #[pymodule_export]
    use super::{
        check_extinction_dominance, check_noise_dominance, figure, regime, resolve_config, run_ensemble,
        run_experiment, run_path, wilson_interval, PyModel, PyNoise, PySimConfig,
    };
}
