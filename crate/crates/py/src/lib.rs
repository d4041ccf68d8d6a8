//! Python bindings: catalog targets, stable sampling, the fractional
//! Laplacian, reverse engineering, both simulators, the transport solvers and
//! the command line. Arrays cross the boundary as lists of floats.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use levylab::catalog::CATALOG_NAMES;
use levylab::ensemble::{uniform_times, EnsembleStats};
use levylab::fpe::{cauchy_bump, evolve_langevin_fpe, evolve_semigroup_fpe, SolveConfig, Trajectory};
use levylab::fraclap::frac_laplacian;
use levylab::langevin::{run_langevin_ensemble, Initial, LangevinConfig};
use levylab::reverse::{reconstruct as reconstruct_target, ReverseConfig};
use levylab::semigroup::{run_semigroup_ensemble, KmcModel, SemigroupConfig};
use levylab::stable::sample_many;
use levylab::{catalog_get, Drift, Error, GridFunction, GridSpec, OperatorConfig, RngStream, StableParams, TargetDensity};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A stationary target density from the catalog.
#[pyclass(name = "Target", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTarget {
    inner: TargetDensity,
}

#[pymethods]
impl PyTarget {
    #[new]
    #[pyo3(signature = (name, **params))]
    fn new(name: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = BTreeMap::new();
        if let Some(d) = params {
            for (k, v) in d.iter() {
                p.insert(k.extract::<String>()?, v.extract::<f64>()?);
            }
        }
        Ok(Self { inner: catalog_get(name, &p).map_err(py_err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    /// Noise intensity the closed forms were written for.
    #[getter]
    fn default_intensity(&self) -> f64 {
        self.inner.default_intensity()
    }

    fn density(&self, x: f64) -> f64 {
        self.inner.density(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    fn quantile(&self, p: f64) -> PyResult<f64> {
        self.inner.quantile(p).map_err(py_err)
    }

    /// Second moment, or `None` when it diverges.
    fn variance(&self) -> Option<f64> {
        self.inner.variance()
    }

    /// Closed-form Langevin drift at `x`, when the catalog has one.
    #[pyo3(signature = (x, lam = None))]
    fn oracle_drift(&self, x: f64, lam: Option<f64>) -> Option<f64> {
        let lam = lam.unwrap_or_else(|| self.inner.default_intensity());
        self.inner.oracle_drift(lam).map(|b| b.eval(x))
    }

    /// Closed-form semigroup potential at `x`, when the catalog has one.
    #[pyo3(signature = (x, lam = None))]
    fn oracle_potential(&self, x: f64, lam: Option<f64>) -> Option<f64> {
        let lam = lam.unwrap_or_else(|| self.inner.default_intensity());
        self.inner.oracle_potential(x, lam)
    }

    fn __repr__(&self) -> String {
        format!("Target({})", self.inner.describe())
    }
}

#[pyfunction]
fn catalog_names() -> Vec<&'static str> {
    CATALOG_NAMES.to_vec()
}

/// `n` symmetric stable variates with characteristic function `exp(-scale |p|^mu)`.
#[pyfunction]
#[pyo3(signature = (mu, n, scale = 1.0, seed = 1))]
fn sample_stable(mu: f64, n: usize, scale: f64, seed: u64) -> PyResult<Vec<f64>> {
    let params = StableParams::new(mu, scale).map_err(py_err)?;
    sample_many(&params, n, &mut RngStream::new(seed, 0)).map_err(py_err)
}

/// `|Δ|^{mu/2}` of values on the uniform grid `[x_min, x_max]`.
#[pyfunction]
#[pyo3(signature = (x_min, x_max, values, mu, method = "pv", tail = "zero"))]
fn fractional_laplacian(x_min: f64, x_max: f64, values: Vec<f64>, mu: f64, method: &str, tail: &str) -> PyResult<Vec<f64>> {
    let f = GridFunction::new(x_min, x_max, values).map_err(py_err)?;
    let cfg = OperatorConfig::new(mu, method.parse().map_err(py_err)?, tail.parse().map_err(py_err)?).map_err(py_err)?;
    Ok(frac_laplacian(&f, &cfg).map_err(py_err)?.into_values())
}

/// Drift and semigroup potential whose dynamics relax to `target`.
#[pyfunction]
#[pyo3(signature = (target, mu = 1.0, lam = None, half_width = 200.0, n = 8001))]
fn reconstruct<'py>(
    py: Python<'py>,
    target: &PyTarget,
    mu: f64,
    lam: Option<f64>,
    half_width: f64,
    n: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let lam = lam.unwrap_or_else(|| target.inner.default_intensity());
    let cfg = ReverseConfig::new(mu, lam).map_err(py_err)?.with_grid(GridSpec::symmetric(half_width, n).map_err(py_err)?);
    let r = reconstruct_target(&target.inner, &cfg).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("x", r.drift.xs())?;
    d.set_item("drift", r.drift.values().to_vec())?;
    d.set_item("potential", r.potential.values().to_vec())?;
    d.set_item("residual_norm", r.residual_norm)?;
    Ok(d)
}

fn stats_dict<'py>(py: Python<'py>, s: &EnsembleStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", s.times.clone())?;
    d.set_item("variance", s.variance.clone())?;
    d.set_item("variance_se", s.variance_se.clone())?;
    d.set_item("iqr", s.iqr.clone())?;
    d.set_item("median", s.median.clone())?;
    d.set_item("final_positions", s.final_sorted.clone())?;
    Ok(d)
}

fn initial(spec: &str, target: &TargetDensity) -> PyResult<Initial> {
    if spec == "target" {
        return Ok(Initial::Target(Box::new(target.clone())));
    }
    if spec == "bump" {
        return Ok(Initial::Bump { x0: 0.0, width: 0.25, lo: -50.0, hi: 50.0 });
    }
    spec.strip_prefix("point:")
        .and_then(|x| x.parse().ok())
        .map(Initial::Point)
        .ok_or_else(|| PyValueError::new_err(format!("initial must be point:<x>, bump or target, got '{spec}'")))
}

fn model_drift(target: &TargetDensity, mu: f64, lam: f64) -> PyResult<Drift> {
    match target.oracle_drift(lam) {
        Some(b) if mu == 1.0 => Ok(b),
        _ => {
            let r = reconstruct_target(target, &ReverseConfig::new(mu, lam).map_err(py_err)?).map_err(py_err)?;
            Ok(Drift::Tabulated(r.drift))
        }
    }
}

/// Langevin ensemble statistics at `snapshots + 1` uniform times.
#[pyfunction]
#[pyo3(signature = (target, paths = 10000, t_final = 20.0, dt = 1e-3, mu = 1.0, lam = None, seed = 1, snapshots = 40, initial = "point:0"))]
#[allow(clippy::too_many_arguments)]
fn langevin_ensemble<'py>(
    py: Python<'py>,
    target: &PyTarget,
    paths: usize,
    t_final: f64,
    dt: f64,
    mu: f64,
    lam: Option<f64>,
    seed: u64,
    snapshots: usize,
    initial: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let t = &target.inner;
    let lam = lam.unwrap_or_else(|| t.default_intensity());
    let drift = model_drift(t, mu, lam)?;
    let mut cfg = LangevinConfig::new(drift, mu, lam);
    cfg.n_paths = paths;
    cfg.t_final = t_final;
    cfg.dt = dt;
    cfg.seed = seed;
    cfg.initial = self::initial(initial, t)?;
    let times = uniform_times(t_final, snapshots);
    let s = py
        .detach(|| run_langevin_ensemble(&cfg, &times, t.variance().is_some(), None))
        .map_err(py_err)?;
    stats_dict(py, &s)
}

/// Semigroup (kinetic Monte Carlo) ensemble statistics.
#[pyfunction]
#[pyo3(signature = (target, paths = 10000, t_final = 20.0, epsilon = 1e-2, mu = 1.0, lam = None, seed = 1, snapshots = 40, initial = "point:0"))]
#[allow(clippy::too_many_arguments)]
fn semigroup_ensemble<'py>(
    py: Python<'py>,
    target: &PyTarget,
    paths: usize,
    t_final: f64,
    epsilon: f64,
    mu: f64,
    lam: Option<f64>,
    seed: u64,
    snapshots: usize,
    initial: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let t = &target.inner;
    let lam = lam.unwrap_or_else(|| t.default_intensity());
    let mut cfg = SemigroupConfig::new(t.clone(), mu, lam, epsilon);
    cfg.n_paths = paths;
    cfg.t_final = t_final;
    cfg.seed = seed;
    cfg.initial = self::initial(initial, t)?;
    let times = uniform_times(t_final, snapshots);
    let with_variance = t.variance().is_some();
    let (s, counters) = py
        .detach(|| KmcModel::new(&cfg).and_then(|m| run_semigroup_ensemble(&m, &times, with_variance, None)))
        .map_err(py_err)?;
    let d = stats_dict(py, &s)?;
    d.set_item("jumps", counters.jumps)?;
    d.set_item("acceptance", counters.acceptance())?;
    Ok(d)
}

/// Evolves the `"langevin"` or `"semigroup"` transport equation from a
/// Cauchy bump of width 10h on `[-50, 50]`.
#[pyfunction]
#[pyo3(signature = (target, form = "semigroup", t_final = 5.0, snapshots = 10, mu = 1.0, lam = None))]
fn solve_fpe<'py>(
    py: Python<'py>,
    target: &PyTarget,
    form: &str,
    t_final: f64,
    snapshots: usize,
    mu: f64,
    lam: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let t = &target.inner;
    let lam = lam.unwrap_or_else(|| t.default_intensity());
    let mut cfg = SolveConfig::new(mu, lam, t_final).map_err(py_err)?;
    cfg.snapshot_times = uniform_times(t_final, snapshots);
    let rho0 = cauchy_bump(&cfg.grid, 0.0, 10.0 * cfg.grid.h()).map_err(py_err)?;
    let tr: Trajectory = match form {
        "langevin" => {
            let b = model_drift(t, mu, lam)?;
            let drift = cfg.grid.sample(|x| b.eval(x)).map_err(py_err)?;
            py.detach(|| evolve_langevin_fpe(&rho0, &drift, &cfg, Some(t))).map_err(py_err)?
        }
        "semigroup" => py.detach(|| evolve_semigroup_fpe(&rho0, t, &cfg)).map_err(py_err)?,
        other => return Err(PyValueError::new_err(format!("form must be langevin or semigroup, got '{other}'"))),
    };
    let d = PyDict::new(py);
    d.set_item("t", tr.snapshots.iter().map(|s| s.t).collect::<Vec<_>>())?;
    d.set_item("mass", tr.snapshots.iter().map(|s| s.mass).collect::<Vec<_>>())?;
    d.set_item("variance", tr.snapshots.iter().map(|s| s.variance).collect::<Vec<_>>())?;
    d.set_item("l1_to_target", tr.snapshots.iter().map(|s| s.l1_to_target).collect::<Vec<_>>())?;
    d.set_item("x", tr.last().rho.xs())?;
    d.set_item("final_density", tr.last().rho.values().to_vec())?;
    Ok(d)
}

/// Runs the command line with `args` (without the program name) and returns
/// its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    py.detach(|| levylab::cli::run(std::iter::once("levylab".to_string()).chain(args)))
}

#[pymodule]
pub fn levylab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTarget>()?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add_function(wrap_pyfunction!(sample_stable, m)?)?;
    m.add_function(wrap_pyfunction!(fractional_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(langevin_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(semigroup_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fpe, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
