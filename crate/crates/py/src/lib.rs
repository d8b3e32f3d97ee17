//! Python bindings. Results come back as plain dicts and lists so they can be
//! fed to numpy or pandas without extra wrapper types.

use std::collections::BTreeMap;

use ema_core::lagrange::{advance_ensemble, bkm_monitor, EnsembleConfig, Seeding};
use ema_core::spectral::{integrate, integrate_ep, IntegratorConfig, OdeSystem};
use ema_core::sweep::{run_sweep, Axis, SweepSpec};
use ema_core::threshold::{self, Verdict};
use ema_core::{flow, Error, ProfilePreset, RadialProfile};
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e {
        Error::Domain(_) | Error::Config(_) | Error::InvalidProfile(_) | Error::SingularInput(_) => PyValueError::new_err(msg),
        Error::FlowSingular { .. } => PyArithmeticError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn verdict_dict<'py>(py: Python<'py>, v: &Verdict) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("class", v.class.as_str())?;
    d.set_item("t_blowup", v.t_blowup)?;
    d.set_item("witness_r", v.witness_r)?;
    d.set_item("horizon", v.horizon)?;
    Ok(d)
}

fn integrator(horizon: f64, tol: Option<f64>) -> IntegratorConfig {
    let cfg = IntegratorConfig::default().with_horizon(horizon);
    match tol {
        Some(t) => cfg.with_tolerance(t),
        None => cfg,
    }
}

/// Radial initial data built from a named preset.
#[pyclass(name = "Profile", frozen, module = "ema")]
struct PyProfile {
    inner: RadialProfile,
    preset: String,
}

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (preset, n = 2, kappa = 1.0, r_max = 2.0, params = None))]
    fn new(preset: &str, n: usize, kappa: f64, r_max: f64, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let spec = ProfilePreset { name: preset.to_string(), params: params.unwrap_or_default() };
        let inner = RadialProfile::from_preset(&spec, n, kappa, r_max).map_err(to_py)?;
        Ok(PyProfile { inner, preset: preset.to_string() })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    #[getter]
    fn r_max(&self) -> f64 {
        self.inner.r_max()
    }

    fn __repr__(&self) -> String {
        format!("Profile('{}', n={}, kappa={}, r_max={})", self.preset, self.n(), self.kappa(), self.r_max())
    }

    /// `(p0, q0, mu0, nu0)` at radius `r`.
    fn spectral0(&self, r: f64) -> (f64, f64, f64, f64) {
        let p = &self.inner;
        (p.p0(r), p.q0(r), p.mu0(r), p.nu0(r))
    }

    #[pyo3(signature = (grid_size = threshold::DEFAULT_GRID_SIZE))]
    fn classify<'py>(&self, py: Python<'py>, grid_size: usize) -> PyResult<Bound<'py, PyDict>> {
        let v = threshold::classify_profile(&self.inner, &threshold::default_grid(&self.inner, grid_size)).map_err(to_py)?;
        verdict_dict(py, &v)
    }

    /// Closed-form flow quantities along the characteristic from `r0`.
    fn flow_sample<'py>(&self, py: Python<'py>, r0: f64, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let s = flow::flow_sample(&self.inner, r0, t).map_err(to_py)?;
        let d = PyDict::new(py);
        for (k, v) in [("r0", s.r0), ("t", s.t), ("r_t", s.r_t), ("lam1", s.lam1), ("lam2", s.lam2)] {
            d.set_item(k, v)?;
        }
        d.set_item("density", s.density)?;
        d.set_item("velocity", s.velocity)?;
        Ok(d)
    }

    /// Density at Eulerian radius `r` and time `t` from the closed-form flow.
    fn density_at(&self, r: f64, t: f64) -> PyResult<f64> {
        flow::density_at(&self.inner, r, t).map_err(to_py)
    }

    /// Runs the characteristic ensemble and returns its snapshots and diagnostics.
    #[pyo3(signature = (t_end, n_chars = 1024, grid_points = 201, output_times = None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        t_end: f64,
        n_chars: usize,
        grid_points: usize,
        output_times: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let ens = EnsembleConfig {
            seeding: Seeding::LogSpaced { count: n_chars },
            t_end,
            output_times: output_times.unwrap_or_default(),
            grid_points,
        };
        let inner = &self.inner;
        let run = py
            .detach(|| advance_ensemble(inner, &ens, &IntegratorConfig::default()))
            .map_err(to_py)?;
        let regular: Vec<_> = run.regular_snapshots().cloned().collect();
        let snaps = regular
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("t", s.t)?;
                for (k, v) in [("r", &s.grid), ("rho", &s.rho), ("u", &s.u), ("p", &s.p), ("q", &s.q), ("mu", &s.mu), ("nu", &s.nu)] {
                    d.set_item(k, v.clone())?;
                }
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        let d = PyDict::new(py);
        d.set_item("termination", run.termination.name())?;
        d.set_item("t_blowup", run.termination.singular_time())?;
        d.set_item("bkm_integral", bkm_monitor(&regular))?;
        d.set_item("path_invariant_drift", run.path_invariant_drift)?;
        d.set_item("density_consistency", run.density_consistency)?;
        d.set_item("snapshots", snaps)?;
        Ok(d)
    }
}

/// Verdict of a single initial point `(lambda0, h0)`.
#[pyfunction]
fn classify_point<'py>(py: Python<'py>, lambda0: f64, h0: f64, kappa: f64) -> PyResult<Bound<'py, PyDict>> {
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(PyValueError::new_err("kappa must be positive"));
    }
    verdict_dict(py, &threshold::classify_point(lambda0, h0, kappa))
}

#[pyfunction]
fn threshold_margin(lambda0: f64, h0: f64, kappa: f64) -> f64 {
    threshold::threshold_margin(lambda0, h0, kappa)
}

#[pyfunction]
fn blowup_time(lambda0: f64, h0: f64, kappa: f64) -> Option<f64> {
    threshold::blowup_time_closed_form(lambda0, h0, kappa)
}

/// Empirical critical `|lambda0|` at `h0` found by bisection.
#[pyfunction]
#[pyo3(signature = (h0, kappa, horizon = 200.0))]
fn sharpness(py: Python<'_>, h0: f64, kappa: f64, horizon: f64) -> PyResult<f64> {
    py.detach(|| threshold::sharpness_bisect(h0, kappa, horizon, &IntegratorConfig::default())).map_err(to_py)
}

/// Integrates one of the eigenvalue systems: `"qnu"`, `"pmu"`, `"swirl"`,
/// `"swirl_q_branch"` or `"ep_qnu"` (which also needs `n`).
#[pyfunction]
#[pyo3(signature = (system, initial, kappa = 1.0, horizon = 100.0, tol = None, n = None))]
fn integrate_system<'py>(
    py: Python<'py>,
    system: &str,
    initial: Vec<f64>,
    kappa: f64,
    horizon: f64,
    tol: Option<f64>,
    n: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let sys = match (system, n) {
        ("qnu", _) => OdeSystem::Qnu { kappa },
        ("pmu", _) => OdeSystem::Pmu { kappa },
        ("swirl", _) => OdeSystem::Swirl { kappa },
        ("swirl_q_branch", _) => OdeSystem::SwirlQBranch { kappa },
        ("ep_qnu", Some(n)) => OdeSystem::EpQnu { kappa, n },
        ("ep_qnu", None) => return Err(PyValueError::new_err("ep_qnu needs n")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown system '{other}'"))),
    };
    let traj = py.detach(|| integrate(sys, &initial, &integrator(horizon, tol))).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("times", traj.times)?;
    d.set_item("states", traj.states)?;
    d.set_item("termination", traj.termination.name())?;
    d.set_item("t_blowup", match traj.termination {
        ema_core::Termination::BlowupDetected { t_est } => Some(t_est),
        _ => None,
    })?;
    d.set_item("invariant_drift", traj.invariant_drift)?;
    Ok(d)
}

/// Euler–Poisson run to physical time `horizon`; returns `(reached_horizon, t_reached, energy_drift)`.
#[pyfunction]
#[pyo3(signature = (q0, nu0, n, kappa = 1.0, horizon = 100.0))]
fn euler_poisson(py: Python<'_>, q0: f64, nu0: f64, n: usize, kappa: f64, horizon: f64) -> PyResult<(bool, f64, f64)> {
    let cfg = IntegratorConfig::default().with_horizon(1e7);
    let out = py.detach(|| integrate_ep(q0, nu0, kappa, n, horizon, &cfg)).map_err(to_py)?;
    Ok((out.reached_horizon, out.t_reached, out.energy_drift))
}

/// Pointwise phase diagram; axes are `(min, max, count)`. Rows are
/// `(lambda0, h0, class, t_blowup)` in lexicographic order.
type SweepTuple = (f64, f64, &'static str, Option<f64>);

#[pyfunction]
fn sweep_pointwise(
    py: Python<'_>,
    kappa: f64,
    lambda0: (f64, f64, usize),
    h0: (f64, f64, usize),
) -> PyResult<Vec<SweepTuple>> {
    let axis = |(min, max, count)| Axis { min, max, count };
    let spec = SweepSpec::pointwise(kappa, axis(lambda0), axis(h0));
    let rows = py.detach(|| run_sweep(&spec)).map_err(to_py)?;
    Ok(rows.iter().map(|r| (r.lambda0, r.h0, r.verdict.class.as_str(), r.verdict.t_blowup)).collect())
}

#[pymodule]
fn ema(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(classify_point, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_margin, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_time, m)?)?;
    m.add_function(wrap_pyfunction!(sharpness, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_system, m)?)?;
    m.add_function(wrap_pyfunction!(euler_poisson, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_pointwise, m)?)?;
    m.add("PRESETS", ProfilePreset::NAMES.to_vec())?;
    Ok(())
}
