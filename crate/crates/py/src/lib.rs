//! Python module `coopcell`.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use coopcell as core;
use coopcell::mobility::{handoff_rate, run_replications, serving_handoff_rate};
use coopcell::{CoopPolicy, DistanceLaw, GainMode};

create_exception!(coopcell, CoopcellError, PyException);

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::InvalidParameter { .. } | core::Error::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => CoopcellError::new_err(e.to_string()),
    }
}

/// Network parameters. `lambda_s` and `cell_radius` stay consistent.
#[pyclass(name = "NetworkParams", from_py_object)]
#[derive(Clone)]
struct PyNetworkParams {
    inner: core::NetworkParams,
}

#[pymethods]
impl PyNetworkParams {
    #[new]
    #[pyo3(signature = (cell_radius=50.0, eta=4.0, n_t=4, n_r=2, epsilon_db=0.0, p_s=1.0, sigma2=0.0))]
    fn new(
        cell_radius: f64,
        eta: f64,
        n_t: u32,
        n_r: u32,
        epsilon_db: f64,
        p_s: f64,
        sigma2: f64,
    ) -> PyResult<Self> {
        let mut inner = core::NetworkParams::default()
            .with_cell_radius(cell_radius)
            .with_eta(eta)
            .with_antennas(n_t, n_r)
            .with_epsilon_db(epsilon_db);
        inner.p_s = p_s;
        inner.sigma2 = sigma2;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lambda_s(&self) -> f64 {
        self.inner.lambda_s
    }
    #[getter]
    fn cell_radius(&self) -> f64 {
        self.inner.cell_radius
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }
    #[getter]
    fn n_t(&self) -> u32 {
        self.inner.n_t
    }
    #[getter]
    fn n_r(&self) -> u32 {
        self.inner.n_r
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    fn __repr__(&self) -> String {
        let n = &self.inner;
        format!(
            "NetworkParams(cell_radius={}, eta={}, n_t={}, n_r={}, epsilon={})",
            n.cell_radius, n.eta, n.n_t, n.n_r, n.epsilon
        )
    }
}

/// Cooperative threshold with its set-size truncation.
#[pyclass(name = "CoopPolicy", from_py_object)]
#[derive(Clone)]
struct PyCoopPolicy {
    inner: CoopPolicy,
}

#[pymethods]
impl PyCoopPolicy {
    /// Without `k_max`, the smallest truncation whose tail is below `tail_tolerance`.
    #[new]
    #[pyo3(signature = (rho=1.2, k_max=None, tail_tolerance=1e-9))]
    fn new(rho: f64, k_max: Option<usize>, tail_tolerance: f64) -> PyResult<Self> {
        let inner = match k_max {
            Some(k_max) => CoopPolicy {
                rho,
                k_max,
                tail_tolerance,
            },
            None => CoopPolicy::with_adequate_truncation(rho, tail_tolerance).map_err(to_py)?,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn k_max(&self) -> usize {
        self.inner.k_max
    }
    fn tail_bound(&self) -> f64 {
        self.inner.tail_bound()
    }

    fn __repr__(&self) -> String {
        format!("CoopPolicy(rho={}, k_max={})", self.inner.rho, self.inner.k_max)
    }
}

fn law(k: usize, distance_order: Option<u32>, fixed_distance: Option<f64>) -> PyResult<DistanceLaw> {
    match (distance_order, fixed_distance) {
        (Some(_), Some(_)) => Err(PyValueError::new_err(
            "give distance_order or fixed_distance, not both",
        )),
        (Some(m), None) => Ok(DistanceLaw::NearestOrder(m)),
        (None, Some(d)) => Ok(DistanceLaw::FixedDistance(d)),
        (None, None) => Ok(DistanceLaw::default_for(k)),
    }
}

/// Probability that the i-th nearest BS cooperates.
#[pyfunction]
#[pyo3(signature = (i, rho, lambda_s=core::geometry::intensity_for_radius(50.0)))]
fn coop_prob_member(i: usize, rho: f64, lambda_s: f64) -> PyResult<f64> {
    core::coop_prob_member(i, rho, lambda_s).map_err(to_py)
}

/// Probability that exactly k BSs cooperate.
#[pyfunction]
#[pyo3(signature = (k, rho, lambda_s=core::geometry::intensity_for_radius(50.0)))]
fn coop_prob_exactly(k: usize, rho: f64, lambda_s: f64) -> PyResult<f64> {
    core::coop_prob_exactly(k, rho, lambda_s).map_err(to_py)
}

#[pyfunction]
fn expected_coop_count(rho: f64) -> PyResult<f64> {
    core::expected_coop_count(rho).map_err(to_py)
}

#[pyfunction]
fn laplace_interference(s: f64, r_guard: f64, net: &PyNetworkParams) -> PyResult<f64> {
    core::laplace_interference(s, r_guard, &net.inner).map_err(to_py)
}

#[pyfunction]
fn coverage_given_distance(d: f64, k: usize, net: &PyNetworkParams) -> PyResult<f64> {
    core::coverage_given_distance(d, k, &net.inner).map_err(to_py)
}

/// Analytical coverage of `k` cooperating BSs.
#[pyfunction]
#[pyo3(signature = (k, net, distance_order=None, fixed_distance=None))]
fn coverage_probability(
    k: usize,
    net: &PyNetworkParams,
    distance_order: Option<u32>,
    fixed_distance: Option<f64>,
) -> PyResult<f64> {
    let law = law(k, distance_order, fixed_distance)?;
    core::coverage_probability(k, &net.inner, law).map_err(to_py)
}

/// Monte Carlo coverage; returns mean, std_error, ci_low, ci_high.
#[pyfunction]
#[pyo3(signature = (k, net, trials=10_000, seed=1, exact_lambda_max=false, distance_order=None, fixed_distance=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_coverage<'py>(
    py: Python<'py>,
    k: usize,
    net: &PyNetworkParams,
    trials: u64,
    seed: u64,
    exact_lambda_max: bool,
    distance_order: Option<u32>,
    fixed_distance: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let law = law(k, distance_order, fixed_distance)?;
    let mode = if exact_lambda_max {
        GainMode::ExactLambdaMax
    } else {
        GainMode::GammaSum
    };
    let inner = net.inner;
    let est = py
        .detach(|| core::simulate_coverage(&inner, k, law, mode, trials, seed))
        .map_err(to_py)?;
    let (lo, hi) = est.ci();
    let d = PyDict::new(py);
    d.set_item("mean", est.mean)?;
    d.set_item("std_error", est.std_error)?;
    d.set_item("ci_low", lo)?;
    d.set_item("ci_high", hi)?;
    d.set_item("trials", est.n_trials)?;
    Ok(d)
}

/// Handoff rates per second over simulated Gauss-Markov trajectories.
#[pyfunction]
#[pyo3(signature = (net, rho, mean_speed=10.0, alpha=1.0, tau=0.015, total_time=200.0, replications=100, seed=1))]
#[allow(clippy::too_many_arguments)]
fn simulate_handoff<'py>(
    py: Python<'py>,
    net: &PyNetworkParams,
    rho: f64,
    mean_speed: f64,
    alpha: f64,
    tau: f64,
    total_time: f64,
    replications: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mob = core::MobilityParams {
        alpha,
        mean_speed,
        tau,
        total_time,
        seed,
        ..core::MobilityParams::default()
    };
    let lambda = net.inner.lambda_s;
    let (coop, serving) = py
        .detach(|| -> core::Result<_> {
            let traces = run_replications(lambda, &mob, rho, replications)?;
            Ok((handoff_rate(&traces)?, serving_handoff_rate(&traces)?))
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("handoff_rate", coop.rate)?;
    d.set_item("handoff_rate_std_error", coop.std_error)?;
    d.set_item("serving_handoff_rate", serving.rate)?;
    d.set_item("serving_handoff_rate_std_error", serving.std_error)?;
    d.set_item("total_handoffs", coop.total_handoffs)?;
    d.set_item("total_duration", coop.total_duration)?;
    Ok(d)
}

/// Capacity in bit/s with the default overhead parameters.
#[pyfunction]
fn vehicular_capacity(net: &PyNetworkParams, policy: &PyCoopPolicy) -> PyResult<f64> {
    core::vehicular_capacity(&net.inner, &policy.inner, &core::OverheadParams::default()).map_err(to_py)
}

/// Overhead report for a given handoff rate, as a dict.
#[pyfunction]
fn overhead_ratio<'py>(
    py: Python<'py>,
    net: &PyNetworkParams,
    policy: &PyCoopPolicy,
    handoff_rate: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = core::overhead_ratio(
        &net.inner,
        &policy.inner,
        handoff_rate,
        &core::OverheadParams::default(),
    )
    .map_err(to_py)?;
    let d = PyDict::new(py);
    for (k, v) in r.key_values() {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// BS positions of a PPP on a disc, as a list of (x, y).
#[pyfunction]
#[pyo3(signature = (lambda_s, window_radius, seed=1))]
fn sample_ppp(lambda_s: f64, window_radius: f64, seed: u64) -> PyResult<Vec<(f64, f64)>> {
    let mut rng = core::rng::substream(seed, core::rng::purpose::DEPLOYMENT, 0);
    let dep = core::sample_ppp(lambda_s, window_radius, 0.0, &mut rng).map_err(to_py)?;
    Ok(dep.bs_positions.iter().map(|p| (p.x, p.y)).collect())
}

/// Indices of the BSs within `rho` times the nearest distance, nearest first.
#[pyfunction]
fn select_coop_set(positions: Vec<(f64, f64)>, vehicle: (f64, f64), rho: f64) -> PyResult<Vec<usize>> {
    let pts: Vec<core::Point> = positions.iter().map(|&(x, y)| core::Point::new(x, y)).collect();
    let radius = pts
        .iter()
        .map(|p| p.norm())
        .fold(0.0, f64::max)
        .max(core::Point::new(vehicle.0, vehicle.1).norm());
    let dep = core::Deployment::new(pts, radius, 0.0);
    core::select_coop_set(&dep, &core::Point::new(vehicle.0, vehicle.1), rho).map_err(to_py)
}

#[pymodule(name = "coopcell")]
fn coopcell_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CoopcellError", m.py().get_type::<CoopcellError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyNetworkParams>()?;
    m.add_class::<PyCoopPolicy>()?;
    m.add_function(wrap_pyfunction!(coop_prob_member, m)?)?;
    m.add_function(wrap_pyfunction!(coop_prob_exactly, m)?)?;
    m.add_function(wrap_pyfunction!(expected_coop_count, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_interference, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_given_distance, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_probability, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_handoff, m)?)?;
    m.add_function(wrap_pyfunction!(vehicular_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(overhead_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(sample_ppp, m)?)?;
    m.add_function(wrap_pyfunction!(select_coop_set, m)?)?;
    Ok(())
}
