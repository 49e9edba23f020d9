//! Python bindings for `nonconv-core`.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use nonconv_core::erlaw;
use nonconv_core::lattice::{self, PrimeBasis};
use nonconv_core::rates;
use nonconv_core::simulate::{self as sim, Mode, TrajectorySpec};
use nonconv_core::{model, Error, Preset};

create_exception!(
    nonconv,
    NonconvError,
    PyException,
    "Base class for library errors."
);
create_exception!(
    nonconv,
    InputError,
    NonconvError,
    "Invalid argument (exit code 2 in the CLI)."
);
create_exception!(
    nonconv,
    DegenerateError,
    NonconvError,
    "F is almost surely constant."
);
create_exception!(
    nonconv,
    CapacityError,
    NonconvError,
    "Exact integer or table capacity exceeded."
);
create_exception!(
    nonconv,
    BudgetError,
    NonconvError,
    "Exact enumeration exceeds its budget."
);
create_exception!(
    nonconv,
    ToleranceError,
    NonconvError,
    "Requested tolerance cannot be certified."
);

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Input(_) => InputError::new_err(msg),
        Error::Degenerate { .. } => DegenerateError::new_err(msg),
        Error::Capacity(_) => CapacityError::new_err(msg),
        Error::BudgetExceeded { .. } => BudgetError::new_err(msg),
        Error::ToleranceUnreachable { .. } => ToleranceError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for nonconv_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().py()
}

/// Finitely supported law μ.
#[pyclass(frozen, skip_from_py_object, module = "nonconv")]
#[derive(Clone)]
struct Distribution(model::FiniteDistribution);

#[pymethods]
impl Distribution {
    #[new]
    fn new(values: Vec<f64>, probs: Vec<f64>) -> PyResult<Self> {
        model::FiniteDistribution::new(values, probs).py().map(Self)
    }

    #[staticmethod]
    fn uniform(values: Vec<f64>) -> PyResult<Self> {
        model::FiniteDistribution::uniform(values).py().map(Self)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.0.probs().to_vec()
    }

    #[getter]
    fn support_size(&self) -> usize {
        self.0.support_size()
    }

    fn __repr__(&self) -> String {
        format!(
            "Distribution(values={:?}, probs={:?})",
            self.0.values(),
            self.0.probs()
        )
    }
}

/// Function F on ℓ-tuples of support indices, stored as a table.
#[pyclass(frozen, skip_from_py_object, module = "nonconv")]
#[derive(Clone)]
struct Observable(model::Observable);

#[pymethods]
impl Observable {
    /// F(x) = Π x_j.
    #[staticmethod]
    fn product(dist: &Distribution, ell: usize) -> PyResult<Self> {
        model::Observable::product(&dist.0, ell).py().map(Self)
    }

    /// F(x) = 1{all x_j equal}.
    #[staticmethod]
    fn indicator_equal(dist: &Distribution, ell: usize) -> PyResult<Self> {
        model::Observable::indicator_equal(&dist.0, ell)
            .py()
            .map(Self)
    }

    /// Row-major table of length s^ℓ, first coordinate most significant.
    #[staticmethod]
    fn from_table(dist: &Distribution, ell: usize, table: Vec<f64>) -> PyResult<Self> {
        model::Observable::from_table(&dist.0, ell, table)
            .py()
            .map(Self)
    }

    #[staticmethod]
    fn constant(dist: &Distribution, ell: usize, c: f64) -> PyResult<Self> {
        model::Observable::constant(&dist.0, ell, c).py().map(Self)
    }

    fn center(&self) -> Self {
        Self(self.0.center())
    }

    fn negate(&self) -> Self {
        Self(self.0.negate())
    }

    /// F at a tuple of support indices.
    fn evaluate(&self, indices: Vec<usize>) -> PyResult<f64> {
        self.0.evaluate(&indices).py()
    }

    #[getter]
    fn ell(&self) -> usize {
        self.0.ell()
    }

    #[getter]
    fn table(&self) -> Vec<f64> {
        self.0.table().to_vec()
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance()
    }

    #[getter]
    fn sup_abs(&self) -> f64 {
        self.0.sup_abs()
    }

    #[getter]
    fn sup_pos(&self) -> f64 {
        self.0.sup_pos()
    }

    #[getter]
    fn sup_neg(&self) -> f64 {
        self.0.sup_neg()
    }

    fn __repr__(&self) -> String {
        format!(
            "Observable(ell={}, mean={}, variance={}, sup_abs={})",
            self.0.ell(),
            self.0.mean(),
            self.0.variance(),
            self.0.sup_abs()
        )
    }
}

/// Built-in model: returns `(Distribution, Observable)`.
#[pyfunction]
#[pyo3(signature = (name, ell = 2))]
fn preset(name: &str, ell: usize) -> PyResult<(Distribution, Observable)> {
    let m = name.parse::<Preset>().py()?.build(ell).py()?;
    Ok((Distribution(m.dist), Observable(m.obs)))
}

/// Model from the JSON model-file format.
#[pyfunction]
fn model_from_json(text: &str) -> PyResult<(Distribution, Observable)> {
    let m = nonconv_core::Model::from_json(text).py()?;
    Ok((Distribution(m.dist), Observable(m.obs)))
}

/// The l-th smallest ℓ-smooth numbers h_1, …, h_{count+1}.
#[pyfunction]
fn smooth_numbers(ell: usize, count: usize) -> PyResult<Vec<u128>> {
    let basis = PrimeBasis::new(ell).py()?;
    Ok(lattice::smooth_numbers(&basis, count)
        .py()?
        .values()
        .to_vec())
}

/// `[(a, |B_N(a)|)]` over the coprime skeleton of {1..N}.
#[pyfunction]
fn fiber_sizes(ell: usize, n: u64) -> PyResult<Vec<(u64, usize)>> {
    Ok(lattice::fiber_sizes(&PrimeBasis::new(ell).py()?, n))
}

#[pyfunction]
fn partition_check(ell: usize, n: u64) -> PyResult<bool> {
    Ok(lattice::partition_check(&PrimeBasis::new(ell).py()?, n))
}

/// Cramér rate I(α); `inf` outside the support of F.
#[pyfunction]
fn cramer_rate(dist: &Distribution, obs: &Observable, alpha: f64) -> PyResult<f64> {
    rates::cramer_rate(&dist.0, &obs.0, alpha)
        .py()
        .map(|v| v.value())
}

/// Q(λF) with bookkeeping.
#[pyclass(frozen, get_all, module = "nonconv")]
struct PressureValue {
    lam: f64,
    value: f64,
    derivative: f64,
    truncation: usize,
    tail_bound: f64,
}

#[pymethods]
impl PressureValue {
    fn __repr__(&self) -> String {
        format!(
            "PressureValue(lam={}, value={}, derivative={}, truncation={}, tail_bound={:e})",
            self.lam, self.value, self.derivative, self.truncation, self.tail_bound
        )
    }
}

fn build_pressure(
    dist: &Distribution,
    obs: &Observable,
    tol: f64,
    budget: u64,
) -> PyResult<rates::Pressure> {
    let basis = PrimeBasis::new(obs.0.ell()).py()?;
    Ok(rates::Pressure::new(&dist.0, &obs.0, &basis, tol)
        .py()?
        .with_budget(budget))
}

/// Pressure Q(λF), with exact R_l tables cached across calls.
#[pyclass(frozen, module = "nonconv")]
struct Pressure(rates::Pressure);

#[pymethods]
impl Pressure {
    #[new]
    #[pyo3(signature = (dist, obs, tol = 1e-8, budget = rates::DEFAULT_BUDGET))]
    fn new(dist: &Distribution, obs: &Observable, tol: f64, budget: u64) -> PyResult<Self> {
        build_pressure(dist, obs, tol, budget).map(Self)
    }

    fn eval(&self, py: Python<'_>, lam: f64) -> PyResult<PressureValue> {
        let v = py.detach(|| self.0.eval(lam)).py()?;
        Ok(PressureValue {
            lam,
            value: v.value,
            derivative: v.derivative,
            truncation: v.truncation,
            tail_bound: v.tail_bound,
        })
    }

    fn __call__(&self, py: Python<'_>, lam: f64) -> PyResult<f64> {
        py.detach(|| self.0.value(lam)).py()
    }

    /// (1/N) ln E exp(λ S_N), exactly.
    fn finite(&self, py: Python<'_>, lam: f64, n: u64) -> PyResult<f64> {
        py.detach(|| self.0.finite(lam, n)).py()
    }
}

/// Rate function J(u) of a centered, nondegenerate observable.
#[pyclass(frozen, module = "nonconv")]
struct RateJ(rates::RateJ);

#[pymethods]
impl RateJ {
    #[new]
    #[pyo3(signature = (dist, obs, tol = 1e-8, budget = rates::DEFAULT_BUDGET))]
    fn new(dist: &Distribution, obs: &Observable, tol: f64, budget: u64) -> PyResult<Self> {
        rates::RateJ::new(build_pressure(dist, obs, tol, budget)?)
            .py()
            .map(Self)
    }

    /// J(u); `inf` beyond the detected endpoints.
    fn __call__(&self, py: Python<'_>, u: f64) -> PyResult<f64> {
        py.detach(|| self.0.eval(u)).py().map(|v| v.value())
    }

    /// `(L₊, L₋)` = `(Q′(λ_cap), −Q′(−λ_cap))`.
    fn endpoints(&self, py: Python<'_>) -> PyResult<(f64, f64)> {
        let e = py.detach(|| self.0.endpoints()).py()?;
        Ok((e.upper, e.lower))
    }
}

/// J(u) at tolerance `tol` for the series.
#[pyfunction]
#[pyo3(signature = (dist, obs, u, tol = 1e-8))]
fn rate_j(
    py: Python<'_>,
    dist: &Distribution,
    obs: &Observable,
    u: f64,
    tol: f64,
) -> PyResult<f64> {
    RateJ::new(dist, obs, tol, rates::DEFAULT_BUDGET)?.__call__(py, u)
}

/// Prefix sums S_0, …, S_n.
#[pyfunction]
#[pyo3(signature = (dist, obs, n, seed, mode = "nonconventional"))]
fn simulate(
    py: Python<'_>,
    dist: &Distribution,
    obs: &Observable,
    n: usize,
    seed: u64,
    mode: &str,
) -> PyResult<Vec<f64>> {
    let mode = parse_mode(mode)?;
    let spec = TrajectorySpec {
        seed,
        n,
        dist: &dist.0,
        obs: &obs.0,
        mode,
    };
    Ok(py.detach(|| sim::simulate(&spec)).py()?.prefix)
}

/// Support index of X_i for a seed.
#[pyfunction]
fn x_value(dist: &Distribution, seed: u64, i: u64) -> usize {
    sim::x_value(&dist.0, seed, i)
}

#[pyclass(frozen, get_all, module = "nonconv")]
struct LdpEstimate {
    n: usize,
    u: f64,
    replicas: usize,
    hits: usize,
    p_hat: f64,
    rate_hat: f64,
    ci_low: f64,
    ci_high: f64,
    zero_count: bool,
    mode: String,
}

#[pymethods]
impl LdpEstimate {
    fn __repr__(&self) -> String {
        format!(
            "LdpEstimate(N={}, u={}, replicas={}, p_hat={}, rate_hat={}, ci=({}, {}))",
            self.n, self.u, self.replicas, self.p_hat, self.rate_hat, self.ci_low, self.ci_high
        )
    }
}

/// Monte Carlo estimate of P(S_N/N ≥ u).
#[pyfunction]
#[pyo3(signature = (dist, obs, n, u, replicas = 100_000, seed = 1, mode = "nonconventional"))]
#[allow(clippy::too_many_arguments)]
fn ldp_estimate(
    py: Python<'_>,
    dist: &Distribution,
    obs: &Observable,
    n: usize,
    u: f64,
    replicas: usize,
    seed: u64,
    mode: &str,
) -> PyResult<LdpEstimate> {
    let mode = parse_mode(mode)?;
    let e = py
        .detach(|| sim::ldp_estimate(&dist.0, &obs.0, n, u, replicas, seed, mode))
        .py()?;
    Ok(LdpEstimate {
        n: e.n,
        u: e.u,
        replicas: e.replicas,
        hits: e.hits,
        p_hat: e.p_hat,
        rate_hat: e.rate_hat,
        ci_low: e.ci_low,
        ci_high: e.ci_high,
        zero_count: e.zero_count,
        mode: e.mode.as_str().to_string(),
    })
}

#[pyfunction]
fn b_window(n: usize, i_alpha: f64) -> PyResult<usize> {
    erlaw::b_window(n, i_alpha).py()
}

/// max over m of S_{m+b} − S_m for prefix sums S_0..S_n.
#[pyfunction]
fn window_max(prefix: Vec<f64>, b: usize) -> PyResult<f64> {
    erlaw::window_max(&prefix, b).py()
}

#[pyclass(frozen, get_all, module = "nonconv")]
struct ErPoint {
    alpha: f64,
    i_alpha: f64,
    n: usize,
    b_n: usize,
    seed: u64,
    mode: String,
    max_increment: f64,
    statistic: f64,
    normalized: f64,
}

#[pyclass(frozen, get_all, module = "nonconv")]
struct ErSummary {
    alpha: f64,
    n: usize,
    mode: String,
    seeds: usize,
    mean: f64,
    min: f64,
    max: f64,
    mean_abs_dev: f64,
    max_abs_dev: f64,
}

/// Erdős–Rényi experiment; returns `(rows, summary)`.
#[pyfunction]
#[pyo3(signature = (dist, obs, alphas, ns, seeds = vec![1, 2, 3, 4, 5], modes = vec!["nonconventional".to_string()]))]
fn erlaw_experiment(
    py: Python<'_>,
    dist: &Distribution,
    obs: &Observable,
    alphas: Vec<f64>,
    ns: Vec<usize>,
    seeds: Vec<u64>,
    modes: Vec<String>,
) -> PyResult<(Vec<ErPoint>, Vec<ErSummary>)> {
    let mut cfg = erlaw::ErConfig::new(alphas, ns);
    cfg.seeds = seeds;
    cfg.modes = modes
        .iter()
        .map(|m| parse_mode(m))
        .collect::<PyResult<_>>()?;
    let out = py
        .detach(|| erlaw::experiment(&dist.0, &obs.0, &cfg))
        .py()?;
    let rows = out
        .rows
        .into_iter()
        .map(|r| ErPoint {
            alpha: r.alpha,
            i_alpha: r.i_alpha,
            n: r.n,
            b_n: r.b_n,
            seed: r.seed,
            mode: r.mode.as_str().to_string(),
            max_increment: r.max_increment,
            statistic: r.statistic,
            normalized: r.normalized,
        })
        .collect();
    let summary = out
        .summary
        .into_iter()
        .map(|s| ErSummary {
            alpha: s.alpha,
            n: s.n,
            mode: s.mode.as_str().to_string(),
            seeds: s.seeds,
            mean: s.mean,
            min: s.min,
            max: s.max,
            mean_abs_dev: s.mean_abs_dev,
            max_abs_dev: s.max_abs_dev,
        })
        .collect();
    Ok((rows, summary))
}

#[pymodule]
fn nonconv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("NonconvError", py.get_type::<NonconvError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("DegenerateError", py.get_type::<DegenerateError>())?;
    m.add("CapacityError", py.get_type::<CapacityError>())?;
    m.add("BudgetError", py.get_type::<BudgetError>())?;
    m.add("ToleranceError", py.get_type::<ToleranceError>())?;
    m.add_class::<Distribution>()?;
    m.add_class::<Observable>()?;
    m.add_class::<Pressure>()?;
    m.add_class::<RateJ>()?;
    m.add_class::<PressureValue>()?;
    m.add_class::<LdpEstimate>()?;
    m.add_class::<ErPoint>()?;
    m.add_class::<ErSummary>()?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(model_from_json, m)?)?;
    m.add_function(wrap_pyfunction!(smooth_numbers, m)?)?;
    m.add_function(wrap_pyfunction!(fiber_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(partition_check, m)?)?;
    m.add_function(wrap_pyfunction!(cramer_rate, m)?)?;
    m.add_function(wrap_pyfunction!(rate_j, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(x_value, m)?)?;
    m.add_function(wrap_pyfunction!(ldp_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(b_window, m)?)?;
    m.add_function(wrap_pyfunction!(window_max, m)?)?;
    m.add_function(wrap_pyfunction!(erlaw_experiment, m)?)?;
    Ok(())
}
