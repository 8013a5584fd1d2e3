//! Python bindings: `import pyfairmas`.

use std::collections::BTreeMap;

use fairmas::engine::{self, Action};
use fairmas::metrics::{self, FairnessMetric, OutcomeTable};
use fairmas::optimizer::nash::{self, NormalFormGame};
use fairmas::optimizer::problem_file::ProblemTable;
use fairmas::optimizer::{self as opt, Solution};
use fairmas::rng;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Simulation parameters. Built from `key = value` text; unset keys keep
/// their defaults.
#[pyclass(name = "SimulationConfig", module = "pyfairmas")]
struct PyConfig {
    inner: fairmas::SimulationConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        let inner = fairmas::SimulationConfig::from_config_str(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner
            .set(key, value)
            .map_err(|e| value_err(format!("{key}: {e}")))
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.clone().validate().map(|_| ()).map_err(value_err)
    }

    fn to_config_string(&self) -> String {
        self.inner.to_config_string()
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents
    }

    #[getter]
    fn n_rounds(&self) -> usize {
        self.inner.n_rounds
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn fairness_enabled(&self) -> bool {
        self.inner.fairness_enabled
    }

    #[setter]
    fn set_fairness_enabled(&mut self, on: bool) {
        self.inner.fairness_enabled = on;
    }

    #[getter]
    fn propagation_enabled(&self) -> bool {
        self.inner.propagation_enabled
    }

    #[setter]
    fn set_propagation_enabled(&mut self, on: bool) {
        self.inner.propagation_enabled = on;
    }

    fn __repr__(&self) -> String {
        format!(
            "SimulationConfig(n_agents={}, n_rounds={}, seed={}, fairness_enabled={})",
            self.inner.n_agents, self.inner.n_rounds, self.inner.seed, self.inner.fairness_enabled
        )
    }
}

#[pyclass(name = "SimulationResult", module = "pyfairmas")]
struct PySimResult {
    inner: engine::SimulationResult,
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn n_rounds(&self) -> usize {
        self.inner.rounds.len()
    }

    fn final_totals(&self) -> BTreeMap<String, f64> {
        self.inner
            .final_totals()
            .into_iter()
            .map(|(g, v)| (g.to_string(), v))
            .collect()
    }

    fn final_gap(&self) -> f64 {
        self.inner.final_gap()
    }

    /// Cumulative reward of `group` after each round.
    fn cumulative(&self, group: &str) -> Vec<f64> {
        self.inner
            .cumulative_by_group_per_round
            .get(&fairmas::GroupLabel::new(group))
            .cloned()
            .unwrap_or_default()
    }

    /// One dict per (round, agent).
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let mut out = Vec::new();
        for rec in &self.inner.rounds {
            for a in &rec.per_agent {
                let d = PyDict::new(py);
                d.set_item("round", rec.round)?;
                d.set_item("resource", rec.resource)?;
                d.set_item("agent_id", a.id)?;
                d.set_item("group", a.group.as_str())?;
                d.set_item("action", a.action.as_str())?;
                d.set_item("raw_reward", a.raw_reward)?;
                d.set_item("penalty_applied", a.penalty_applied)?;
                d.set_item("adjusted_reward", a.adjusted_reward)?;
                out.push(d);
            }
        }
        Ok(out)
    }

    fn agents<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .final_agents
            .iter()
            .map(|a| {
                let d = PyDict::new(py);
                d.set_item("id", a.id)?;
                d.set_item("group", a.group.as_str())?;
                d.set_item("bias", a.bias)?;
                d.set_item("weight", a.weight)?;
                d.set_item("cumulative_reward", a.cumulative_reward)?;
                Ok(d)
            })
            .collect()
    }
}

fn config_or_default(config: Option<PyRef<'_, PyConfig>>) -> fairmas::SimulationConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

#[pyfunction]
#[pyo3(signature = (config = None))]
fn run_simulation(config: Option<PyRef<'_, PyConfig>>) -> PyResult<PySimResult> {
    let inner = engine::run_simulation(config_or_default(config)).map_err(value_err)?;
    Ok(PySimResult { inner })
}

#[pyfunction]
#[pyo3(signature = (bias, resource, config = None))]
fn cooperate_probability(bias: f64, resource: f64, config: Option<PyRef<'_, PyConfig>>) -> f64 {
    engine::cooperate_probability(bias, resource, &config_or_default(config))
}

/// Returns `(reward, penalty_applied)`.
#[pyfunction]
#[pyo3(signature = (action, bias, config = None))]
fn assign_reward(
    action: &str,
    bias: f64,
    config: Option<PyRef<'_, PyConfig>>,
) -> PyResult<(f64, bool)> {
    let action: Action = action.parse().map_err(value_err)?;
    Ok(engine::assign_reward(
        action,
        bias,
        &config_or_default(config),
    ))
}

fn table(rows: Vec<(bool, bool, String)>) -> PyResult<OutcomeTable> {
    OutcomeTable::from_triples(rows.iter().map(|(a, b, g)| (*a, *b, g.as_str()))).map_err(value_err)
}

/// Rows are `(y_hat, y, attribute)`.
#[pyfunction]
fn demographic_parity_gap(rows: Vec<(bool, bool, String)>) -> PyResult<f64> {
    Ok(metrics::demographic_parity_gap(&table(rows)?))
}

#[pyfunction]
fn equalized_odds_gap(rows: Vec<(bool, bool, String)>) -> PyResult<f64> {
    metrics::equalized_odds_gap(&table(rows)?).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (rows, metric = "demographic_parity", threshold = 0.1))]
fn detect_bias<'py>(
    py: Python<'py>,
    rows: Vec<(bool, bool, String)>,
    metric: &str,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let metric: FairnessMetric = metric.parse().map_err(PyValueError::new_err)?;
    let r = metrics::detect_bias(&table(rows)?, metric, threshold).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("metric_name", r.metric_name)?;
    d.set_item("gap", r.gap)?;
    d.set_item("threshold", r.threshold)?;
    d.set_item("violated", r.violated)?;
    let per_group: BTreeMap<String, f64> = r
        .per_group
        .into_iter()
        .map(|(g, v)| (g.to_string(), v))
        .collect();
    d.set_item("per_group", per_group)?;
    Ok(d)
}

#[pyfunction]
fn mix_seed(base: u64, index: u64) -> u64 {
    rng::mix_seed(base, index)
}

#[pyfunction]
fn splitmix64(x: u64) -> u64 {
    rng::splitmix64(x)
}

/// Solves a problem file exactly. Returns `(action labels, value)` or
/// `None` when no profile is feasible.
#[pyfunction]
fn solve_problem(text: &str) -> PyResult<Option<(Vec<String>, f64)>> {
    let problem = ProblemTable::parse(text)
        .map_err(value_err)?
        .to_problem()
        .map_err(value_err)?;
    Ok(match opt::solve_bruteforce(&problem).map_err(value_err)? {
        Solution::Optimal { profile, value } => Some((
            problem
                .labels(&profile)
                .into_iter()
                .map(String::from)
                .collect(),
            value,
        )),
        Solution::Infeasible => None,
    })
}

/// Hill-climbing counterpart of `solve_problem`; `None` when no feasible
/// profile was found.
#[pyfunction]
#[pyo3(signature = (text, seed = 0, max_iters = 1000))]
fn local_search(text: &str, seed: u64, max_iters: usize) -> PyResult<Option<(Vec<String>, f64)>> {
    let problem = ProblemTable::parse(text)
        .map_err(value_err)?
        .to_problem()
        .map_err(value_err)?;
    let r = opt::solve_localsearch(&problem, seed, max_iters);
    Ok(r.feasible.then(|| {
        (
            problem
                .labels(&r.profile)
                .into_iter()
                .map(String::from)
                .collect(),
            r.value,
        )
    }))
}

/// Pure equilibria of a game given as a payoff table indexed by profile in
/// lexicographic order (first player most significant).
#[pyfunction]
fn find_pure_nash(
    strategies: Vec<Vec<String>>,
    payoffs: Vec<Vec<f64>>,
) -> PyResult<Vec<Vec<String>>> {
    let game = NormalFormGame::from_table(strategies, payoffs).map_err(value_err)?;
    let eqs = nash::find_pure_nash(&game).map_err(value_err)?;
    Ok(eqs
        .iter()
        .map(|p| game.labels(p).into_iter().map(String::from).collect())
        .collect())
}

#[pymodule]
fn pyfairmas(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(cooperate_probability, m)?)?;
    m.add_function(wrap_pyfunction!(assign_reward, m)?)?;
    m.add_function(wrap_pyfunction!(demographic_parity_gap, m)?)?;
    m.add_function(wrap_pyfunction!(equalized_odds_gap, m)?)?;
    m.add_function(wrap_pyfunction!(detect_bias, m)?)?;
    m.add_function(wrap_pyfunction!(mix_seed, m)?)?;
    m.add_function(wrap_pyfunction!(splitmix64, m)?)?;
    m.add_function(wrap_pyfunction!(solve_problem, m)?)?;
    m.add_function(wrap_pyfunction!(local_search, m)?)?;
    m.add_function(wrap_pyfunction!(find_pure_nash, m)?)?;
    Ok(())
}
