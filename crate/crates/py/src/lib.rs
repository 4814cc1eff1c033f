//! Python module exposing the solver: model and strategy types plus the
//! evaluation, search, and decision entry points. All beliefs cross the
//! boundary as plain lists of weights ordered like the model's states.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pomdp_lra_core::{approx, belief, blind, chain, corpus, model, strategy};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen)]
struct Pomdp {
    inner: model::Pomdp,
}

#[pymethods]
impl Pomdp {
    /// Parse the JSON model format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model::parse_pomdp(text).map_err(err)?,
        })
    }

    fn render(&self) -> String {
        model::render_pomdp(&self.inner)
    }

    /// Violation messages; empty means the model is sound.
    fn validate(&self) -> Vec<String> {
        model::validate(&self.inner)
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.states.clone()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.actions.clone()
    }

    #[getter]
    fn signals(&self) -> Vec<String> {
        self.inner.signals.clone()
    }

    #[getter]
    fn initial_belief(&self) -> Vec<f64> {
        self.inner.initial_belief.weights.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Pomdp(states={}, actions={}, signals={})",
            self.inner.n_states(),
            self.inner.n_actions(),
            self.inner.n_signals()
        )
    }
}

#[pyclass(frozen)]
struct Strategy {
    inner: strategy::Strategy,
}

#[pymethods]
impl Strategy {
    /// Parse the JSON strategy format against a model's names.
    #[staticmethod]
    fn parse(pomdp: &Pomdp, text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: strategy::parse_strategy(text, &pomdp.inner).map_err(err)?,
        })
    }

    fn render(&self, pomdp: &Pomdp) -> String {
        strategy::render_strategy(&pomdp.inner, &self.inner)
    }

    fn __repr__(&self) -> String {
        let kind = match &self.inner {
            strategy::Strategy::FiniteMemory(s) => {
                format!("finite_memory, {} states", s.memory_states.len())
            }
            strategy::Strategy::EventuallyPeriodic(s) => format!(
                "eventually_periodic, prefix {} period {}",
                s.prefix.len(),
                s.period.len()
            ),
            strategy::Strategy::FiniteRecall(s) => format!("finite_recall, recall {}", s.recall),
        };
        format!("Strategy({kind})")
    }
}

fn resolve_belief(pomdp: &Pomdp, weights: Option<Vec<f64>>) -> PyResult<model::Belief> {
    match weights {
        Some(w) => model::Belief::new(w).map_err(err),
        None => Ok(pomdp.inner.initial_belief.clone()),
    }
}

fn transducer(pomdp: &Pomdp, sigma: &Strategy) -> strategy::FiniteMemoryStrategy {
    sigma.inner.to_finite_memory(pomdp.inner.n_signals())
}

#[pyfunction]
fn ex1() -> Pomdp {
    Pomdp { inner: corpus::ex1() }
}

#[pyfunction]
fn ex2() -> Pomdp {
    Pomdp { inner: corpus::ex2() }
}

#[pyfunction]
fn triv1() -> Pomdp {
    Pomdp { inner: corpus::triv1() }
}

#[pyfunction]
fn ex1_alternating() -> Strategy {
    Strategy {
        inner: strategy::Strategy::FiniteMemory(corpus::ex1_alternating()),
    }
}

#[pyfunction]
fn ex1_constant_a() -> Strategy {
    Strategy {
        inner: strategy::Strategy::FiniteMemory(corpus::ex1_constant_a()),
    }
}

#[pyfunction]
fn ex2_optimal() -> Strategy {
    Strategy {
        inner: strategy::Strategy::FiniteMemory(corpus::ex2_optimal()),
    }
}

/// Exact long-run average gain of a strategy from a belief.
#[pyfunction]
#[pyo3(signature = (pomdp, sigma, belief=None))]
fn gain(pomdp: &Pomdp, sigma: &Strategy, belief: Option<Vec<f64>>) -> PyResult<f64> {
    let p1 = resolve_belief(pomdp, belief)?;
    chain::gain(&pomdp.inner, &p1, &transducer(pomdp, sigma)).map_err(err)
}

/// Exact gain started from each state, keyed by state name.
#[pyfunction]
#[pyo3(signature = (pomdp, sigma, belief=None))]
fn per_state_gains(
    pomdp: &Pomdp,
    sigma: &Strategy,
    belief: Option<Vec<f64>>,
) -> PyResult<std::collections::BTreeMap<String, f64>> {
    let p1 = resolve_belief(pomdp, belief)?;
    let result = chain::evaluate(&pomdp.inner, &p1, &transducer(pomdp, sigma)).map_err(err)?;
    Ok(pomdp
        .inner
        .states
        .iter()
        .cloned()
        .zip(result.per_state_gains.iter().copied())
        .collect())
}

/// Posterior belief and the probability of observing `signal` under
/// `action` from `belief`.
#[pyfunction]
fn bayes_update(
    pomdp: &Pomdp,
    belief: Vec<f64>,
    action: &str,
    signal: &str,
) -> PyResult<(Vec<f64>, f64)> {
    let p = model::Belief::new(belief).map_err(err)?;
    let a = pomdp
        .inner
        .action_index(action)
        .ok_or_else(|| err(format!("unknown action '{action}'")))?;
    let s = pomdp
        .inner
        .signal_index(signal)
        .ok_or_else(|| err(format!("unknown signal '{signal}'")))?;
    let (posterior, prob) = belief::bayes_update(&pomdp.inner, &p, a, s).map_err(err)?;
    Ok((posterior.weights, prob))
}

/// Empirical average reward of one seeded run.
#[pyfunction]
#[pyo3(signature = (pomdp, sigma, horizon, seed, belief=None))]
fn simulate_average(
    pomdp: &Pomdp,
    sigma: &Strategy,
    horizon: usize,
    seed: u64,
    belief: Option<Vec<f64>>,
) -> PyResult<f64> {
    let p1 = resolve_belief(pomdp, belief)?;
    chain::simulate_average(&pomdp.inner, &p1, &transducer(pomdp, sigma), horizon, seed)
        .map_err(err)
}

/// Best eventually periodic word on a blind model within the bounds.
/// Returns (prefix action names, period action names, gain).
#[pyfunction]
#[pyo3(signature = (pomdp, max_prefix, max_period, belief=None))]
fn search_periodic(
    pomdp: &Pomdp,
    max_prefix: usize,
    max_period: usize,
    belief: Option<Vec<f64>>,
) -> PyResult<(Vec<String>, Vec<String>, f64)> {
    let p1 = resolve_belief(pomdp, belief)?;
    let found =
        blind::search_periodic(&pomdp.inner, &p1, max_prefix, max_period).map_err(err)?;
    let name = |a: &usize| pomdp.inner.actions[*a].clone();
    Ok((
        found.prefix.iter().map(name).collect(),
        found.period.iter().map(name).collect(),
        found.gain,
    ))
}

/// Anytime value bounds by transducer enumeration; stops when the gap
/// drops to `epsilon` or a budget runs out.
#[pyfunction]
#[pyo3(signature = (pomdp, epsilon, max_memory=None, max_candidates=None, belief=None))]
fn approximate<'py>(
    py: Python<'py>,
    pomdp: &Pomdp,
    epsilon: f64,
    max_memory: Option<usize>,
    max_candidates: Option<u64>,
    belief: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let p1 = resolve_belief(pomdp, belief)?;
    let budget = approx::Budget {
        max_memory,
        max_candidates,
    };
    let report =
        approx::anytime_approximate(&pomdp.inner, &p1, epsilon, &budget).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item(
        "lower_bound",
        if report.lower_bound.is_finite() {
            Some(report.lower_bound)
        } else {
            None
        },
    )?;
    out.set_item("upper_bound", report.upper_bound)?;
    out.set_item(
        "halt",
        match report.halt {
            approx::HaltReason::GapClosed => "gap_closed",
            approx::HaltReason::BudgetExhausted => "budget_exhausted",
        },
    )?;
    out.set_item("candidates_evaluated", report.candidates_evaluated)?;
    out.set_item("memory_sizes_exhausted", report.memory_sizes_exhausted)?;
    out.set_item(
        "witness",
        report.witness.map(|w| Strategy {
            inner: strategy::Strategy::FiniteMemory(w),
        }),
    )?;
    Ok(out)
}

/// Promise decision: "at_least_x_plus_eps", "at_most_x_minus_eps", or
/// "unknown", with the bounds that settled it.
#[pyfunction]
#[pyo3(signature = (pomdp, x, epsilon, max_memory=None, max_candidates=None, belief=None))]
fn decide<'py>(
    py: Python<'py>,
    pomdp: &Pomdp,
    x: f64,
    epsilon: f64,
    max_memory: Option<usize>,
    max_candidates: Option<u64>,
    belief: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let p1 = resolve_belief(pomdp, belief)?;
    let query = approx::PromiseQuery {
        x,
        epsilon,
        budget: approx::Budget {
            max_memory,
            max_candidates,
        },
    };
    let report = approx::decide_promise(&pomdp.inner, &p1, &query).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item(
        "verdict",
        match report.verdict {
            approx::Verdict::AtLeastXPlusEps => "at_least_x_plus_eps",
            approx::Verdict::AtMostXMinusEps => "at_most_x_minus_eps",
            approx::Verdict::Unknown => "unknown",
        },
    )?;
    out.set_item(
        "lower_bound",
        if report.lower_bound.is_finite() {
            Some(report.lower_bound)
        } else {
            None
        },
    )?;
    out.set_item("upper_bound", report.upper_bound)?;
    out.set_item("candidates_evaluated", report.candidates_evaluated)?;
    Ok(out)
}

#[pymodule]
fn pomdp_lra(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pomdp>()?;
    m.add_class::<Strategy>()?;
    m.add_function(wrap_pyfunction!(ex1, m)?)?;
    m.add_function(wrap_pyfunction!(ex2, m)?)?;
    m.add_function(wrap_pyfunction!(triv1, m)?)?;
    m.add_function(wrap_pyfunction!(ex1_alternating, m)?)?;
    m.add_function(wrap_pyfunction!(ex1_constant_a, m)?)?;
    m.add_function(wrap_pyfunction!(ex2_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(gain, m)?)?;
    m.add_function(wrap_pyfunction!(per_state_gains, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_update, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_average, m)?)?;
    m.add_function(wrap_pyfunction!(search_periodic, m)?)?;
    m.add_function(wrap_pyfunction!(approximate, m)?)?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    Ok(())
}
