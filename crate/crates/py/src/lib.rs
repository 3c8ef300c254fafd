//! Python bindings: group and commitment arithmetic, EDR digests, scenario
//! runs, sweeps, the advantage estimator and the trace checker.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use perimeter::commitments as cm;
use perimeter::config;
use perimeter::edr::{EventKind, EventRecord, MobilityPattern};
use perimeter::group::{GroupError, GroupParams};
use perimeter::properties::{self, PropertyVerdict};
use perimeter::report::{prover_label, RunReport};
use perimeter::sim::montecarlo;
use perimeter::sim::{run_scenario, RunResult, Scenario, Trace};
use perimeter::sweep;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Group", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGroup {
    inner: GroupParams,
}

#[pymethods]
impl PyGroup {
    #[new]
    #[pyo3(signature = (p, q, g, h=None))]
    fn new(p: BigUint, q: BigUint, g: BigUint, h: Option<BigUint>) -> PyResult<Self> {
        GroupParams::new(p, q, g, h).map(|inner| PyGroup { inner }).map_err(value_err)
    }

    /// p=23, q=11, g=2, h=3
    #[staticmethod]
    fn desk() -> Self {
        PyGroup { inner: GroupParams::desk() }
    }

    #[staticmethod]
    fn demo() -> Self {
        PyGroup { inner: GroupParams::demo() }
    }

    #[getter]
    fn p(&self) -> BigUint {
        self.inner.p().clone()
    }

    #[getter]
    fn q(&self) -> BigUint {
        self.inner.q().clone()
    }

    #[getter]
    fn g(&self) -> BigUint {
        self.inner.g().value().clone()
    }

    #[getter]
    fn h(&self) -> Option<BigUint> {
        self.inner.h().ok().map(|h| h.value().clone())
    }

    fn __repr__(&self) -> String {
        format!("Group(p={}, q={}, g={})", self.inner.p(), self.inner.q(), self.inner.g())
    }
}

impl PyGroup {
    fn element(&self, v: BigUint) -> PyResult<perimeter::group::GroupElement> {
        self.inner.element(v).map_err(|e: GroupError| value_err(e))
    }
}

/// Public key `g^a`.
#[pyfunction]
fn schnorr_public(group: &PyGroup, secret: BigUint) -> BigUint {
    let g = &group.inner;
    cm::SchnorrKeypair::from_secret(g, g.scalar(secret)).public.value().clone()
}

/// `rho = x + a*k mod q`
#[pyfunction]
fn schnorr_respond(group: &PyGroup, secret: BigUint, nonce: BigUint, challenge: BigUint) -> BigUint {
    let g = &group.inner;
    let kp = cm::SchnorrKeypair::from_secret(g, g.scalar(secret));
    let com = cm::schnorr_commit_with(g, g.scalar(nonce));
    cm::schnorr_respond(g, &kp, &com, &g.scalar(challenge)).value().clone()
}

#[pyfunction]
fn schnorr_verify(
    group: &PyGroup,
    public: BigUint,
    commitment: BigUint,
    challenge: BigUint,
    response: BigUint,
) -> PyResult<bool> {
    let g = &group.inner;
    if &challenge >= g.q() || &response >= g.q() {
        return Ok(false);
    }
    Ok(cm::schnorr_verify(
        g,
        &group.element(public)?,
        &group.element(commitment)?,
        &g.scalar(challenge),
        &g.scalar(response),
    ))
}

/// Secret from two accepting transcripts sharing a commitment.
#[pyfunction]
fn schnorr_extract(group: &PyGroup, k1: BigUint, rho1: BigUint, k2: BigUint, rho2: BigUint) -> Option<BigUint> {
    let g = &group.inner;
    cm::schnorr_extract(g, (&g.scalar(k1), &g.scalar(rho1)), (&g.scalar(k2), &g.scalar(rho2)))
        .map(|a| a.value().clone())
}

#[pyfunction]
fn pedersen_verify(
    group: &PyGroup,
    public: BigUint,
    commitment: BigUint,
    challenge: BigUint,
    rho1: BigUint,
    rho2: BigUint,
) -> PyResult<bool> {
    let g = &group.inner;
    cm::pedersen_verify(
        g,
        &group.element(public)?,
        &group.element(commitment)?,
        &g.scalar(challenge),
        &g.scalar(rho1),
        &g.scalar(rho2),
    )
    .map_err(value_err)
}

/// Hex digest of an EDR history given as `(t_us, kind, value)` triples.
#[pyfunction]
#[pyo3(signature = (events, window_us=None, capacity=None))]
fn edr_digest(events: Vec<(i64, String, f64)>, window_us: Option<i64>, capacity: Option<usize>) -> PyResult<String> {
    let mut p = MobilityPattern::new(
        window_us.unwrap_or(perimeter::edr::DEFAULT_WINDOW_US),
        capacity.unwrap_or(perimeter::edr::DEFAULT_CAPACITY),
    );
    for (t, kind, value) in events {
        let kind: EventKind = kind.parse().map_err(value_err)?;
        p.record_event(EventRecord::new(t, kind, value)).map_err(value_err)?;
    }
    Ok(p.digest().to_string())
}

#[pyclass(name = "RunResult", frozen)]
struct PyRunResult {
    #[pyo3(get)]
    verdict: String,
    #[pyo3(get)]
    accepted: bool,
    #[pyo3(get)]
    reinits: u32,
    #[pyo3(get)]
    seed: u64,
    #[pyo3(get)]
    trace: String,
    #[pyo3(get)]
    report: String,
    /// `(vel_kf, vel_v)` of the last session's first gait check.
    #[pyo3(get)]
    gait: Option<(f64, f64)>,
    /// Party label to `(exponentiations, digests)`.
    #[pyo3(get)]
    ops: BTreeMap<String, (u64, u64)>,
    /// Added delay per hop of the last session, microseconds.
    #[pyo3(get)]
    added_delays_us: Vec<i64>,
    #[pyo3(get)]
    expectation_met: Option<bool>,
}

impl PyRunResult {
    fn new(sc: &Scenario, run: &RunResult) -> Self {
        PyRunResult {
            verdict: run.outcome.to_string(),
            accepted: run.outcome.verdict.is_accept(),
            reinits: run.outcome.reinits,
            seed: run.seed,
            trace: run.trace.render(),
            report: RunReport::new(sc, run).render(),
            gait: run.gait().map(|g| (g.vel_kf, g.vel_v)),
            ops: run.ops.iter().map(|(k, o)| (k.clone(), (o.exponentiations, o.digests))).collect(),
            added_delays_us: run.added_delays_us(run.last_session().index),
            expectation_met: sc.expect.map(|e| e.matches(&run.outcome)),
        }
    }
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!("RunResult(verdict={:?}, seed={})", self.verdict, self.seed)
    }
}

#[pyclass(name = "Scenario")]
struct PyScenario {
    table: config::Table,
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    /// Parse scenario TOML text.
    #[new]
    #[pyo3(signature = (text=""))]
    fn new(text: &str) -> PyResult<Self> {
        let table = config::parse_table(text).map_err(value_err)?;
        let inner = config::scenario_from_table(&table, "scenario").map_err(value_err)?;
        Ok(PyScenario { table, inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let p = std::path::Path::new(path);
        let table = config::load_table(p).map_err(value_err)?;
        let inner = config::load(p).map_err(value_err)?;
        Ok(PyScenario { table, inner })
    }

    /// Override a dotted key, e.g. `set("adversary.t_relay", "0.002")`.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        let mut t = self.table.clone();
        config::set_key(&mut t, key, config::parse_value(value)).map_err(value_err)?;
        self.inner = config::scenario_from_table(&t, &self.inner.id).map_err(value_err)?;
        self.table = t;
        Ok(())
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn expect(&self) -> Option<String> {
        self.inner.expect.map(|e| e.to_string())
    }

    #[pyo3(signature = (seed=None))]
    fn run(&self, py: Python<'_>, seed: Option<u64>) -> PyResult<PyRunResult> {
        let mut sc = self.inner.clone();
        if let Some(s) = seed {
            sc.seed = s;
        }
        let run = py.detach(|| run_scenario(&sc)).map_err(value_err)?;
        Ok(PyRunResult::new(&sc, &run))
    }

    /// Tab-separated sweep table over `KEY=v1,v2,...` axes.
    #[pyo3(signature = (grid, aligned=false))]
    fn sweep(&self, py: Python<'_>, grid: Vec<String>, aligned: bool) -> PyResult<String> {
        let axes = grid.iter().map(|g| sweep::parse_axis(g)).collect::<Result<Vec<_>, _>>().map_err(value_err)?;
        let rows = py.detach(|| sweep::sweep(&self.table, &self.inner.id, &axes)).map_err(value_err)?;
        Ok(if aligned { sweep::render_aligned(&axes, &rows) } else { sweep::render_tsv(&axes, &rows) })
    }

    fn prover(&self) -> &'static str {
        prover_label(&self.inner)
    }
}

/// `{property: (holds, witness_lines)}` for a trace file's text.
#[pyfunction]
fn check_trace(text: &str, verifier: &str, prover: &str) -> PyResult<BTreeMap<String, (bool, Vec<usize>)>> {
    let trace = Trace::parse(text).map_err(value_err)?;
    let report = properties::check_all(&trace, verifier, prover).map_err(value_err)?;
    Ok(report
        .results
        .into_iter()
        .map(|(p, v)| {
            let cell = match v {
                PropertyVerdict::Holds => (true, Vec::new()),
                PropertyVerdict::Violated { witness } => (false, witness),
            };
            (p.as_str().to_string(), cell)
        })
        .collect())
}

/// `(rate, analytic, z)` of the n-round response-guessing game.
#[pyfunction]
#[pyo3(signature = (rounds, trials, response_bits=1, seed=1))]
fn estimate_advantage(py: Python<'_>, rounds: u32, trials: u64, response_bits: u32, seed: u64) -> PyResult<(f64, f64, f64)> {
    if !(1..=256).contains(&response_bits) {
        return Err(PyValueError::new_err("response_bits must be within 1..=256"));
    }
    let e = py.detach(|| montecarlo::estimate_advantage(rounds, response_bits, trials, seed));
    Ok((e.rate(), e.expected, e.z()))
}

#[pymodule(name = "perimeter")]
fn perimeter_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", perimeter::VERSION)?;
    m.add("HASH_NAME", perimeter::hash::HASH_NAME)?;
    m.add_class::<PyGroup>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(schnorr_public, m)?)?;
    m.add_function(wrap_pyfunction!(schnorr_respond, m)?)?;
    m.add_function(wrap_pyfunction!(schnorr_verify, m)?)?;
    m.add_function(wrap_pyfunction!(schnorr_extract, m)?)?;
    m.add_function(wrap_pyfunction!(pedersen_verify, m)?)?;
    m.add_function(wrap_pyfunction!(edr_digest, m)?)?;
    m.add_function(wrap_pyfunction!(check_trace, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_advantage, m)?)?;
    Ok(())
}
