//! Python bindings: run configuration, the flock and tag environments, the
//! opinion model and the train / benchmark / validate commands.

use std::path::PathBuf;

use flockrl_core::engine::EdgeList;
use flockrl_core::env::{self, EnvError, MultiAgentEnv};
use flockrl_core::harness::{self, HarnessError, RunConfig};
use flockrl_core::ppo::{self, PpoError};
use flockrl_core::WorldSpec;
use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Invalid { .. } => PyValueError::new_err(e.to_string()),
        HarnessError::Io { .. } => PyOSError::new_err(e.to_string()),
        HarnessError::Runtime(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn env_err(e: EnvError) -> PyErr {
    match e {
        EnvError::Config { .. }
        | EnvError::ActionShape { .. }
        | EnvError::NonFiniteAction { .. }
        | EnvError::RewardDomain { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn ppo_err(e: PpoError) -> PyErr {
    match e {
        PpoError::Config { .. } | PpoError::Shape(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Run configuration. Keyword arguments override fields of the JSON text.
#[pyclass(name = "Config", module = "flockrl", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (json = "", **overrides))]
    fn new(py: Python<'_>, json: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut pairs = Vec::new();
        if let Some(kw) = overrides {
            let dumps = py.import("json")?.getattr("dumps")?;
            for (k, v) in kw.iter() {
                let text: String = dumps.call1((v,))?.extract()?;
                pairs.push(format!("{}={}", k.extract::<String>()?, text));
            }
        }
        RunConfig::from_json(json, &pairs)
            .map(|inner| Self { inner })
            .map_err(harness_err)
    }

    /// Loads a JSON file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        RunConfig::load(Some(&path), &[])
            .map(|inner| Self { inner })
            .map_err(harness_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Derived quantities as `key=value` lines.
    fn validate(&self) -> PyResult<String> {
        self.inner.validate().map(|d| d.to_string()).map_err(harness_err)
    }

    #[getter]
    fn environment(&self) -> &'static str {
        self.inner.environment.name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(environment={:?}, seed={})",
            self.inner.environment.name(),
            self.inner.seed
        )
    }
}

fn config_or_default(config: Option<PyConfig>) -> RunConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

fn agent_columns<E: MultiAgentEnv>(env: &E) -> (Vec<(f32, f32)>, Vec<f32>, Vec<f32>) {
    let state = env.state();
    (
        state.positions.iter().map(|p| (p[0], p[1])).collect(),
        state.headings,
        state.speeds,
    )
}

type StepResult = (Vec<f32>, Vec<f32>);

/// Flock environment. `step` takes a flat `n * 2` list of
/// (turn, acceleration) actions and returns flat observations and rewards.
#[pyclass(name = "FlockEnv", module = "flockrl")]
struct PyFlockEnv {
    inner: env::FlockEnv,
}

#[pymethods]
impl PyFlockEnv {
    #[new]
    #[pyo3(signature = (config = None, seed = None))]
    fn new(config: Option<PyConfig>, seed: Option<u64>) -> PyResult<Self> {
        let cfg = config_or_default(config);
        let inner = env::FlockEnv::reset(cfg.flock_params(), seed.unwrap_or(cfg.seed)).map_err(env_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn num_agents(&self) -> usize {
        self.inner.num_agents()
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn step(&mut self, actions: Vec<f32>) -> PyResult<StepResult> {
        let out = self.inner.step(&actions).map_err(env_err)?;
        Ok((out.observations.clone(), out.rewards.clone()))
    }

    fn observations(&self) -> Vec<f32> {
        self.inner.output().observations.clone()
    }

    fn rewards(&self) -> Vec<f32> {
        self.inner.output().rewards.clone()
    }

    /// `(positions, headings, speeds)` of every agent.
    fn state(&self) -> (Vec<(f32, f32)>, Vec<f32>, Vec<f32>) {
        agent_columns(&self.inner)
    }

    fn mean_nearest_neighbor_distance(&self) -> f64 {
        let store = self.inner.store();
        env::mean_nearest_neighbor_distance(store.positions(), store.world())
    }
}

/// Runners-and-chasers tag environment; actions are laid out like
/// [`FlockEnv`] over all agents.
#[pyclass(name = "TagEnv", module = "flockrl")]
struct PyTagEnv {
    inner: env::TagEnv,
}

#[pymethods]
impl PyTagEnv {
    #[new]
    #[pyo3(signature = (config = None, seed = None))]
    fn new(config: Option<PyConfig>, seed: Option<u64>) -> PyResult<Self> {
        let cfg = config_or_default(config);
        let inner = env::TagEnv::reset(cfg.tag_params(), seed.unwrap_or(cfg.seed)).map_err(env_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn num_agents(&self) -> usize {
        self.inner.num_agents()
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    /// Runner/chaser contacts in the last step.
    #[getter]
    fn touches(&self) -> u64 {
        self.inner.touches()
    }

    /// `"runner"` or `"chaser"` per agent.
    fn roles(&self) -> Vec<&'static str> {
        self.inner
            .store()
            .tags()
            .iter()
            .map(|&t| if t == env::CHASER { "chaser" } else { "runner" })
            .collect()
    }

    /// Per-agent `(low, high)` bounds of both action dimensions.
    fn action_bounds(&self) -> Vec<[(f32, f32); 2]> {
        let params = self.inner.params();
        self.inner
            .store()
            .tags()
            .iter()
            .map(|&t| params.bounds(t).map(|b| (b.lo, b.hi)))
            .collect()
    }

    fn step(&mut self, actions: Vec<f32>) -> PyResult<StepResult> {
        let out = self.inner.step(&actions).map_err(env_err)?;
        Ok((out.observations.clone(), out.rewards.clone()))
    }

    fn observations(&self) -> Vec<f32> {
        self.inner.output().observations.clone()
    }

    fn rewards(&self) -> Vec<f32> {
        self.inner.output().rewards.clone()
    }

    fn state(&self) -> (Vec<(f32, f32)>, Vec<f32>, Vec<f32>) {
        agent_columns(&self.inner)
    }
}

/// Bounded-confidence opinion dynamics. Without `edges` the graph is
/// complete with unit weights.
#[pyclass(name = "OpinionModel", module = "flockrl")]
struct PyOpinionModel {
    inner: env::OpinionModel,
}

#[pymethods]
impl PyOpinionModel {
    #[new]
    #[pyo3(signature = (opinions, threshold, strength, edges = None))]
    fn new(
        opinions: Vec<f64>,
        threshold: f64,
        strength: f64,
        edges: Option<Vec<(usize, usize, f64)>>,
    ) -> PyResult<Self> {
        let n = opinions.len();
        let edges = match edges {
            Some(e) => EdgeList::new(n, e),
            None => EdgeList::complete(n, 1.0),
        }
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let inner = env::OpinionModel::new(opinions, edges, threshold, strength).map_err(env_err)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (steps = 1))]
    fn step(&mut self, steps: usize) -> PyResult<()> {
        for _ in 0..steps {
            self.inner.step().map_err(env_err)?;
        }
        Ok(())
    }

    fn opinions(&self) -> Vec<f64> {
        self.inner.opinions()
    }

    fn spread(&self) -> f64 {
        self.inner.spread()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Trains with `config` and writes all run files into `output_dir`.
/// Returns the metric rows as dicts.
#[pyfunction]
fn train<'py>(py: Python<'py>, config: PyConfig, output_dir: PathBuf) -> PyResult<Bound<'py, PyList>> {
    let cfg = config.inner;
    let summary = py
        .detach(|| harness::with_workers(cfg.workers, || harness::run_train(&cfg, &output_dir)))
        .map_err(harness_err)?;
    let rows = PyList::empty(py);
    for m in &summary.metrics {
        let d = PyDict::new(py);
        d.set_item("training_step", m.training_step)?;
        d.set_item("policy", &m.policy)?;
        d.set_item("mean_reward", m.mean_reward)?;
        d.set_item("policy_loss", m.policy_loss)?;
        d.set_item("value_loss", m.value_loss)?;
        d.set_item("entropy", m.entropy)?;
        d.set_item("clip_fraction", m.clip_fraction)?;
        rows.append(d)?;
    }
    for o in &summary.opinion {
        let d = PyDict::new(py);
        d.set_item("step", o.step)?;
        d.set_item("spread", o.spread)?;
        d.set_item("mean_opinion", o.mean_opinion)?;
        rows.append(d)?;
    }
    Ok(rows)
}

/// Environment throughput for each agent count in `config.bench_counts`.
#[pyfunction]
#[pyo3(signature = (config, output_dir = None))]
fn benchmark<'py>(py: Python<'py>, config: PyConfig, output_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyList>> {
    let cfg = config.inner;
    let rows = py
        .detach(|| harness::with_workers(cfg.workers, || harness::run_benchmark(&cfg, output_dir.as_deref())))
        .map_err(harness_err)?;
    let out = PyList::empty(py);
    for r in rows {
        let d = PyDict::new(py);
        d.set_item("env", r.env)?;
        d.set_item("n", r.n)?;
        d.set_item("steps", r.steps)?;
        d.set_item("env_steps_per_sec", r.env_steps_per_sec)?;
        d.set_item("train_step_ms", r.train_step_ms)?;
        d.set_item("density_mode", r.density_mode)?;
        out.append(d)?;
    }
    Ok(out)
}

#[pyfunction]
fn validate(config: PyConfig) -> PyResult<String> {
    config.validate()
}

/// Per-pair flock reward at distance `d`.
#[pyfunction]
fn flock_reward(d: f32, c_collide: f32, c_near: f32, body_radius: f32, view_range: f32) -> PyResult<f32> {
    let shape = env::RewardShape::new(c_collide, c_near, body_radius);
    env::flock_reward_f(d, &shape, view_range).map_err(env_err)
}

/// Advantages and returns of one trajectory; `values` has one more entry
/// than `rewards` (the bootstrap value).
#[pyfunction]
fn gae(rewards: Vec<f64>, values: Vec<f64>, gamma: f64, lam: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let t = rewards.len();
    let r = Array2::from_shape_vec((1, t), rewards).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let v = Array2::from_shape_vec((1, values.len()), values).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (adv, ret) = ppo::gae(r.view(), v.view(), gamma, lam).map_err(ppo_err)?;
    Ok((adv.into_raw_vec_and_offset().0, ret.into_raw_vec_and_offset().0))
}

#[pyfunction]
fn mean_nearest_neighbor_distance(positions: Vec<(f32, f32)>, width: f32, height: f32) -> PyResult<f64> {
    let world = WorldSpec::new(width, height);
    if !world.is_valid() {
        return Err(PyValueError::new_err("world extents must be positive and finite"));
    }
    let pts: Vec<_> = positions
        .into_iter()
        .map(|(x, y)| flockrl_core::Vec2::new(x, y))
        .collect();
    if pts.iter().any(|&p| !world.contains(p)) {
        return Err(PyValueError::new_err("positions must lie inside the world"));
    }
    Ok(env::mean_nearest_neighbor_distance(&pts, &world))
}

#[pymodule]
fn flockrl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyFlockEnv>()?;
    m.add_class::<PyTagEnv>()?;
    m.add_class::<PyOpinionModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(flock_reward, m)?)?;
    m.add_function(wrap_pyfunction!(gae, m)?)?;
    m.add_function(wrap_pyfunction!(mean_nearest_neighbor_distance, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
