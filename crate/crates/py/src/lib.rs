use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use offload_core::config::Config;
use offload_core::dataset::{label_instances, LabelSolver};
use offload_core::instance_gen::{generate_instance, generate_instances as gen_many};
use offload_core::mtl::{
    decode_model, encode_model, infer_solution, load_model, save_model, train, TrainConfig,
};
use offload_core::solvers::{self, BranchingRule, SbbConfig, SolveReport};
use offload_core::split::{self, eta_grid};
use offload_core::{Error, OffloadInstance, OffloadSolution};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn load_config(config: Option<PathBuf>) -> PyResult<Config> {
    match config {
        Some(p) => Config::load(&p).map(|(c, _)| c).map_err(to_py),
        None => Ok(Config::shipped()),
    }
}

/// One offloading problem: a fleet of vehicles sharing one edge server.
#[pyclass(name = "Instance", module = "edge_offload", from_py_object)]
#[derive(Clone)]
struct PyInstance {
    inner: OffloadInstance,
}

#[pymethods]
impl PyInstance {
    /// Random instance drawn from the config's parameter ranges.
    #[staticmethod]
    #[pyo3(signature = (n_vehicles, seed, config=None))]
    fn generate(n_vehicles: usize, seed: u64, config: Option<PathBuf>) -> PyResult<Self> {
        let cfg = load_config(config)?;
        if n_vehicles == 0 || n_vehicles > offload_core::system::MAX_VEHICLES {
            return Err(PyValueError::new_err("n_vehicles must lie in 1..=16"));
        }
        Ok(PyInstance {
            inner: generate_instance(n_vehicles, &cfg.ranges, seed),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: OffloadInstance =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(PyInstance { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn n_vehicles(&self) -> usize {
        self.inner.n_vehicles()
    }

    fn total_cost(&self, decisions: Vec<bool>, alloc: Vec<f64>) -> PyResult<f64> {
        offload_core::total_cost(&self.inner, &decisions, &alloc).map_err(to_py)
    }

    fn optimal_allocation(&self, decisions: Vec<bool>) -> PyResult<Vec<f64>> {
        if decisions.len() != self.inner.n_vehicles() {
            return Err(PyValueError::new_err(
                "decision vector has the wrong length",
            ));
        }
        Ok(solvers::optimal_allocation(&self.inner, &decisions))
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n_vehicles={}, seed={})",
            self.inner.n_vehicles(),
            self.inner.seed
        )
    }
}

#[pyclass(
    name = "Solution",
    module = "edge_offload",
    frozen,
    skip_from_py_object
)]
struct PySolution {
    #[pyo3(get)]
    decisions: Vec<bool>,
    #[pyo3(get)]
    alloc: Vec<f64>,
    #[pyo3(get)]
    cost: f64,
    #[pyo3(get)]
    nodes_explored: usize,
    #[pyo3(get)]
    proven_optimal: bool,
}

impl PySolution {
    fn from_solution(s: OffloadSolution, nodes_explored: usize, proven_optimal: bool) -> Self {
        PySolution {
            decisions: s.decisions,
            alloc: s.alloc,
            cost: s.cost,
            nodes_explored,
            proven_optimal,
        }
    }

    fn from_report(r: SolveReport) -> Self {
        Self::from_solution(r.solution, r.nodes_explored, r.proven_optimal)
    }
}

#[pymethods]
impl PySolution {
    #[getter]
    fn decision_index(&self) -> usize {
        offload_core::decision_index(&self.decisions)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(decisions={:?}, alloc={:?}, cost={})",
            self.decisions, self.alloc, self.cost
        )
    }
}

#[pyfunction]
#[pyo3(signature = (n_vehicles, count, seed, config=None))]
fn generate_instances(
    n_vehicles: usize,
    count: usize,
    seed: u64,
    config: Option<PathBuf>,
) -> PyResult<Vec<PyInstance>> {
    let cfg = load_config(config)?;
    Ok(gen_many(n_vehicles, count, &cfg.ranges, seed)
        .map_err(to_py)?
        .into_iter()
        .map(|inner| PyInstance { inner })
        .collect())
}

#[pyfunction]
fn solve_exhaustive(inst: &PyInstance) -> PyResult<PySolution> {
    solvers::solve_exhaustive(&inst.inner)
        .map(PySolution::from_report)
        .map_err(to_py)
}

#[pyfunction]
fn solve_grid(inst: &PyInstance, grid_step: f64) -> PyResult<PySolution> {
    solvers::solve_grid(&inst.inner, grid_step)
        .map(PySolution::from_report)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (inst, max_nodes=16, gap_tolerance=0.0, branching_rule="most-fractional-first"))]
fn solve_sbb(
    inst: &PyInstance,
    max_nodes: usize,
    gap_tolerance: f64,
    branching_rule: &str,
) -> PyResult<PySolution> {
    let branching_rule = match branching_rule {
        "most-fractional-first" => BranchingRule::MostFractionalFirst,
        "lowest-index" => BranchingRule::LowestIndex,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown branching rule `{other}`"
            )))
        }
    };
    let cfg = SbbConfig {
        max_nodes,
        gap_tolerance,
        branching_rule,
    };
    solvers::solve_sbb(&inst.inner, &cfg)
        .map(PySolution::from_report)
        .map_err(to_py)
}

/// Trained two-head network.
#[pyclass(name = "Model", module = "edge_offload", frozen, skip_from_py_object)]
struct PyModel {
    inner: offload_core::mtl::MtlModel,
}

#[pymethods]
impl PyModel {
    /// Labels the instances with the exhaustive solver and trains on them.
    #[staticmethod]
    #[pyo3(signature = (instances, epochs=200, seed=0, train_fraction=1.0))]
    fn train(
        py: Python<'_>,
        instances: Vec<PyInstance>,
        epochs: usize,
        seed: u64,
        train_fraction: f64,
    ) -> PyResult<Self> {
        let insts: Vec<OffloadInstance> = instances.into_iter().map(|i| i.inner).collect();
        let cfg = TrainConfig {
            epochs,
            seed,
            train_fraction,
            ..TrainConfig::default()
        };
        let model = py
            .detach(|| {
                let labels = label_instances(&insts, &LabelSolver::Exhaustive)?;
                train(&labels, &cfg)
            })
            .map_err(to_py)?
            .model;
        Ok(PyModel { inner: model })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_model(&path)
            .map(|inner| PyModel { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        decode_model(data)
            .map(|inner| PyModel { inner })
            .map_err(to_py)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &encode_model(&self.inner))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn n_vehicles(&self) -> usize {
        self.inner.n_vehicles
    }

    fn infer(&self, inst: &PyInstance) -> PyResult<PySolution> {
        infer_solution(&self.inner, &inst.inner)
            .map(|s| PySolution::from_solution(s, 1, false))
            .map_err(to_py)
    }
}

/// `(split_index, cost)` of the cheapest split for the configured scenario.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn best_split(config: Option<PathBuf>) -> PyResult<(usize, f64)> {
    let cfg = load_config(config)?;
    let sc = cfg.split.scenario(&cfg.ranges).map_err(to_py)?;
    split::best_split(&sc).map_err(to_py)
}

/// Rows of `(eta, cost_local, cost_edge, cost_joint)`.
#[pyfunction]
#[pyo3(signature = (step=None, config=None))]
fn eta_sweep(step: Option<f64>, config: Option<PathBuf>) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let cfg = load_config(config)?;
    let sc = cfg.split.scenario(&cfg.ranges).map_err(to_py)?;
    let grid = eta_grid(step.unwrap_or(cfg.split.eta_step)).map_err(to_py)?;
    Ok(split::eta_sweep(&sc, &grid)
        .map_err(to_py)?
        .into_iter()
        .map(|r| (r.eta, r.cost_local, r.cost_edge, r.cost_joint))
        .collect())
}

#[pymodule]
fn edge_offload(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_instances, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exhaustive, m)?)?;
    m.add_function(wrap_pyfunction!(solve_grid, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sbb, m)?)?;
    m.add_function(wrap_pyfunction!(best_split, m)?)?;
    m.add_function(wrap_pyfunction!(eta_sweep, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
