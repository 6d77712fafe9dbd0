use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use hetqp::dataset::{ClassData, Instance as CoreInstance};
use hetqp::graphs::{self, Graph as CoreGraph};
use hetqp::model::{self as core_model, Checkpoint, ModelConfig, ModelParams};
use hetqp::oracle::{self, MipStart, OracleCache, OracleResult};
use hetqp::problems::{BinaryAssignment, ProblemClass, QpInstance};
use hetqp::training::{self, TrainConfig};

fn err(e: hetqp::Error) -> PyErr {
    match e {
        hetqp::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn class(name: &str) -> PyResult<ProblemClass> {
    name.parse().map_err(err)
}

#[pyclass(name = "Graph", module = "hetqp_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: CoreGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self { inner: CoreGraph::new(num_nodes, edges).map_err(err)? })
    }

    #[staticmethod]
    fn erdos_renyi(n: usize, p: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: graphs::generate_er(n, p, seed).map_err(err)? })
    }

    #[staticmethod]
    fn barabasi_albert(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: graphs::generate_ba(n, m, seed).map_err(err)? })
    }

    #[staticmethod]
    fn parse_edge_list(text: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreGraph::parse_edge_list(text).map_err(err)? })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn complement(&self) -> Self {
        Self { inner: graphs::complement(&self.inner) }
    }

    /// Degree, betweenness, clustering and core index per node.
    fn features(&self) -> Vec<Vec<f64>> {
        graphs::structural_features(&self.inner).rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    fn __repr__(&self) -> String {
        format!("Graph(num_nodes={}, num_edges={})", self.inner.num_nodes(), self.inner.num_edges())
    }
}

#[pyclass(name = "OracleResult", module = "hetqp_py", frozen, get_all)]
struct PyOracleResult {
    selected: Vec<usize>,
    value_internal: f64,
    value_reported: f64,
    proven_optimal: bool,
    nodes_explored: u64,
    seconds: f64,
}

impl From<OracleResult> for PyOracleResult {
    fn from(r: OracleResult) -> Self {
        Self {
            selected: r.x_star.selected(),
            value_internal: r.value_internal,
            value_reported: r.value_reported,
            proven_optimal: r.proven_optimal,
            nodes_explored: r.nodes_explored,
            seconds: r.seconds,
        }
    }
}

/// A graph instance of one class: its QP and heterogeneous encoding.
#[pyclass(name = "Instance", module = "hetqp_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyInstance {
    inner: CoreInstance,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (graph, problem, name = "instance"))]
    fn new(graph: &PyGraph, problem: &str, name: &str) -> PyResult<Self> {
        Ok(Self { inner: CoreInstance::new(name, graph.inner.clone(), class(problem)?).map_err(err)? })
    }

    #[getter]
    fn problem(&self) -> String {
        self.inner.class.to_string()
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.inner.qp.num_vars()
    }

    #[getter]
    fn num_constraints(&self) -> usize {
        self.inner.qp.num_constraints()
    }

    /// The QP in the plain-text instance format.
    fn qp_text(&self) -> String {
        self.inner.qp.to_text()
    }

    #[pyo3(signature = (x, lambda_obj = 1.0, lambda_constr = 1.0))]
    fn relaxed_loss(&self, x: Vec<f64>, lambda_obj: f64, lambda_constr: f64) -> PyResult<f64> {
        let cfg = hetqp::loss::LossConfig { lambda_obj, lambda_constr };
        hetqp::loss::relaxed_loss(&self.inner.hetero, &x, &cfg).map_err(err)
    }

    fn penalty(&self, x: Vec<f64>) -> PyResult<f64> {
        hetqp::loss::penalty(&self.inner.hetero, &x).map_err(err)
    }

    /// `(feasible, reported objective)` of a selected node set.
    fn score(&self, selected: Vec<usize>) -> PyResult<(bool, f64)> {
        let x = BinaryAssignment::from_selected(self.inner.qp.num_vars(), &selected);
        let f = self.inner.qp.is_feasible(&x).map_err(err)?;
        Ok((f.feasible, self.inner.qp.discrete_objective(&x).map_err(err)?.reported))
    }

    /// Greedy node selection from relaxed values.
    fn decode(&self, x: Vec<f64>) -> PyResult<Vec<usize>> {
        Ok(hetqp::decoding::decode(self.inner.class, &self.inner.graph, &x).map_err(err)?.selected)
    }

    fn solve_exact(&self) -> PyResult<PyOracleResult> {
        Ok(oracle::solve_exact(&self.inner.qp).map_err(err)?.into())
    }

    #[pyo3(signature = (time_limit, warm_start = None))]
    fn branch_and_bound(&self, time_limit: f64, warm_start: Option<Vec<usize>>) -> PyResult<PyOracleResult> {
        let warm = warm_start.map(|s| BinaryAssignment::from_selected(self.inner.qp.num_vars(), &s));
        let cfg = oracle::BnbConfig::with_time_limit(time_limit);
        Ok(oracle::branch_and_bound_with(&self.inner.qp, &cfg, warm.as_ref()).map_err(err)?.into())
    }

    /// MIP start file contents for binary values or relaxed values.
    fn mip_start(&self, x: Vec<f64>, relaxed: bool) -> PyResult<String> {
        let names = self.inner.qp.var_names();
        if relaxed {
            oracle::format_mip_start(names, MipStart::Relaxed(&x)).map_err(err)
        } else {
            let a = BinaryAssignment::from_values(&x).map_err(err)?;
            oracle::format_mip_start(names, MipStart::Decoded(&a)).map_err(err)
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(problem={}, num_vars={}, num_constraints={})",
            self.inner.class,
            self.inner.qp.num_vars(),
            self.inner.qp.num_constraints()
        )
    }
}

#[pyclass(name = "Model", module = "hetqp_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (hidden_dim = 64, layers_prob = 6, layers_obj = 1, layers_constr = 6, seed = 0))]
    fn new(hidden_dim: usize, layers_prob: usize, layers_obj: usize, layers_constr: usize, seed: u64) -> PyResult<Self> {
        let cfg = ModelConfig { hidden_dim, layers_prob, layers_obj, layers_constr, seed, ..ModelConfig::default() };
        Ok(Self { inner: core_model::init_model(&cfg).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let ckpt = core_model::load_checkpoint(path).map_err(err)?;
        Ok(Self { inner: ckpt.model().map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        core_model::save_checkpoint(&Checkpoint::new(&self.inner, None), path).map_err(err)
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.len()
    }

    /// Relaxed selection probabilities, one per variable.
    fn forward(&self, instance: &PyInstance) -> PyResult<Vec<f64>> {
        Ok(core_model::forward(&self.inner, &instance.inner.hetero).map_err(err)?.0)
    }

    /// Mean approximation ratio of decoded outputs against exact optima.
    fn evaluate(&self, instances: Vec<PyInstance>) -> PyResult<f64> {
        let mut cache = OracleCache::in_memory();
        let mut insts: Vec<CoreInstance> = instances.into_iter().map(|i| i.inner).collect();
        for i in &mut insts {
            i.solve_optimum(&mut cache).map_err(err)?;
        }
        let r = hetqp::metrics::evaluate(&self.inner, &insts).map_err(err)?;
        Ok(r.instances.iter().map(|m| m.ar).sum::<f64>() / r.instances.len() as f64)
    }

    /// Single-problem training; returns the best model and its validation gap.
    #[pyo3(signature = (problem, train, val, epochs = 50, batch_size = 64, seed = 0))]
    fn train(
        &self,
        py: Python<'_>,
        problem: &str,
        train: Vec<PyGraph>,
        val: Vec<PyGraph>,
        epochs: usize,
        batch_size: usize,
        seed: u64,
    ) -> PyResult<(PyModel, Option<f64>)> {
        let cls = class(problem)?;
        let named = |gs: Vec<PyGraph>| gs.into_iter().enumerate().map(|(i, g)| (format!("g{i}"), g.inner)).collect();
        let (tr, va): (Vec<_>, Vec<_>) = (named(train), named(val));
        let params = self.inner.clone();
        py.detach(move || {
            let mut data = ClassData::from_graphs(cls, &tr, &va, &[])?;
            data.solve_optima(&mut OracleCache::in_memory())?;
            let cfg = TrainConfig { epochs, batch_size, seed, ..TrainConfig::single() };
            training::train_single(params, &data, &cfg)
        })
        .map(|(p, h)| (PyModel { inner: p }, h.best_ag))
        .map_err(err)
    }
}

#[pyfunction]
fn dynamic_weights(grad_norms: Vec<f64>, eps: f64) -> Vec<f64> {
    training::dynamic_weights(&grad_norms, eps)
}

#[pyfunction]
fn approx_ratio(value: f64, optimum: f64) -> PyResult<f64> {
    oracle::approx_ratio(value, optimum).map_err(err)
}

#[pyfunction]
fn format_g17(v: f64) -> PyResult<String> {
    oracle::format_g17(v).map_err(err)
}

#[pyfunction]
fn parse_qp(text: &str) -> PyResult<(usize, usize)> {
    let qp = QpInstance::parse_text(text).map_err(err)?;
    Ok((qp.num_vars(), qp.num_constraints()))
}

#[pymodule]
pub fn hetqp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyOracleResult>()?;
    m.add_function(wrap_pyfunction!(dynamic_weights, m)?)?;
    m.add_function(wrap_pyfunction!(approx_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(format_g17, m)?)?;
    m.add_function(wrap_pyfunction!(parse_qp, m)?)?;
    m.add("PROBLEMS", ProblemClass::ALL.iter().map(|c| c.to_string()).collect::<Vec<_>>())?;
    Ok(())
}
