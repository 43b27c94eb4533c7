//! Python bindings: the graph, the trained classifier, the attack loop,
//! and the evaluation/detection entry points, driven in-process.
//!
//! Build with `cargo build -p mga-python --release`, then import the
//! produced cdylib as `mga_py` (see python/smoke_test.py).

use std::collections::BTreeMap;

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mga_core::attack::{run_attack, AttackConfig, AttackMethod, AttackMode, Perturbation};
use mga_core::community::label_propagation;
use mga_core::evaluation::{
    evaluate, limited_knowledge_graph, select_targets, MissingMode, TargetStrategy,
};
use mga_core::gcn::{
    accuracy, forward, normalized_adjacency, train, GcnModel, TrainConfig,
};
use mga_core::graph::{
    bfs_distances, edge_betweenness, generate_planted_partition, load_edge_list, load_labels,
    node_betweenness, FeatureMatrix, Graph as CoreGraph, LabelAssignment,
};

fn pyerr(e: mga_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn labels_from_dict(labels: BTreeMap<usize, usize>) -> PyResult<LabelAssignment> {
    LabelAssignment::from_pairs(labels).map_err(pyerr)
}

fn features_or_identity(n: usize, features: Option<Vec<Vec<f64>>>) -> PyResult<FeatureMatrix> {
    match features {
        None => Ok(FeatureMatrix::identity(n)),
        Some(rows) => {
            if rows.len() != n {
                return Err(PyValueError::new_err(format!(
                    "expected {n} feature rows, got {}",
                    rows.len()
                )));
            }
            let d = rows.first().map_or(0, Vec::len);
            let mut x = Array2::zeros((n, d));
            for (i, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(PyValueError::new_err("ragged feature rows"));
                }
                for (j, &v) in row.iter().enumerate() {
                    x[[i, j]] = v;
                }
            }
            Ok(FeatureMatrix::new(x))
        }
    }
}

/// Undirected simple graph over nodes `0..node_count`.
#[pyclass(name = "Graph", from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: CoreGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyGraph {
            inner: CoreGraph::from_edges(n, edges).map_err(pyerr)?,
        })
    }

    /// Load a whitespace-separated edge list (`#` comments allowed).
    #[staticmethod]
    #[pyo3(signature = (path, nodes=None))]
    fn load_edge_list(path: &str, nodes: Option<usize>) -> PyResult<Self> {
        Ok(PyGraph {
            inner: load_edge_list(path, nodes).map_err(pyerr)?,
        })
    }

    /// Seeded planted-partition graph; returns `(graph, labels)` with the
    /// block index of each node as its label.
    #[staticmethod]
    fn planted_partition(
        n: usize,
        k: usize,
        p_in: f64,
        p_out: f64,
        seed: u64,
    ) -> PyResult<(Self, BTreeMap<usize, usize>)> {
        let (g, labels) = generate_planted_partition(n, k, p_in, p_out, seed).map_err(pyerr)?;
        Ok((PyGraph { inner: g }, labels.labeled().collect()))
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.inner.has_edge(u, v)
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees()
    }

    fn neighbors(&self, u: usize) -> Vec<usize> {
        self.inner.neighbors(u)
    }

    /// Hop distances from `source`; unreachable nodes map to None.
    fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        bfs_distances(&self.inner, source)
    }

    fn edge_betweenness(&self) -> BTreeMap<(usize, usize), f64> {
        edge_betweenness(&self.inner)
    }

    fn node_betweenness(&self) -> Vec<f64> {
        node_betweenness(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, edges={})",
            self.inner.node_count(),
            self.inner.edge_count()
        )
    }
}

/// Load a `node<TAB>class` label file into a dict.
#[pyfunction]
fn load_label_file(path: &str) -> PyResult<BTreeMap<usize, usize>> {
    Ok(load_labels(path).map_err(pyerr)?.labeled().collect())
}

/// Trained two-layer GCN.
#[pyclass(name = "Model")]
struct PyModel {
    inner: GcnModel,
}

#[pymethods]
impl PyModel {
    /// Full-batch training with a seeded train/val/test split.
    /// Returns `(model, loss_history)`.
    #[staticmethod]
    #[pyo3(signature = (
        graph, labels, features=None, learning_rate=0.5, epochs=200, hidden=16,
        seed=0, train_fraction=0.1, val_fraction=0.1, weight_decay=5e-4
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        graph: &PyGraph,
        labels: BTreeMap<usize, usize>,
        features: Option<Vec<Vec<f64>>>,
        learning_rate: f64,
        epochs: usize,
        hidden: usize,
        seed: u64,
        train_fraction: f64,
        val_fraction: f64,
        weight_decay: f64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let labels = labels_from_dict(labels)?;
        let x = features_or_identity(graph.inner.node_count(), features)?;
        let cfg = TrainConfig {
            learning_rate,
            epochs,
            hidden,
            seed,
            train_fraction,
            val_fraction,
            weight_decay,
        };
        let (model, history) = train(&graph.inner, &x, &labels, &cfg).map_err(pyerr)?;
        Ok((PyModel { inner: model }, history))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: GcnModel::load(path).map_err(pyerr)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(pyerr)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn hidden_dim(&self) -> usize {
        self.inner.hidden_dim()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    /// Predicted class for every node.
    #[pyo3(signature = (graph, features=None))]
    fn predict(&self, graph: &PyGraph, features: Option<Vec<Vec<f64>>>) -> PyResult<Vec<usize>> {
        let x = features_or_identity(graph.inner.node_count(), features)?;
        let probs = forward(&self.inner, &normalized_adjacency(&graph.inner), &x).map_err(pyerr)?;
        Ok((0..graph.inner.node_count())
            .map(|v| probs.predicted_label(v))
            .collect())
    }

    /// Accuracy over the labeled nodes.
    #[pyo3(signature = (graph, labels, features=None))]
    fn accuracy(
        &self,
        graph: &PyGraph,
        labels: BTreeMap<usize, usize>,
        features: Option<Vec<Vec<f64>>>,
    ) -> PyResult<f64> {
        let labels = labels_from_dict(labels)?;
        let x = features_or_identity(graph.inner.node_count(), features)?;
        let probs = forward(&self.inner, &normalized_adjacency(&graph.inner), &x).map_err(pyerr)?;
        let nodes: Vec<usize> = labels.labeled().map(|(n, _)| n).collect();
        Ok(accuracy(&probs, &labels, &nodes))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(input={}, hidden={}, classes={})",
            self.inner.input_dim(),
            self.inner.hidden_dim(),
            self.inner.num_classes()
        )
    }
}

/// Replayable rewiring sequence produced by one attack.
#[pyclass(name = "Perturbation", from_py_object)]
#[derive(Clone)]
struct PyPerturbation {
    inner: Perturbation,
}

#[pymethods]
impl PyPerturbation {
    #[getter]
    fn target(&self) -> usize {
        self.inner.target
    }

    /// Steps as `(i, j, action)` with action "add" or "delete".
    #[getter]
    fn steps(&self) -> Vec<(usize, usize, String)> {
        self.inner
            .steps
            .iter()
            .map(|s| (s.i, s.j, s.action.to_string()))
            .collect()
    }

    /// Target loss after each step.
    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.inner.steps.iter().map(|s| s.loss).collect()
    }

    /// Predicted label of the target after each step.
    #[getter]
    fn predicted(&self) -> Vec<usize> {
        self.inner.steps.iter().map(|s| s.predicted).collect()
    }

    #[getter]
    fn success_step(&self) -> Option<usize> {
        self.inner.success_step
    }

    /// Tab-separated trace, one step per line.
    fn to_tsv(&self) -> String {
        mga_core::attack::perturbation_to_tsv(&self.inner)
    }

    /// Parse a trace produced by `to_tsv` (or the CLI's perturbation
    /// files); the success step is rebuilt against `true_class`.
    #[staticmethod]
    fn from_tsv(text: &str, target: usize, true_class: usize) -> PyResult<Self> {
        Ok(PyPerturbation {
            inner: mga_core::attack::perturbation_from_tsv(text, target, true_class)
                .map_err(pyerr)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Perturbation(target={}, steps={}, success_step={:?})",
            self.inner.target,
            self.inner.steps.len(),
            self.inner.success_step
        )
    }
}

/// Attack one target with the momentum method ("mga") or the plain
/// gradient baseline ("fga").
#[pyfunction]
#[pyo3(signature = (
    model, graph, labels, target, features=None, budget=20, mu=0.5,
    mode="unlimited", method="mga", early_exit=false
))]
#[allow(clippy::too_many_arguments)]
fn attack(
    model: &PyModel,
    graph: &PyGraph,
    labels: BTreeMap<usize, usize>,
    target: usize,
    features: Option<Vec<Vec<f64>>>,
    budget: usize,
    mu: f64,
    mode: &str,
    method: &str,
    early_exit: bool,
) -> PyResult<PyPerturbation> {
    let labels = labels_from_dict(labels)?;
    let x = features_or_identity(graph.inner.node_count(), features)?;
    let cfg = AttackConfig {
        budget,
        mu,
        mode: AttackMode::parse(mode).map_err(pyerr)?,
        method: AttackMethod::parse(method).map_err(pyerr)?,
        seed: 0,
        early_exit,
        forbid_target_isolation: true,
    };
    let p = run_attack(&model.inner, &graph.inner, &x, &labels, target, &cfg).map_err(pyerr)?;
    Ok(PyPerturbation { inner: p })
}

/// Pick attack targets among correctly classified nodes.
/// `strategy` is "uniform" (count per class), "hub", or "bridge".
#[pyfunction]
#[pyo3(signature = (model, graph, labels, strategy="uniform", count=10, seed=0, features=None))]
fn pick_targets(
    model: &PyModel,
    graph: &PyGraph,
    labels: BTreeMap<usize, usize>,
    strategy: &str,
    count: usize,
    seed: u64,
    features: Option<Vec<Vec<f64>>>,
) -> PyResult<Vec<usize>> {
    let labels = labels_from_dict(labels)?;
    let x = features_or_identity(graph.inner.node_count(), features)?;
    let strategy = TargetStrategy::parse(strategy).map_err(pyerr)?;
    let set = select_targets(&graph.inner, &labels, &model.inner, &x, strategy, count, seed)
        .map_err(pyerr)?;
    Ok(set.nodes)
}

/// Fold per-target perturbations into `{"asr": [...], "aml": float}`.
#[pyfunction]
fn summarize(py: Python<'_>, perturbations: Vec<PyPerturbation>, budget: usize) -> PyResult<Py<pyo3::types::PyDict>> {
    let report = evaluate(
        perturbations.into_iter().map(|p| p.inner).collect(),
        budget,
    )
    .map_err(pyerr)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("asr", report.asr.clone())?;
    dict.set_item("aml", report.aml)?;
    Ok(dict.unbind())
}

/// Asynchronous label propagation; returns the community id of each node.
#[pyfunction]
fn communities(graph: &PyGraph, seed: u64) -> PyResult<Vec<usize>> {
    Ok(label_propagation(&graph.inner, seed)
        .map_err(pyerr)?
        .assignment()
        .to_vec())
}

/// The attacker's partial view: drop links with probability `p_miss`,
/// either everywhere ("random") or sparing the target's links ("keep_1hop").
#[pyfunction]
fn partial_view(
    graph: &PyGraph,
    mode: &str,
    p_miss: f64,
    target: usize,
    seed: u64,
) -> PyResult<PyGraph> {
    let mode = MissingMode::parse(mode).map_err(pyerr)?;
    Ok(PyGraph {
        inner: limited_knowledge_graph(&graph.inner, mode, p_miss, target, seed).map_err(pyerr)?,
    })
}

#[pymodule]
fn mga_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyPerturbation>()?;
    m.add_function(wrap_pyfunction!(load_label_file, m)?)?;
    m.add_function(wrap_pyfunction!(attack, m)?)?;
    m.add_function(wrap_pyfunction!(pick_targets, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(communities, m)?)?;
    m.add_function(wrap_pyfunction!(partial_view, m)?)?;
    Ok(())
}
