//! Python bindings.

use std::sync::Arc;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyValueError, PyRuntimeError};
use pyo3::prelude::*;

use lossgraph::experiments::{run_kl_study as kl_study, KlStudySpec, ScaleVariant};
use lossgraph::prior::SizeWeighting;
use lossgraph::search::{enumerate_posterior as enumerate, SearchConfig};
use lossgraph::{DataMatrix, Error, LikelihoodConfig, PriorSpec, PriorVariant};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Undirected graph with 0-based vertices.
#[pyclass(module = "pylossgraph", name = "Graph", eq, frozen, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyGraph(lossgraph::Graph);

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (p, edges = Vec::new()))]
    fn new(p: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        lossgraph::Graph::from_edges(p, edges).map(PyGraph).map_err(err)
    }

    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        lossgraph::Graph::parse_edge_list(text, None).map(PyGraph).map_err(err)
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.0.num_vertices()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.0.num_edges()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges()
    }

    fn has_edge(&self, i: usize, j: usize) -> bool {
        self.0.has_edge(i, j)
    }

    fn is_decomposable(&self) -> bool {
        lossgraph::is_decomposable(&self.0)
    }

    /// `(cliques, separators)` of a junction tree.
    fn junction_tree(&self) -> PyResult<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
        let jt = lossgraph::junction_tree(&self.0).map_err(err)?;
        Ok((jt.cliques, jt.separators))
    }

    /// `(additions, deletions)` that keep the graph decomposable.
    fn legal_moves(&self) -> PyResult<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
        let jt = lossgraph::junction_tree(&self.0).map_err(err)?;
        let m = lossgraph::legal_edge_moves(&self.0, &jt);
        Ok((m.additions, m.deletions))
    }

    fn min_fill_triangulation(&self) -> Self {
        PyGraph(lossgraph::chordal::min_fill_triangulation(&self.0))
    }

    fn to_edge_list(&self) -> String {
        self.0.to_edge_list()
    }

    #[pyo3(signature = (name = "G"))]
    fn to_dot(&self, name: &str) -> String {
        self.0.to_dot(name)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

fn variant(kind: &str, h: f64, c: f64, phi: f64, a: f64, b: f64) -> PyResult<PriorVariant> {
    Ok(match kind {
        "loss_based" => PriorVariant::LossBased { h, c },
        "uniform" => PriorVariant::Uniform,
        "carvalho_scott" => PriorVariant::CarvalhoScott,
        "villa_lee" => PriorVariant::VillaLee { h },
        "mixture" => PriorVariant::Mixture,
        "bernoulli" => PriorVariant::Bernoulli { phi },
        "beta_binomial" => PriorVariant::BetaBinomial { a, b },
        other => return Err(PyValueError::new_err(format!("unknown prior kind {other:?}"))),
    })
}

/// Graph prior on `m` possible edges.
#[pyclass(module = "pylossgraph", name = "Prior", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPrior(PriorSpec);

#[pymethods]
impl PyPrior {
    #[new]
    #[pyo3(signature = (m, kind = "loss_based", h = 1.0, c = 1.0, phi = 0.5, a = 1.0, b = 1.0))]
    fn new(m: usize, kind: &str, h: f64, c: f64, phi: f64, a: f64, b: f64) -> PyResult<Self> {
        PriorSpec::new(variant(kind, h, c, phi, a, b)?, m).map(PyPrior).map_err(err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    fn log_prior_size(&self, k: usize) -> f64 {
        self.0.log_prior_size(k)
    }

    fn log_prior(&self, g: &PyGraph) -> PyResult<f64> {
        self.0.log_prior(&g.0).map_err(err)
    }

    /// Probabilities of each edge count, per-size or graph-count weighted.
    #[pyo3(signature = (graph_count = false))]
    fn size_distribution(&self, graph_count: bool) -> Vec<f64> {
        let w = if graph_count {
            SizeWeighting::GraphCount
        } else {
            SizeWeighting::PerSize
        };
        self.0.size_distribution(w).probabilities
    }

    #[pyo3(signature = (graph_count = false))]
    fn moments(&self, graph_count: bool) -> (f64, f64) {
        let w = if graph_count {
            SizeWeighting::GraphCount
        } else {
            SizeWeighting::PerSize
        };
        self.0.size_distribution(w).moments()
    }

    fn __repr__(&self) -> String {
        format!("Prior({}, m={})", self.0.label(), self.0.m)
    }
}

/// Loss-based prior matching a target mean (and variance) of the edge count.
#[pyfunction]
#[pyo3(signature = (m, mean, variance = None))]
fn calibrate(m: usize, mean: f64, variance: Option<f64>) -> PyResult<PyPrior> {
    lossgraph::calibrate(m, mean, variance).map(PyPrior).map_err(err)
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// Column-centred observations, one row per sample.
#[pyclass(module = "pylossgraph", name = "Data", frozen)]
struct PyData(Arc<DataMatrix>);

#[pymethods]
impl PyData {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyData(Arc::new(DataMatrix::new(matrix(&rows)?))))
    }

    #[staticmethod]
    #[pyo3(signature = (path, has_header = true))]
    fn from_csv(path: &str, has_header: bool) -> PyResult<Self> {
        let (d, _) = lossgraph::io::ingest_csv(std::path::Path::new(path), has_header).map_err(err)?;
        Ok(PyData(Arc::new(d)))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }
}

#[pyfunction]
#[pyo3(signature = (data, graph, g = None))]
fn log_marginal_likelihood(data: &PyData, graph: &PyGraph, g: Option<f64>) -> PyResult<f64> {
    lossgraph::log_marginal_likelihood(&data.0, &graph.0, &LikelihoodConfig { g }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (data, graph, prior, g = None))]
fn log_posterior_score(data: &PyData, graph: &PyGraph, prior: &PyPrior, g: Option<f64>) -> PyResult<f64> {
    lossgraph::log_posterior_score(&data.0, &graph.0, &prior.0, &LikelihoodConfig { g }).map_err(err)
}

/// Runs FINCS. Returns `(top graphs as (graph, log score), inclusion matrix,
/// median graph)`.
#[pyfunction]
#[pyo3(signature = (data, prior, seed, iterations = 100_000, capacity = 1000, g = None))]
#[allow(clippy::type_complexity)]
fn run_fincs(
    py: Python<'_>,
    data: &PyData,
    prior: &PyPrior,
    seed: u64,
    iterations: usize,
    capacity: usize,
    g: Option<f64>,
) -> PyResult<(Vec<(PyGraph, f64)>, Vec<Vec<f64>>, PyGraph)> {
    let cfg = SearchConfig {
        iterations,
        capacity,
        seed,
        ..SearchConfig::default()
    };
    let data = data.0.clone();
    let spec = prior.0;
    let res = py
        .detach(move || lossgraph::run_fincs(data, &spec, &LikelihoodConfig { g }, &cfg))
        .map_err(err)?;
    let top = res
        .list
        .entries()
        .iter()
        .map(|(gr, s)| (PyGraph(gr.clone()), *s))
        .collect();
    Ok((top, res.inclusion.to_rows(), PyGraph(res.median_graph)))
}

/// Exact posterior over all decomposable graphs (p <= 6): `(graph, log score,
/// probability)` best first.
#[pyfunction]
#[pyo3(signature = (data, prior, g = None))]
fn enumerate_posterior(data: &PyData, prior: &PyPrior, g: Option<f64>) -> PyResult<Vec<(PyGraph, f64, f64)>> {
    let post = enumerate(data.0.clone(), &prior.0, &LikelihoodConfig { g }).map_err(err)?;
    Ok(post.graphs.into_iter().map(|(gr, s, pr)| (PyGraph(gr), s, pr)).collect())
}

/// Minimum KL divergence from a precision matrix to any graph missing one
/// edge, with the 0-based edge attaining it.
#[pyfunction]
fn min_kl_from_precision(k: Vec<Vec<f64>>) -> PyResult<(f64, (usize, usize))> {
    lossgraph::geometry::min_kl_from_precision(&matrix(&k)?).map_err(err)
}

/// `[(size, mean, stderr)]` of the minimum KL divergence.
#[pyfunction]
#[pyo3(signature = (scale, seed, sizes = vec![3, 5, 10], samples = 1000, delta = 3.0))]
fn run_kl_study(scale: &str, seed: u64, sizes: Vec<usize>, samples: usize, delta: f64) -> PyResult<Vec<(usize, f64, f64)>> {
    let scale = match scale {
        "identity" => ScaleVariant::Identity,
        "d" => ScaleVariant::D,
        "d_inverse" => ScaleVariant::DInverse,
        other => return Err(PyValueError::new_err(format!("unknown scale {other:?}"))),
    };
    let spec = KlStudySpec {
        sizes,
        mc_samples: samples,
        scale,
        delta,
        seed,
    };
    let r = kl_study(&spec).map_err(err)?;
    Ok(r.points.iter().map(|p| (p.size, p.mean, p.stderr)).collect())
}

#[pymodule]
fn pylossgraph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyPrior>()?;
    m.add_class::<PyData>()?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(log_marginal_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(log_posterior_score, m)?)?;
    m.add_function(wrap_pyfunction!(run_fincs, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(min_kl_from_precision, m)?)?;
    m.add_function(wrap_pyfunction!(run_kl_study, m)?)?;
    Ok(())
}
