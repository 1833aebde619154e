//! Python bindings for the `ising_lab` core crate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ising_lab::acceptance::{run_criterion, AcceptanceOptions, CRITERIA};
use ising_lab::chain::{self, BirthDeathSpec, TvStart};
use ising_lab::glauber::{self, SimConfig};
use ising_lab::graph::{self, RegularGraph};
use ising_lab::{landscape, quenched, tree, ModelParams};

fn err(e: ising_lab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ModelParams", frozen)]
struct PyParams {
    inner: ModelParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (d, beta, field = 0.0))]
    fn new(d: usize, beta: f64, field: f64) -> PyResult<Self> {
        Ok(Self { inner: ModelParams::new(d, beta, field).map_err(err)? })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn field(&self) -> f64 {
        self.inner.field
    }

    #[getter]
    fn beta_c(&self) -> f64 {
        self.inner.beta_c()
    }

    fn is_low_temperature(&self) -> bool {
        self.inner.is_low_temperature()
    }

    fn with_field(&self, field: f64) -> Self {
        Self { inner: self.inner.with_field(field) }
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(d={}, beta={}, field={})", self.inner.d, self.inner.beta, self.inner.field)
    }
}

#[pyclass(name = "RegularGraph", frozen)]
struct PyGraph {
    inner: RegularGraph,
}

#[pymethods]
impl PyGraph {
    #[staticmethod]
    fn configuration_model(n: usize, d: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: graph::sample_configuration_model(n, d, seed).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, d, seed, max_attempts = 10_000))]
    fn simple(n: usize, d: usize, seed: u64, max_attempts: usize) -> PyResult<Self> {
        Ok(Self { inner: graph::sample_simple(n, d, seed, max_attempts).map_err(err)? })
    }

    #[staticmethod]
    fn from_edges(n: usize, d: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self { inner: RegularGraph::from_edges(n, d, &edges).map_err(err)? })
    }

    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(Self { inner: RegularGraph::from_edge_list(text).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<usize>> {
        if v >= self.inner.n() {
            return Err(err(ising_lab::Error::VertexOutOfRange { vertex: v, n: self.inner.n() }));
        }
        Ok(self.inner.neighbors(v).to_vec())
    }

    fn is_simple(&self) -> bool {
        self.inner.is_simple()
    }

    fn crossing_edges(&self, subset: Vec<usize>) -> PyResult<usize> {
        Ok(self.inner.crossing_edges(&subset).map_err(err)?.crossing)
    }

    fn isoperimetric_number(&self) -> PyResult<f64> {
        Ok(self.inner.isoperimetric_number().map_err(err)?.value)
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }
}

#[pyclass(name = "BirthDeathChain", frozen)]
struct PyChain {
    inner: BirthDeathSpec,
}

#[pymethods]
impl PyChain {
    #[staticmethod]
    fn annealed(n: usize, params: &PyParams) -> PyResult<Self> {
        Ok(Self { inner: BirthDeathSpec::annealed(n, &params.inner).map_err(err)? })
    }

    #[staticmethod]
    fn from_log_weights(weights: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: BirthDeathSpec::build(weights).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn up(&self) -> Vec<f64> {
        self.inner.p().to_vec()
    }

    fn down(&self) -> Vec<f64> {
        self.inner.q().to_vec()
    }

    fn stationary(&self) -> Vec<f64> {
        chain::stationary(&self.inner).nu
    }

    fn gap(&self) -> PyResult<f64> {
        chain::exact_gap(&self.inner).map_err(err)
    }

    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        chain::eigenvalues(&self.inner).map_err(err)
    }

    fn chen_bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let b = chain::chen_gap_bounds(&self.inner);
        let d = PyDict::new(py);
        d.set_item("median", b.median)?;
        d.set_item("log_ell", b.log_ell)?;
        d.set_item("lower", b.lower)?;
        d.set_item("upper", b.upper)?;
        Ok(d)
    }

    #[pyo3(signature = (start, target, variance = false))]
    fn hitting<'py>(&self, py: Python<'py>, start: usize, target: usize, variance: bool) -> PyResult<Bound<'py, PyDict>> {
        let h = if variance {
            chain::hitting_with_variance(&self.inner, start, target)
        } else {
            chain::expected_hitting(&self.inner, start, target)
        }
        .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("log_mean", h.log_mean)?;
        d.set_item("mean", h.mean())?;
        d.set_item("variance", h.variance())?;
        Ok(d)
    }

    /// `start` is "extremes", "all" or a state index.
    #[pyo3(signature = (horizon, start = "extremes".to_string(), stride = 1))]
    fn tv<'py>(&self, py: Python<'py>, horizon: usize, start: String, stride: usize) -> PyResult<Bound<'py, PyDict>> {
        let start = match start.as_str() {
            "extremes" => TvStart::Extremes,
            "all" => TvStart::All,
            k => TvStart::State(k.parse().map_err(|_| PyValueError::new_err("start must be extremes, all or an index"))?),
        };
        let c = chain::tv_evolution(&self.inner, start, horizon, stride).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("times", c.times.clone())?;
        d.set_item("dist", c.dist.clone())?;
        d.set_item("t_mix_quarter", c.t_mix_quarter)?;
        d.set_item("window", c.window)?;
        d.set_item("worst_state", c.worst_state)?;
        Ok(d)
    }
}

#[pyfunction]
fn critical_points<'py>(py: Python<'py>, params: &PyParams) -> PyResult<Bound<'py, PyDict>> {
    let r = landscape::critical_points(&params.inner);
    let d = PyDict::new(py);
    d.set_item("t_u", r.t_u)?;
    d.set_item("criticals", r.criticals.iter().map(|c| (c.t, format!("{:?}", c.kind), c.value)).collect::<Vec<_>>())?;
    d.set_item("b_hat_c", r.b_hat_c)?;
    d.set_item("lambda", r.lambda)?;
    d.set_item("pressure", r.pressure)?;
    Ok(d)
}

#[pyfunction]
fn phi_hat(t: f64, params: &PyParams) -> f64 {
    landscape::phi_hat(t, &params.inner)
}

#[pyfunction]
fn f_limit(t: f64, params: &PyParams) -> f64 {
    landscape::f_limit(t, &params.inner)
}

#[pyfunction]
fn exact_fn(k: usize, n: usize, params: &PyParams) -> PyResult<f64> {
    landscape::exact_fn(k, n, &params.inner).map_err(err)
}

#[pyfunction]
fn annealed_bc(params: &PyParams) -> f64 {
    landscape::annealed_bc(&params.inner)
}

#[pyfunction]
fn barrier_lambda(params: &PyParams) -> Option<f64> {
    landscape::barrier_lambda(&params.inner)
}

#[pyfunction]
fn tree_critical_field(params: &PyParams) -> f64 {
    tree::tree_critical_field(&params.inner)
}

#[pyfunction]
fn tree_fixed_points<'py>(py: Python<'py>, params: &PyParams) -> PyResult<Bound<'py, PyDict>> {
    let f = tree::tree_fixed_points(&params.inner);
    let d = PyDict::new(py);
    d.set_item("roots", f.roots.clone())?;
    d.set_item("stable", f.stable.clone())?;
    d.set_item("kappa", f.kappa)?;
    Ok(d)
}

#[pyfunction]
fn map_r_to_t(r: f64, beta: f64) -> PyResult<f64> {
    tree::map_r_to_t(r, beta).map_err(err)
}

fn leaf_state(s: &str) -> PyResult<tree::LeafState> {
    match s {
        "plus" => Ok(tree::LeafState::Plus),
        "minus" => Ok(tree::LeafState::Minus),
        "free" => Ok(tree::LeafState::Free),
        _ => Err(PyValueError::new_err("boundary must be plus, minus or free")),
    }
}

#[pyfunction]
fn root_magnetization(depth: usize, boundary: &str, params: &PyParams) -> PyResult<f64> {
    tree::root_magnetization(depth, &tree::Boundary::Uniform(leaf_state(boundary)?), &params.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (depths, params, side = "free"))]
fn influence_decay<'py>(py: Python<'py>, depths: Vec<usize>, params: &PyParams, side: &str) -> PyResult<Bound<'py, PyDict>> {
    let prof = tree::influence_decay(&depths, &params.inner, leaf_state(side)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("depths", prof.depths.clone())?;
    d.set_item("influence", prof.influence.clone())?;
    d.set_item("ratios", prof.ratios.clone())?;
    d.set_item("kappa", prof.kappa)?;
    Ok(d)
}

/// `(time, censored)` per replica for the plus majority from all-minus.
#[pyfunction]
#[pyo3(signature = (graph, params, steps, replicas = 1, seed = 0, threshold = None))]
fn hitting_time_sim(
    graph: &PyGraph,
    params: &PyParams,
    steps: u64,
    replicas: usize,
    seed: u64,
    threshold: Option<usize>,
) -> PyResult<Vec<(u64, bool)>> {
    let sim = SimConfig::new(seed, steps, replicas, steps).map_err(err)?;
    let threshold = threshold.unwrap_or_else(|| glauber::majority_threshold(graph.inner.n()));
    let obs = glauber::hitting_time_sim(&graph.inner, &params.inner, threshold, &sim).map_err(err)?;
    Ok(obs.iter().map(|o| (o.time, o.censored)).collect())
}

#[pyfunction]
#[pyo3(signature = (graph, params, steps, replicas = 1, seed = 0))]
fn grand_coupling(graph: &PyGraph, params: &PyParams, steps: u64, replicas: usize, seed: u64) -> PyResult<Vec<(u64, bool)>> {
    let sim = SimConfig::new(seed, steps, replicas, steps).map_err(err)?;
    let obs = glauber::grand_coupling_run(&graph.inner, &params.inner, &sim).map_err(err)?;
    Ok(obs.iter().map(|o| (o.time, o.censored)).collect())
}

#[pyfunction]
#[pyo3(signature = (graph, params, steps, record_stride, start = "minus", replicas = 1, seed = 0))]
fn magnetization_trace(
    graph: &PyGraph,
    params: &PyParams,
    steps: u64,
    record_stride: u64,
    start: &str,
    replicas: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let sim = SimConfig::new(seed, steps, replicas, record_stride).map_err(err)?;
    let start: glauber::Start = start.parse().map_err(err)?;
    glauber::magnetization_trace(&graph.inner, &params.inner, start, &sim).map_err(err)
}

#[pyfunction]
fn full_chain_gap(graph: &PyGraph, params: &PyParams) -> PyResult<f64> {
    Ok(glauber::exact_full_chain(&graph.inner, &params.inner, false).map_err(err)?.gap)
}

/// `log Z_{G,k}` for `k = 0..=n` at zero field.
#[pyfunction]
fn fixed_spin_partition(graph: &PyGraph, beta: f64) -> PyResult<Vec<f64>> {
    Ok(quenched::fixed_spin_partition(&graph.inner, beta).map_err(err)?.log_z)
}

/// `(id, pass, detail)` per criterion.
#[pyfunction]
#[pyo3(signature = (ids = None, bc_perturbation = 0.0))]
fn run_acceptance(ids: Option<Vec<String>>, bc_perturbation: f64) -> PyResult<Vec<(String, bool, String)>> {
    let ids = ids.unwrap_or_else(|| CRITERIA.iter().map(|s| s.to_string()).collect());
    let opts = AcceptanceOptions { bc_perturbation, ..AcceptanceOptions::default() };
    ids.iter()
        .map(|id| {
            let v = run_criterion(id, &opts).map_err(err)?;
            Ok((v.id, v.pass, v.detail))
        })
        .collect()
}

#[pymodule(name = "ising_lab")]
fn ising_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyChain>()?;
    m.add_function(wrap_pyfunction!(critical_points, m)?)?;
    m.add_function(wrap_pyfunction!(phi_hat, m)?)?;
    m.add_function(wrap_pyfunction!(f_limit, m)?)?;
    m.add_function(wrap_pyfunction!(exact_fn, m)?)?;
    m.add_function(wrap_pyfunction!(annealed_bc, m)?)?;
    m.add_function(wrap_pyfunction!(barrier_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(tree_critical_field, m)?)?;
    m.add_function(wrap_pyfunction!(tree_fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(map_r_to_t, m)?)?;
    m.add_function(wrap_pyfunction!(root_magnetization, m)?)?;
    m.add_function(wrap_pyfunction!(influence_decay, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_time_sim, m)?)?;
    m.add_function(wrap_pyfunction!(grand_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(magnetization_trace, m)?)?;
    m.add_function(wrap_pyfunction!(full_chain_gap, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_spin_partition, m)?)?;
    m.add_function(wrap_pyfunction!(run_acceptance, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
