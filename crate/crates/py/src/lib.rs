//! Python extension module for the hybrid-network simulator.
//!
//! Graphs are first-class objects; every analysis entry point returns the
//! same deterministic JSON report (as a string) that the `hybridsim` CLI
//! prints, so results can be compared byte-for-byte across the two
//! front-ends. Validation problems raise `ValueError`; a global-capacity
//! violation detected by the simulator raises `RuntimeError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use rand::Rng;

use hybridsim_core::cluster::{build_helper_sets, verify_helper_family};
use hybridsim_core::graph::{generate, parse_edge_list, randomize_weights, GraphKind};
use hybridsim_core::hash::{HashFamilySpec, HashSeed};
use hybridsim_core::lower::{
    audit_information_flow, build_hard_instance, decode_from_distances, encode_sources,
    lb_value, verify_instance,
};
use hybridsim_core::nq::{nq_distributed, nq_oracle};
use hybridsim_core::routing::{route_end_to_end, Token};
use hybridsim_core::sp::{sample_iid_targets, solve_k_ell_sp, DistanceMode, SPInstance};
use hybridsim_core::util::{derive_seed, node_rng};
use hybridsim_core::{NodeId, SimConfig, WeightedGraph};

fn pyify(e: hybridsim_core::Error) -> PyErr {
    match e {
        hybridsim_core::Error::CapacityViolation { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn render(value: serde_json::Value) -> String {
    serde_json::to_string_pretty(&value).expect("reports serialize")
}

/// An undirected connected graph with positive integer edge weights and
/// nodes numbered `1..=n`.
#[pyclass(frozen)]
#[derive(Clone)]
struct Graph {
    inner: WeightedGraph,
}

fn built(kind: GraphKind, seed: u64) -> PyResult<Graph> {
    Ok(Graph {
        inner: generate(kind, seed).map_err(pyify)?,
    })
}

#[pymethods]
impl Graph {
    /// Path `1 - 2 - ... - n`.
    #[staticmethod]
    fn path(n: u32) -> PyResult<Graph> {
        built(GraphKind::Path { n }, 0)
    }

    /// Cycle on `n >= 3` nodes.
    #[staticmethod]
    fn cycle(n: u32) -> PyResult<Graph> {
        built(GraphKind::Cycle { n }, 0)
    }

    /// Star with center `1` and leaves `2..=n`.
    #[staticmethod]
    fn star(n: u32) -> PyResult<Graph> {
        built(GraphKind::Star { n }, 0)
    }

    /// `rows x cols` grid; node `(r-1)*cols + c` sits at row `r`, column `c`.
    #[staticmethod]
    fn grid(rows: u32, cols: u32) -> PyResult<Graph> {
        built(GraphKind::Grid { rows, cols }, 0)
    }

    /// Complete graph on `n` nodes.
    #[staticmethod]
    fn complete(n: u32) -> PyResult<Graph> {
        built(GraphKind::Complete { n }, 0)
    }

    /// Erdos-Renyi `G(n, p)` with `p = p_millis / 1000`, resampled until
    /// connected.
    #[staticmethod]
    #[pyo3(signature = (n, p_millis, seed = 7))]
    fn erdos_renyi(n: u32, p_millis: u32, seed: u64) -> PyResult<Graph> {
        built(GraphKind::Random { n, p_millis }, seed)
    }

    /// Clique on `clique` nodes with a path of `tail` nodes hanging off it.
    #[staticmethod]
    fn lollipop(clique: u32, tail: u32) -> PyResult<Graph> {
        built(GraphKind::Lollipop { clique, tail }, 0)
    }

    /// Two cliques of `clique` nodes joined by a path of `bridge` nodes.
    #[staticmethod]
    fn barbell(clique: u32, bridge: u32) -> PyResult<Graph> {
        built(GraphKind::Barbell { clique, bridge }, 0)
    }

    /// Parse the text edge-list format (`n m w_max` header, one
    /// `u v w` triple per line).
    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Graph> {
        Ok(Graph {
            inner: parse_edge_list(text).map_err(pyify)?,
        })
    }

    /// Number of nodes.
    fn n(&self) -> u32 {
        self.inner.n()
    }

    /// Number of edges.
    fn m(&self) -> u64 {
        self.inner.m()
    }

    /// Largest edge weight.
    fn w_max(&self) -> u64 {
        self.inner.w_max()
    }

    /// Degree of node `v`.
    fn degree(&self, v: NodeId) -> PyResult<usize> {
        if v < 1 || v > self.inner.n() {
            return Err(PyValueError::new_err(format!(
                "node id {v} outside 1..={}",
                self.inner.n()
            )));
        }
        Ok(self.inner.degree(v))
    }

    /// `(neighbor, weight)` pairs of node `v`.
    fn neighbors(&self, v: NodeId) -> PyResult<Vec<(NodeId, u64)>> {
        if v < 1 || v > self.inner.n() {
            return Err(PyValueError::new_err(format!(
                "node id {v} outside 1..={}",
                self.inner.n()
            )));
        }
        Ok(self.inner.neighbors(v).to_vec())
    }

    /// Serialize to the text edge-list format.
    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    /// Copy of the graph with weights redrawn uniformly from `1..=w_max`.
    fn with_random_weights(&self, w_max: u64, seed: u64) -> PyResult<Graph> {
        Ok(Graph {
            inner: randomize_weights(&self.inner, w_max, seed).map_err(pyify)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(n={}, m={}, w_max={})",
            self.inner.n(),
            self.inner.m(),
            self.inner.w_max()
        )
    }
}

/// Neighborhood quality of `(graph, k, gamma)` via the centralized oracle:
/// the graph value, the optimal radius `d_star`, and every node's
/// `(value, radius)` pair, as a JSON report.
#[pyfunction]
fn nq(graph: &Graph, k: u64, gamma: u64) -> PyResult<String> {
    let rep = nq_oracle(&graph.inner, k, gamma).map_err(pyify)?;
    Ok(render(rep.to_json()))
}

/// Neighborhood quality computed by the distributed protocol under the
/// round/capacity simulator; the report additionally carries the round and
/// bit totals.
#[pyfunction]
#[pyo3(signature = (graph, k, gamma, seed = 7))]
fn nq_protocol(graph: &Graph, k: u64, gamma: u64, seed: u64) -> PyResult<String> {
    let cfg = SimConfig::new(gamma, seed);
    let (rep, _trace) = nq_distributed(&graph.inner, k, gamma, &cfg).map_err(pyify)?;
    Ok(render(rep.to_json()))
}

/// Sorted deduplicated target sample: `ell` draws with replacement from
/// `1..=n`, as used by the i.i.d. target mode.
#[pyfunction]
fn sample_targets(n: u32, ell: u64, seed: u64) -> Vec<NodeId> {
    sample_iid_targets(n, ell, seed)
}

/// Build helper sets around `targets` and check them: every target's set
/// must be large enough for `k` tokens at capacity `gamma`, stay within the
/// hop budget, and no node may serve too many targets. JSON report with the
/// family, the check verdict, and the round totals.
#[pyfunction]
#[pyo3(signature = (graph, targets, k, gamma, seed = 7, c = 2))]
fn helpers(
    graph: &Graph,
    targets: Vec<NodeId>,
    k: u64,
    gamma: u64,
    seed: u64,
    c: u32,
) -> PyResult<String> {
    let rep = nq_oracle(&graph.inner, k, gamma).map_err(pyify)?;
    let cfg = SimConfig::new(gamma, seed);
    let (family, trace) =
        build_helper_sets(&graph.inner, &targets, k, gamma, rep.value, &cfg).map_err(pyify)?;
    let check = verify_helper_family(&graph.inner, &family, c);
    Ok(render(serde_json::json!({
        "family": family.to_json(),
        "check": serde_json::to_value(&check).expect("check serializes"),
        "rounds": trace.totals.combined_rounds,
        "global_bits": trace.totals.global_bits,
    })))
}

/// Route one token from every source to every target (payload = source id)
/// through hashed intermediates and helper sets. JSON report with the
/// delivery map, the load maxima, and the round totals.
#[pyfunction]
#[pyo3(signature = (graph, sources, targets, gamma, seed = 7))]
fn route(
    graph: &Graph,
    sources: Vec<NodeId>,
    targets: Vec<NodeId>,
    gamma: u64,
    seed: u64,
) -> PyResult<String> {
    let rep = nq_oracle(&graph.inner, sources.len() as u64, gamma).map_err(pyify)?;
    let tokens: Vec<Token> = sources
        .iter()
        .flat_map(|&s| {
            (1..=targets.len() as u64).map(move |j| Token {
                source: s,
                target_index: j,
                payload: s as u64,
            })
        })
        .collect();
    let cfg = SimConfig::new(gamma, seed);
    let (delivery, trace) = route_end_to_end(
        &graph.inner,
        &sources,
        &targets,
        &tokens,
        gamma,
        rep.value,
        &cfg,
    )
    .map_err(pyify)?;
    Ok(render(serde_json::json!({
        "delivery": delivery.to_json(),
        "rounds": trace.totals.combined_rounds,
        "global_bits": trace.totals.global_bits,
    })))
}

/// Solve the `k`-source / `ell`-target shortest-path instance end to end.
/// `mode` is `"exact"` (stretch 1) or `"skeleton"` (sampled overlay with
/// parameter `x`). JSON report with the distance labels collected at the
/// targets, the measured stretch, and the phase round counts.
#[pyfunction]
#[pyo3(signature = (graph, sources, targets, gamma, mode = "exact", x = 4, seed = 7))]
fn solve_sp(
    graph: &Graph,
    sources: Vec<NodeId>,
    targets: Vec<NodeId>,
    gamma: u64,
    mode: &str,
    x: u64,
    seed: u64,
) -> PyResult<String> {
    let dist_mode = match mode {
        "exact" => DistanceMode::ExactReference,
        "skeleton" => DistanceMode::Skeleton { x },
        other => {
            return Err(PyValueError::new_err(format!(
                "mode must be \"exact\" or \"skeleton\", got {other:?}"
            )))
        }
    };
    let instance = SPInstance::fixed(graph.inner.n(), sources, targets);
    let cfg = SimConfig::new(gamma, seed);
    let (res, trace) =
        solve_k_ell_sp(&graph.inner, &instance, gamma, dist_mode, &cfg).map_err(pyify)?;
    let mut result = res.to_json();
    result["rounds_total"] = serde_json::json!(trace.totals.combined_rounds);
    result["global_bits"] = serde_json::json!(trace.totals.global_bits);
    Ok(render(result))
}

/// Reweight the graph into a decode-hardness instance around the node with
/// the worst neighborhood quality. JSON report with the instance sidecar
/// (probe node, pairing, thresholds), the verifier verdict, and the
/// reweighted edge list. Raises `ValueError` when the graph is rejected.
#[pyfunction]
#[pyo3(signature = (graph, k, gamma, p_exponent = 1))]
fn hard_instance(graph: &Graph, k: u64, gamma: u64, p_exponent: u32) -> PyResult<String> {
    let inst = build_hard_instance(&graph.inner, k, gamma, p_exponent).map_err(pyify)?;
    Ok(render(serde_json::json!({
        "instance": inst.to_json(),
        "verified": verify_instance(&inst),
        "edge_list": inst.graph.to_edge_list(),
    })))
}

/// Round lower bound `min(k'/(N gamma), (d_v - 1)/2 - 1)` at the worst
/// probe node, as a JSON report alongside the quality-parameter chain value.
#[pyfunction]
fn lower_bound(graph: &Graph, k: u64, gamma: u64) -> PyResult<String> {
    let rep = lb_value(&graph.inner, k, gamma).map_err(pyify)?;
    Ok(render(rep.to_json()))
}

/// Encode `bits` into source positions on the hardness instance, solve the
/// resulting shortest-path instance exactly, and decode the bits back from
/// the distance labels. JSON report with the decoded bits and a success
/// flag.
#[pyfunction]
#[pyo3(signature = (graph, k, gamma, bits, seed = 7))]
fn decode_roundtrip(
    graph: &Graph,
    k: u64,
    gamma: u64,
    bits: Vec<bool>,
    seed: u64,
) -> PyResult<String> {
    let inst = build_hard_instance(&graph.inner, k, gamma, 1).map_err(pyify)?;
    let enc = encode_sources(&inst, &bits).map_err(pyify)?;
    let spec = SPInstance::fixed(inst.graph.n(), enc.sources.clone(), vec![inst.v]);
    let cfg = SimConfig::new(gamma, seed);
    let (res, _trace) =
        solve_k_ell_sp(&inst.graph, &spec, gamma, DistanceMode::ExactReference, &cfg)
            .map_err(pyify)?;
    let labels: Vec<u64> = enc.sources.iter().map(|s| res.labels[&(inst.v, *s)]).collect();
    let decoded = decode_from_distances(&labels, &inst).map_err(pyify)?;
    Ok(render(serde_json::json!({
        "ok": decoded == bits,
        "decoded": decoded,
        "sources": enc.sources,
        "probe": inst.v,
        "labels": labels,
    })))
}

/// Run the information-flow audit: `runs` random bit strings are encoded,
/// solved, and decoded; the global bits entering the probe's ball are then
/// compared against the entropy the successful decodes must have moved.
#[pyfunction]
#[pyo3(signature = (graph, k, gamma, runs = 20, p_exponent = 1, seed = 7))]
fn audit(
    graph: &Graph,
    k: u64,
    gamma: u64,
    runs: u64,
    p_exponent: u32,
    seed: u64,
) -> PyResult<String> {
    if runs == 0 {
        return Err(PyValueError::new_err("runs must be at least 1"));
    }
    let inst = build_hard_instance(&graph.inner, k, gamma, p_exponent).map_err(pyify)?;
    let n = inst.graph.n();
    let mut rng = node_rng(derive_seed(seed, 0xA0D1), 0);
    let mut observed = Vec::new();
    let mut decoded_ok = 0u64;
    for run in 0..runs {
        let bits: Vec<bool> = (0..inst.k_prime).map(|_| rng.gen_bool(0.5)).collect();
        let enc = encode_sources(&inst, &bits).map_err(pyify)?;
        let spec = SPInstance::fixed(n, enc.sources.clone(), vec![inst.v]);
        let cfg = SimConfig::new(gamma, derive_seed(seed, run));
        let (res, trace) =
            solve_k_ell_sp(&inst.graph, &spec, gamma, DistanceMode::ExactReference, &cfg)
                .map_err(pyify)?;
        let labels: Vec<u64> =
            enc.sources.iter().map(|s| res.labels[&(inst.v, *s)]).collect();
        let ok = decode_from_distances(&labels, &inst).map_err(pyify)? == bits;
        decoded_ok += ok as u64;
        observed.push((trace, ok));
    }
    let report = audit_information_flow(&inst, &observed).map_err(pyify)?;
    Ok(render(serde_json::json!({
        "audit": report.to_json(),
        "decoded_ok": decoded_ok,
        "runs": runs,
    })))
}

/// A sampled member of the k-wise independent hash family: a random
/// polynomial of degree `independence - 1` over a prime field, evaluated by
/// Horner's rule and truncated to `range_bits`.
#[pyclass(frozen, name = "HashFamily")]
struct PyHashFamily {
    inner: HashSeed,
}

#[pymethods]
impl PyHashFamily {
    /// Draw a fresh seed for the `(domain_bits, range_bits, independence)`
    /// family.
    #[staticmethod]
    fn sample(domain_bits: u32, range_bits: u32, independence: u32, seed: u64) -> PyResult<Self> {
        let spec = HashFamilySpec {
            domain_bits,
            range_bits,
            independence,
        };
        let mut rng = node_rng(seed, 0);
        Ok(PyHashFamily {
            inner: HashSeed::sample(spec, &mut rng).map_err(pyify)?,
        })
    }

    /// Rebuild a seed from its serialized bytes.
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyHashFamily {
            inner: HashSeed::from_bytes(data).map_err(pyify)?,
        })
    }

    /// Hash `key` into `range_bits` bits.
    fn eval(&self, key: u64) -> u64 {
        self.inner.eval(key)
    }

    /// Polynomial value in the field, before truncation.
    fn eval_field(&self, key: u64) -> u64 {
        self.inner.eval_field(key)
    }

    /// Number of random bits a seed of this shape carries.
    fn seed_bits(&self) -> u64 {
        self.inner.seed_bits()
    }

    /// Serialize the seed.
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new_bound(py, &self.inner.to_bytes())
    }
}

#[pymodule]
fn hybridsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<PyHashFamily>()?;
    m.add_function(wrap_pyfunction!(nq, m)?)?;
    m.add_function(wrap_pyfunction!(nq_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(sample_targets, m)?)?;
    m.add_function(wrap_pyfunction!(helpers, m)?)?;
    m.add_function(wrap_pyfunction!(route, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sp, m)?)?;
    m.add_function(wrap_pyfunction!(hard_instance, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(decode_roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
