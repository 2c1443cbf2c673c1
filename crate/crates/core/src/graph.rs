//! Connected weighted graphs: construction, edge-list I/O, generators, and
//! the distance primitives the protocol stack is checked against.
//!
//! Nodes are identified by 1-based [`NodeId`]s. Graphs are undirected, simple
//! (no loops, no parallel edges), connected, with integer edge weights in
//! `[1, w_max]` where `w_max` is polynomially bounded in `n`.

use crate::constants::WEIGHT_RANGE_EXPONENT;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::fmt::Write as _;

/// 1-based node identifier.
pub type NodeId = u32;

/// Internal index of a node id.
#[inline]
pub(crate) fn ix(v: NodeId) -> usize {
    debug_assert!(v >= 1);
    (v - 1) as usize
}

/// A connected, undirected, simple graph with positive integer edge weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedGraph {
    n: u32,
    w_max: u64,
    /// Adjacency lists sorted by neighbor id; mirrored for both endpoints.
    adj: Vec<Vec<(NodeId, u64)>>,
    m: u64,
}

impl WeightedGraph {
    /// Build a graph from an edge list, validating simplicity, weight range,
    /// and connectivity. `w_max` declares the legal weight range; it must not
    /// exceed `n^3` so that weights and path lengths fit in message fields.
    pub fn from_edges(n: u32, w_max: u64, edges: &[(NodeId, NodeId, u64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("graph must have at least one node"));
        }
        let weight_cap = (n as u128).pow(WEIGHT_RANGE_EXPONENT);
        if w_max == 0 || (w_max as u128) > weight_cap.max(1) {
            return Err(Error::validation(format!(
                "w_max = {w_max} outside [1, n^{WEIGHT_RANGE_EXPONENT}] = [1, {weight_cap}]"
            )));
        }
        let mut adj: Vec<Vec<(NodeId, u64)>> = vec![Vec::new(); n as usize];
        for &(u, v, w) in edges {
            if u < 1 || u > n || v < 1 || v > n {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) references a node outside 1..={n}"
                )));
            }
            if u == v {
                return Err(Error::validation(format!("self-loop at node {u}")));
            }
            if w < 1 || w > w_max {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) weight {w} outside [1, {w_max}]"
                )));
            }
            adj[ix(u)].push((v, w));
            adj[ix(v)].push((u, w));
        }
        for (i, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::validation(format!(
                    "parallel edges at node {}",
                    i + 1
                )));
            }
        }
        let g = WeightedGraph {
            n,
            w_max,
            adj,
            m: edges.len() as u64,
        };
        if !g.is_connected() {
            return Err(Error::validation("graph is not connected"));
        }
        Ok(g)
    }

    /// Number of nodes.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of edges.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Declared weight range upper bound.
    pub fn w_max(&self) -> u64 {
        self.w_max
    }

    /// Iterator over all node ids, ascending.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.n
    }

    /// Neighbors of `v` with edge weights, sorted by neighbor id.
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, u64)] {
        &self.adj[ix(v)]
    }

    /// Degree of `v`.
    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[ix(v)].len()
    }

    /// Weight of edge `{u, v}`, if present.
    pub fn edge_weight(&self, u: NodeId, v: NodeId) -> Option<u64> {
        self.adj[ix(u)]
            .binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| self.adj[ix(u)][i].1)
    }

    /// All edges as `(u, v, w)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, u64)> {
        let mut out = Vec::with_capacity(self.m as usize);
        for u in self.nodes() {
            for &(v, w) in self.neighbors(u) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// Replace every edge weight via `f(u, v, old) -> new`, keeping the
    /// structure. Weights are re-validated against `new_w_max`.
    pub fn reweighted(
        &self,
        new_w_max: u64,
        mut f: impl FnMut(NodeId, NodeId, u64) -> u64,
    ) -> Result<Self> {
        let edges: Vec<(NodeId, NodeId, u64)> = self
            .edges()
            .into_iter()
            .map(|(u, v, w)| (u, v, f(u, v, w)))
            .collect();
        WeightedGraph::from_edges(self.n, new_w_max, &edges)
    }

    fn is_connected(&self) -> bool {
        self.n == 1 || self.bfs_hops(1).iter().all(|&d| d != u32::MAX)
    }

    /// Hop distances (ignoring weights) from `v` to every node; index `ix(u)`.
    pub fn bfs_hops(&self, v: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n as usize];
        dist[ix(v)] = 0;
        let mut frontier = vec![v];
        let mut d = 0u32;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for &(w, _) in self.neighbors(u) {
                    if dist[ix(w)] == u32::MAX {
                        dist[ix(w)] = d;
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    /// Hop eccentricity of `v`: max hop distance to any node.
    pub fn hop_eccentricity(&self, v: NodeId) -> u32 {
        *self.bfs_hops(v).iter().max().unwrap()
    }

    /// Hop diameter of the graph: max eccentricity over all nodes.
    pub fn hop_diameter(&self) -> u32 {
        self.nodes()
            .map(|v| self.hop_eccentricity(v))
            .max()
            .unwrap()
    }

    /// `|B(v, d)|` for `d = 0..=hop_eccentricity(v)`: the number of nodes
    /// within hop distance `d` of `v`. Index `d` of the returned vector.
    pub fn neighborhood_profile(&self, v: NodeId) -> Vec<u64> {
        let hops = self.bfs_hops(v);
        let ecc = *hops.iter().max().unwrap() as usize;
        let mut counts = vec![0u64; ecc + 1];
        for &d in &hops {
            counts[d as usize] += 1;
        }
        for d in 1..=ecc {
            counts[d] += counts[d - 1];
        }
        counts
    }

    /// `|B(v, d)|` for a single radius (saturating at `n` beyond the
    /// eccentricity).
    pub fn ball_size(&self, v: NodeId, d: u32) -> u64 {
        let profile = self.neighborhood_profile(v);
        let d = (d as usize).min(profile.len() - 1);
        profile[d]
    }

    /// The nodes within hop distance `d` of `v`, sorted.
    pub fn ball(&self, v: NodeId, d: u32) -> Vec<NodeId> {
        let hops = self.bfs_hops(v);
        self.nodes().filter(|&u| hops[ix(u)] <= d).collect()
    }

    /// `N(d) = min_v |B(v, d)|` for `d = 0..=hop_diameter()`.
    pub fn min_neighborhood_profile(&self) -> Vec<u64> {
        let diam = self.hop_diameter() as usize;
        let mut mins = vec![u64::MAX; diam + 1];
        for v in self.nodes() {
            let profile = self.neighborhood_profile(v);
            for d in 0..=diam {
                let b = profile[d.min(profile.len() - 1)];
                mins[d] = mins[d].min(b);
            }
        }
        mins
    }

    /// Exact weighted distances from `source` (Dijkstra). Returns a vector
    /// indexed by `ix(v)`; the graph is connected so every entry is finite.
    pub fn dijkstra(&self, source: NodeId) -> Vec<u64> {
        let mut dist = vec![u64::MAX; self.n as usize];
        dist[ix(source)] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(std::cmp::Reverse((0u64, source)));
        while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
            if d > dist[ix(u)] {
                continue;
            }
            for &(v, w) in self.neighbors(u) {
                let nd = d + w;
                if nd < dist[ix(v)] {
                    dist[ix(v)] = nd;
                    heap.push(std::cmp::Reverse((nd, v)));
                }
            }
        }
        dist
    }

    /// Weighted distances from `source` restricted to paths of at most
    /// `hop_limit` edges (`u64::MAX` where no such path exists). Computed by
    /// `hop_limit` rounds of edge relaxation.
    pub fn hop_limited_distances(&self, source: NodeId, hop_limit: u32) -> Vec<u64> {
        let mut dist = vec![u64::MAX; self.n as usize];
        dist[ix(source)] = 0;
        for _ in 0..hop_limit {
            let prev = dist.clone();
            let mut changed = false;
            for u in self.nodes() {
                if prev[ix(u)] == u64::MAX {
                    continue;
                }
                for &(v, w) in self.neighbors(u) {
                    let nd = prev[ix(u)] + w;
                    if nd < dist[ix(v)] {
                        dist[ix(v)] = nd;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }

    /// Serialize as an edge-list document (see [`parse_edge_list`] for the
    /// format).
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes edges w_max");
        let _ = writeln!(out, "{} {} {}", self.n, self.m, self.w_max);
        for (u, v, w) in self.edges() {
            let _ = writeln!(out, "{u} {v} {w}");
        }
        out
    }
}

/// Parse the plain-text edge-list format:
///
/// ```text
/// # comment lines start with '#'
/// n m w_max        <- header: node count, edge count, weight bound
/// u v w            <- one line per edge, 1-based ids, weight in [1, w_max]
/// ```
pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut header: Option<(u32, u64, u64)> = None;
    let mut edges: Vec<(NodeId, NodeId, u64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let parse =
            |s: &str| -> std::result::Result<u64, String> { s.parse::<u64>().map_err(|e| e.to_string()) };
        let nums: std::result::Result<Vec<u64>, String> = fields.iter().map(|s| parse(s)).collect();
        let nums = nums.map_err(|msg| Error::Parse {
            line: lineno + 1,
            msg,
        })?;
        if header.is_none() {
            let n = u32::try_from(nums[0]).map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: "node count out of range".into(),
            })?;
            header = Some((n, nums[1], nums[2]));
        } else {
            let u = u32::try_from(nums[0]).map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: "node id out of range".into(),
            })?;
            let v = u32::try_from(nums[1]).map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: "node id out of range".into(),
            })?;
            edges.push((u, v, nums[2]));
        }
    }
    let (n, m, w_max) = header.ok_or_else(|| Error::validation("empty edge-list document"))?;
    if edges.len() as u64 != m {
        return Err(Error::validation(format!(
            "header declares {m} edges but {} were listed",
            edges.len()
        )));
    }
    WeightedGraph::from_edges(n, w_max, &edges)
}

/// Families of generated instances. All generators are deterministic for a
/// fixed seed and produce unit weights (use [`randomize_weights`] to draw
/// random weights afterwards).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Path `1 - 2 - ... - n`.
    Path { n: u32 },
    /// Cycle on `n >= 3` nodes.
    Cycle { n: u32 },
    /// Star: center node `1`, leaves `2..=n`.
    Star { n: u32 },
    /// `rows x cols` grid; node id `(r-1)*cols + c`.
    Grid { rows: u32, cols: u32 },
    /// Complete graph on `n` nodes.
    Complete { n: u32 },
    /// Erdos-Renyi `G(n, p)` with `p` in per-mille, resampled until
    /// connected.
    Random { n: u32, p_millis: u32 },
    /// Clique on `clique` nodes (ids `1..=clique`) with a path of `tail`
    /// extra nodes hanging off node `clique`.
    Lollipop { clique: u32, tail: u32 },
    /// Two cliques of `clique` nodes joined by a path of `bridge` extra
    /// nodes.
    Barbell { clique: u32, bridge: u32 },
}

impl GraphKind {
    /// Total node count of the generated graph.
    pub fn node_count(&self) -> u32 {
        match *self {
            GraphKind::Path { n }
            | GraphKind::Cycle { n }
            | GraphKind::Star { n }
            | GraphKind::Complete { n }
            | GraphKind::Random { n, .. } => n,
            GraphKind::Grid { rows, cols } => rows * cols,
            GraphKind::Lollipop { clique, tail } => clique + tail,
            GraphKind::Barbell { clique, bridge } => 2 * clique + bridge,
        }
    }
}

/// Generate a unit-weight instance of the requested family. `seed` only
/// matters for [`GraphKind::Random`].
pub fn generate(kind: GraphKind, seed: u64) -> Result<WeightedGraph> {
    let mut edges: Vec<(NodeId, NodeId, u64)> = Vec::new();
    let n = kind.node_count();
    match kind {
        GraphKind::Path { n } => {
            require(n >= 1, "path needs n >= 1")?;
            for i in 1..n {
                edges.push((i, i + 1, 1));
            }
        }
        GraphKind::Cycle { n } => {
            require(n >= 3, "cycle needs n >= 3")?;
            for i in 1..n {
                edges.push((i, i + 1, 1));
            }
            edges.push((1, n, 1));
        }
        GraphKind::Star { n } => {
            require(n >= 2, "star needs n >= 2")?;
            for i in 2..=n {
                edges.push((1, i, 1));
            }
        }
        GraphKind::Grid { rows, cols } => {
            require(rows >= 1 && cols >= 1, "grid needs rows, cols >= 1")?;
            let id = |r: u32, c: u32| (r - 1) * cols + c;
            for r in 1..=rows {
                for c in 1..=cols {
                    if c < cols {
                        edges.push((id(r, c), id(r, c + 1), 1));
                    }
                    if r < rows {
                        edges.push((id(r, c), id(r + 1, c), 1));
                    }
                }
            }
        }
        GraphKind::Complete { n } => {
            require(n >= 2, "complete graph needs n >= 2")?;
            for u in 1..=n {
                for v in (u + 1)..=n {
                    edges.push((u, v, 1));
                }
            }
        }
        GraphKind::Random { n, p_millis } => {
            require(n >= 2, "random graph needs n >= 2")?;
            require(p_millis >= 1 && p_millis <= 1000, "p in [0.001, 1.000]")?;
            let p = p_millis as f64 / 1000.0;
            let mut rng = ChaCha8Rng::seed_from_u64(crate::util::mix64(seed));
            for attempt in 0..10_000 {
                edges.clear();
                for u in 1..=n {
                    for v in (u + 1)..=n {
                        if rng.gen_bool(p) {
                            edges.push((u, v, 1));
                        }
                    }
                }
                if let Ok(g) = WeightedGraph::from_edges(n, 1, &edges) {
                    return Ok(g);
                }
                let _ = attempt;
            }
            return Err(Error::validation(format!(
                "G({n}, {p}) stayed disconnected after 10000 samples; raise p"
            )));
        }
        GraphKind::Lollipop { clique, tail } => {
            require(clique >= 2, "lollipop needs clique >= 2")?;
            for u in 1..=clique {
                for v in (u + 1)..=clique {
                    edges.push((u, v, 1));
                }
            }
            for i in 0..tail {
                edges.push((clique + i, clique + i + 1, 1));
            }
        }
        GraphKind::Barbell { clique, bridge } => {
            require(clique >= 2, "barbell needs clique >= 2")?;
            let offset = clique + bridge;
            for u in 1..=clique {
                for v in (u + 1)..=clique {
                    edges.push((u, v, 1));
                    edges.push((offset + u, offset + v, 1));
                }
            }
            // Chain from the last node of clique A through the bridge to the
            // first node of clique B.
            for i in 0..=bridge {
                edges.push((clique + i, clique + i + 1, 1));
            }
        }
    }
    WeightedGraph::from_edges(n, 1, &edges)
}

/// Redraw every edge weight uniformly from `[1, w_max]`, deterministically in
/// `seed`. Edge order (sorted `(u, v)`) fixes the RNG stream.
pub fn randomize_weights(g: &WeightedGraph, w_max: u64, seed: u64) -> Result<WeightedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::util::mix64(seed ^ 0x77_1ed_9e5));
    let edges: Vec<(NodeId, NodeId, u64)> = g
        .edges()
        .into_iter()
        .map(|(u, v, _)| (u, v, rng.gen_range(1..=w_max)))
        .collect();
    WeightedGraph::from_edges(g.n(), w_max, &edges)
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(msg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: u32) -> WeightedGraph {
        generate(GraphKind::Path { n }, 0).unwrap()
    }

    #[test]
    fn path_profile_from_endpoint() {
        // On a 9-path the endpoint ball grows by one node per hop.
        let g = path(9);
        assert_eq!(
            g.neighborhood_profile(1),
            vec![1, 2, 3, 4, 5, 6, 7, 8, 9]
        );
        assert_eq!(g.hop_diameter(), 8);
    }

    #[test]
    fn clique_and_star_profiles() {
        let k10 = generate(GraphKind::Complete { n: 10 }, 0).unwrap();
        assert_eq!(k10.neighborhood_profile(1), vec![1, 10]);
        assert_eq!(k10.hop_diameter(), 1);

        let star = generate(GraphKind::Star { n: 10 }, 0).unwrap();
        assert_eq!(star.neighborhood_profile(1), vec![1, 10]);
        assert_eq!(star.neighborhood_profile(2), vec![1, 2, 10]);
        assert_eq!(star.hop_diameter(), 2);
    }

    #[test]
    fn grid_diameter() {
        let g = generate(GraphKind::Grid { rows: 5, cols: 5 }, 0).unwrap();
        assert_eq!(g.n(), 25);
        assert_eq!(g.hop_diameter(), 8);
    }

    #[test]
    fn weighted_distance_prefers_light_detour() {
        // Triangle with one heavy edge: going around is shorter.
        let g = WeightedGraph::from_edges(3, 5, &[(1, 2, 1), (2, 3, 1), (1, 3, 5)]).unwrap();
        let d = g.dijkstra(1);
        assert_eq!(d[ix(3)], 2);
        assert_eq!(d[ix(2)], 1);
    }

    #[test]
    fn hop_limited_distances_respect_the_limit() {
        let g = WeightedGraph::from_edges(3, 5, &[(1, 2, 1), (2, 3, 1), (1, 3, 5)]).unwrap();
        let d1 = g.hop_limited_distances(1, 1);
        assert_eq!(d1[ix(3)], 5); // direct heavy edge only
        let d2 = g.hop_limited_distances(1, 2);
        assert_eq!(d2[ix(3)], 2); // detour now allowed
        let d0 = g.hop_limited_distances(1, 0);
        assert_eq!(d0[ix(3)], u64::MAX);
    }

    #[test]
    fn lollipop_splits_clique_and_tail() {
        let g = generate(
            GraphKind::Lollipop {
                clique: 50,
                tail: 50,
            },
            7,
        )
        .unwrap();
        assert_eq!(g.n(), 100);
        assert_eq!(g.degree(1), 49);
        assert_eq!(g.degree(100), 1);
        assert_eq!(g.hop_eccentricity(100), 51);
    }

    #[test]
    fn barbell_shape() {
        let g = generate(
            GraphKind::Barbell {
                clique: 5,
                bridge: 4,
            },
            0,
        )
        .unwrap();
        assert_eq!(g.n(), 14);
        assert_eq!(g.degree(1), 4);
        assert_eq!(g.degree(6), 2); // bridge node
        assert_eq!(g.hop_diameter(), 7);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = generate(GraphKind::Grid { rows: 3, cols: 4 }, 0).unwrap();
        let text = g.to_edge_list();
        let h = parse_edge_list(&text).unwrap();
        assert_eq!(g.n(), h.n());
        assert_eq!(g.edges(), h.edges());
        assert_eq!(text, h.to_edge_list());
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        assert!(WeightedGraph::from_edges(3, 1, &[(1, 1, 1)]).is_err());
        assert!(WeightedGraph::from_edges(3, 1, &[(1, 2, 1), (1, 2, 1)]).is_err());
        assert!(WeightedGraph::from_edges(3, 1, &[(1, 2, 1)]).is_err()); // disconnected
        assert!(WeightedGraph::from_edges(3, 1, &[(1, 2, 1), (2, 3, 2)]).is_err()); // weight
        assert!(WeightedGraph::from_edges(3, 1, &[(1, 4, 1), (2, 3, 1)]).is_err()); // id range
    }

    #[test]
    fn random_graph_is_connected_and_deterministic() {
        let kind = GraphKind::Random {
            n: 40,
            p_millis: 150,
        };
        let a = generate(kind, 42).unwrap();
        let b = generate(kind, 42).unwrap();
        assert_eq!(a.edges(), b.edges());
        let c = generate(kind, 43).unwrap();
        assert!(a.n() == 40 && c.n() == 40);
    }

    #[test]
    fn randomized_weights_stay_in_range() {
        let g = path(20);
        let h = randomize_weights(&g, 9, 3).unwrap();
        assert!(h.edges().iter().all(|&(_, _, w)| (1..=9).contains(&w)));
        let h2 = randomize_weights(&g, 9, 3).unwrap();
        assert_eq!(h.edges(), h2.edges());
    }

    #[test]
    fn min_profile_is_pointwise_min() {
        let g = generate(
            GraphKind::Lollipop {
                clique: 5,
                tail: 5,
            },
            0,
        )
        .unwrap();
        let mins = g.min_neighborhood_profile();
        assert_eq!(mins[0], 1);
        // The tail end sees 1, 2, 3, ... which is the pointwise minimum here.
        assert_eq!(mins[1], 2);
        assert_eq!(mins[2], 3);
        assert_eq!(*mins.last().unwrap(), g.n() as u64);
    }
}
