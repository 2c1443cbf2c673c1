//! The (k, l)-shortest-paths pipeline: a distance phase (exact reference or
//! skeleton-approximate) followed by token routing of the results.
//!
//! Phase A makes every source learn its distance to every target: either a
//! multi-root Bellman-Ford over the local channel (exact, the stand-in for
//! the cited SSSP subroutines), or a sampled skeleton graph whose virtual
//! edges carry hop-limited distances. Phase B reuses the routing stack —
//! neighborhood quality, helper sets, plan, route — to deliver one token per
//! (source, target) pair, so its round count is the part the quality
//! parameter governs. Stretch is verified exactly against a centralized
//! oracle, and no reported distance may ever undercut the true one.

use crate::cluster::build_helper_sets;
use crate::constants::{ceil_log2, ln_n};
use crate::error::{Error, Result};
use crate::graph::{ix, NodeId, WeightedGraph};
use crate::nq::{nq_distributed, nq_oracle};
use crate::routing::{plan, route_tokens, DeliveryReport, Token};
use crate::sim::agg::{AggregateCore, SumU64};
use crate::sim::{run_engine, Ctx, ExecutionTrace, Msg, NodeProgram, SimConfig, StepStatus};
use crate::util::{derive_seed, node_rng, rat_parts};
use crate::Rat;
use rand::Rng;
use serde_json::json;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

const INF: u64 = u64::MAX;

/// How the distance phase runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    /// Distributed multi-root Bellman-Ford: exact, stretch 1.
    ExactReference,
    /// Sampled skeleton with parameter `x` (each node joins with
    /// probability `1/x`; targets always join).
    Skeleton { x: u64 },
}

/// How the target set was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Caller-supplied targets; count capped at `fixed_cap`.
    Fixed,
    /// Uniform draws with replacement (duplicates merged), recorded by seed.
    IidUniform { seed: u64 },
}

/// A (k, l)-shortest-paths problem instance.
#[derive(Debug, Clone)]
pub struct SPInstance {
    pub sources: Vec<NodeId>,
    pub targets: Vec<NodeId>,
    pub eps: Rat,
    pub mode: TargetMode,
    /// Cap on the fixed-mode target count (default `ceil(log2 n)^2`).
    pub fixed_cap: u64,
}

impl SPInstance {
    pub fn fixed(n: u32, sources: Vec<NodeId>, targets: Vec<NodeId>) -> Self {
        let m = ceil_log2(n as u64).max(1) as u64;
        SPInstance {
            sources,
            targets,
            eps: Rat::new(1, 10),
            mode: TargetMode::Fixed,
            fixed_cap: m * m,
        }
    }

    /// Draw `ell` targets uniformly (with replacement, then merged) and
    /// record the seed in the instance.
    pub fn iid(n: u32, sources: Vec<NodeId>, ell: u64, seed: u64) -> Self {
        let targets = sample_iid_targets(n, ell, seed);
        let mut inst = SPInstance::fixed(n, sources, targets);
        inst.mode = TargetMode::IidUniform { seed };
        inst
    }
}

/// Uniform target draws; duplicates merge into one target.
pub fn sample_iid_targets(n: u32, ell: u64, seed: u64) -> Vec<NodeId> {
    let mut rng = node_rng(seed, 0);
    let mut t: Vec<NodeId> = (0..ell).map(|_| rng.gen_range(1..=n)).collect();
    t.sort_unstable();
    t.dedup();
    t
}

const TAG_BF_DONE: u64 = 51;

#[derive(Debug, Clone)]
enum BfChannel {
    /// Relax over graph edges via the local channel.
    LocalGraph,
    /// Relax over virtual edges via the global channel (skeleton mode);
    /// `(neighbor, weight)` pairs, empty for non-members.
    GlobalVirtual(Vec<(NodeId, u64)>),
}

/// Multi-root Bellman-Ford: relax rounds alternate with a sum-aggregate of
/// "changed" flags; everyone halts after the first cycle with no change.
#[derive(Debug)]
struct BfProgram {
    node: NodeId,
    n: u32,
    channel: BfChannel,
    dist: Vec<u64>,
    pending: Vec<(u32, u64)>,
    changed: bool,
    cycle_len: u64,
    a_len: u64,
    agg: Option<AggregateCore<SumU64>>,
}

impl NodeProgram for BfProgram {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        let pos = (ctx.round - 1) % self.cycle_len;
        if pos == 0 {
            // Relax-send round: share entries improved in the last cycle.
            if !self.pending.is_empty() {
                let rows: Arc<Vec<(u32, u64)>> = Arc::new(std::mem::take(&mut self.pending));
                match &self.channel {
                    BfChannel::LocalGraph => {
                        let nbrs: Vec<NodeId> =
                            ctx.neighbors().iter().map(|&(u, _)| u).collect();
                        for u in nbrs {
                            ctx.send_local(u, Msg::Rows(rows.clone()));
                        }
                    }
                    BfChannel::GlobalVirtual(nbrs) => {
                        for &(u, _) in nbrs.clone().iter() {
                            ctx.send_global(u, Msg::Rows(rows.clone()));
                        }
                    }
                }
            }
            return StepStatus::again();
        }
        if pos == 1 {
            // Arrivals from the send round: relax.
            let mut updates: Vec<(NodeId, u32, u64)> = Vec::new();
            let inbox: Vec<(NodeId, Vec<(u32, u64)>)> = ctx
                .inbox_local()
                .iter()
                .chain(ctx.inbox_global().iter())
                .filter_map(|env| match &env.msg {
                    Msg::Rows(rows) => Some((env.src, rows.as_ref().clone())),
                    _ => None,
                })
                .collect();
            for (src, rows) in inbox {
                let w = match &self.channel {
                    BfChannel::LocalGraph => ctx.edge_weight(src).expect("message from non-neighbor"),
                    BfChannel::GlobalVirtual(nbrs) => {
                        nbrs.iter()
                            .find(|&&(u, _)| u == src)
                            .expect("virtual message from non-neighbor")
                            .1
                    }
                };
                for (j, d) in rows {
                    updates.push((src, j, d.saturating_add(w)));
                }
            }
            for (_, j, cand) in updates {
                let slot = &mut self.dist[j as usize];
                if cand < *slot {
                    *slot = cand;
                    self.pending.push((j, cand));
                    self.changed = true;
                }
            }
            self.pending.sort_unstable();
            self.pending.dedup_by_key(|e| e.0);
            self.agg = Some(AggregateCore::new(
                self.node,
                self.n,
                ctx.round,
                TAG_BF_DONE,
                SumU64(self.changed as u64),
            ));
            self.changed = false;
        }
        let agg = self.agg.as_mut().expect("termination aggregate missing");
        agg.on_round(ctx);
        if pos == 1 + self.a_len {
            let total = agg.result().expect("aggregate incomplete").0;
            self.agg = None;
            if total == 0 {
                return StepStatus::halt();
            }
        }
        StepStatus::again()
    }
}

fn run_bellman_ford(
    g: &WeightedGraph,
    roots: &[NodeId],
    channels: Vec<BfChannel>,
    cfg: &SimConfig,
) -> Result<(Vec<Vec<u64>>, ExecutionTrace)> {
    let n = g.n();
    let a_len = AggregateCore::<SumU64>::rounds(n);
    let cycle_len = a_len + 2;
    let root_index: BTreeMap<NodeId, u32> = roots
        .iter()
        .enumerate()
        .map(|(j, &r)| (r, j as u32))
        .collect();
    let programs: Vec<BfProgram> = (1..=n)
        .map(|v| {
            let mut dist = vec![INF; roots.len()];
            let mut pending = Vec::new();
            if let Some(&j) = root_index.get(&v) {
                dist[j as usize] = 0;
                pending.push((j, 0));
            }
            BfProgram {
                node: v,
                n,
                channel: channels[ix(v)].clone(),
                dist,
                pending,
                changed: false,
                cycle_len,
                a_len,
                agg: None,
            }
        })
        .collect();
    let (progs, trace) = run_engine(g, programs, cfg)?;
    Ok((progs.into_iter().map(|p| p.dist).collect(), trace))
}

/// Exact multi-root distances: every node ends with its distance to every
/// root (stretch 1). This is the reference distance phase; its rounds are
/// reported separately from the routing phase.
pub fn sssp_exact_reference(
    g: &WeightedGraph,
    roots: &[NodeId],
    cfg: &SimConfig,
) -> Result<(Vec<Vec<u64>>, ExecutionTrace)> {
    if roots.is_empty() {
        return Err(Error::validation("at least one root required"));
    }
    let channels = vec![BfChannel::LocalGraph; g.n() as usize];
    let (dist, trace) = run_bellman_ford(g, roots, channels, cfg)?;
    debug_assert!(dist.iter().all(|d| d.iter().all(|&x| x < INF)));
    Ok((dist, trace))
}

/// Sampled skeleton: nodes joined with probability `1/x` (plus forced
/// members), virtual edges weighted by `h`-hop-limited distances.
#[derive(Debug, Clone)]
pub struct SkeletonGraph {
    pub x: u64,
    pub h: u32,
    pub nodes: Vec<NodeId>,
    /// Edges `(u, v, w)` with `u < v`; `w = d_h(u, v)`.
    pub edges: Vec<(NodeId, NodeId, u64)>,
}

impl SkeletonGraph {
    fn adjacency(&self) -> BTreeMap<NodeId, Vec<(NodeId, u64)>> {
        let mut adj: BTreeMap<NodeId, Vec<(NodeId, u64)>> = BTreeMap::new();
        for &v in &self.nodes {
            adj.entry(v).or_default();
        }
        for &(u, v, w) in &self.edges {
            adj.get_mut(&u).unwrap().push((v, w));
            adj.get_mut(&v).unwrap().push((u, w));
        }
        adj
    }

    /// Single-source distances within the skeleton.
    pub fn distances_from(&self, src: NodeId) -> BTreeMap<NodeId, u64> {
        let adj = self.adjacency();
        let mut dist: BTreeMap<NodeId, u64> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(src, 0);
        heap.push(Reverse((0u64, src)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if dist.get(&v).copied().unwrap_or(INF) < d {
                continue;
            }
            for &(u, w) in &adj[&v] {
                let cand = d + w;
                if cand < dist.get(&u).copied().unwrap_or(INF) {
                    dist.insert(u, cand);
                    heap.push(Reverse((cand, u)));
                }
            }
        }
        dist
    }
}

#[derive(Debug)]
struct ExploreProgram {
    h: u32,
    best: BTreeMap<NodeId, u64>,
    pending: Vec<(u32, u64)>,
}

impl NodeProgram for ExploreProgram {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        // Hop-limited relaxation: after r send rounds every node holds the
        // shortest distance over paths of at most r edges to each root.
        let mut updates: Vec<(u32, u64)> = Vec::new();
        let inbox: Vec<(NodeId, Vec<(u32, u64)>)> = ctx
            .inbox_local()
            .iter()
            .filter_map(|env| match &env.msg {
                Msg::Rows(rows) => Some((env.src, rows.as_ref().clone())),
                _ => None,
            })
            .collect();
        for (src, rows) in inbox {
            let w = ctx.edge_weight(src).expect("message from non-neighbor");
            for (root, d) in rows {
                updates.push((root, d.saturating_add(w)));
            }
        }
        for (root, cand) in updates {
            let slot = self.best.entry(root).or_insert(INF);
            if cand < *slot {
                *slot = cand;
                self.pending.push((root, cand));
            }
        }
        self.pending.sort_unstable();
        self.pending.dedup_by_key(|e| e.0);
        if ctx.round <= self.h as u64 {
            if !self.pending.is_empty() {
                let rows: Arc<Vec<(u32, u64)>> = Arc::new(std::mem::take(&mut self.pending));
                let nbrs: Vec<NodeId> = ctx.neighbors().iter().map(|&(u, _)| u).collect();
                for u in nbrs {
                    ctx.send_local(u, Msg::Rows(rows.clone()));
                }
            }
            StepStatus::again()
        } else {
            StepStatus::halt()
        }
    }
}

/// Hop radius used by skeleton exploration: `ceil(c * x * ln n)`.
pub fn skeleton_radius(x: u64, n: u32, c: u32) -> u32 {
    ((c as f64) * (x as f64) * ln_n(n)).ceil() as u32
}

/// Build a skeleton. Every node self-samples with probability `1/x`
/// (`force` members always join), then `h` rounds of local exploration
/// discover the virtual edges. Also returns each node's hop-limited
/// distance map to the sampled nodes (needed downstream).
pub fn skeleton_build(
    g: &WeightedGraph,
    x: u64,
    force: &[NodeId],
    cfg: &SimConfig,
) -> Result<(SkeletonGraph, Vec<BTreeMap<NodeId, u64>>, ExecutionTrace)> {
    if x < 1 {
        return Err(Error::validation("sampling parameter x must be >= 1"));
    }
    let n = g.n();
    let h = skeleton_radius(x, n, cfg.whp_exponent);
    let mut sampled: BTreeSet<NodeId> = force.iter().copied().collect();
    for v in g.nodes() {
        let mut rng = node_rng(derive_seed(cfg.seed, 61), v);
        if x == 1 || rng.gen_range(0..x) == 0 {
            sampled.insert(v);
        }
    }
    let programs: Vec<ExploreProgram> = (1..=n)
        .map(|v| {
            let mut p = ExploreProgram {
                h,
                best: BTreeMap::new(),
                pending: Vec::new(),
            };
            if sampled.contains(&v) {
                p.best.insert(v, 0);
                p.pending.push((v, 0));
            }
            p
        })
        .collect();
    let (progs, trace) = run_engine(g, programs, cfg)?;
    let explore: Vec<BTreeMap<NodeId, u64>> = progs.into_iter().map(|p| p.best).collect();

    let mut edges: Vec<(NodeId, NodeId, u64)> = Vec::new();
    for &u in &sampled {
        for (&v, &w) in &explore[ix(u)] {
            if sampled.contains(&v) && u < v {
                debug_assert_eq!(explore[ix(v)].get(&u), Some(&w));
                edges.push((u, v, w));
            }
        }
    }
    Ok((
        SkeletonGraph {
            x,
            h,
            nodes: sampled.into_iter().collect(),
            edges,
        },
        explore,
        trace,
    ))
}

/// Check that skeleton distances equal true distances for every sampled
/// pair (the property the sampling radius is sized for).
pub fn verify_skeleton(g: &WeightedGraph, sk: &SkeletonGraph) -> bool {
    for &u in &sk.nodes {
        let d_true = g.dijkstra(u);
        let d_sk = sk.distances_from(u);
        for &v in &sk.nodes {
            if d_sk.get(&v).copied().unwrap_or(INF) != d_true[ix(v)] {
                return false;
            }
        }
    }
    true
}

#[derive(Debug)]
struct FloodProgram {
    h: u32,
    known: BTreeMap<u32, Vec<(u32, u64)>>,
    fresh: Vec<u32>,
}

impl NodeProgram for FloodProgram {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        let mut incoming: Vec<(u32, u32, u64)> = Vec::new();
        for env in ctx.inbox_local() {
            if let Msg::Rows3(rows) = &env.msg {
                incoming.extend(rows.iter().copied());
            }
        }
        for (a, j, d) in incoming {
            if !self.known.contains_key(&a) {
                self.fresh.push(a);
            }
            self.known.entry(a).or_default().push((j, d));
        }
        for rows in self.known.values_mut() {
            rows.sort_unstable();
            rows.dedup();
        }
        self.fresh.sort_unstable();
        self.fresh.dedup();
        if ctx.round <= self.h as u64 {
            if !self.fresh.is_empty() {
                let mut rows: Vec<(u32, u32, u64)> = Vec::new();
                for a in std::mem::take(&mut self.fresh) {
                    for &(j, d) in &self.known[&a] {
                        rows.push((a, j, d));
                    }
                }
                let rows = Arc::new(rows);
                let nbrs: Vec<NodeId> = ctx.neighbors().iter().map(|&(u, _)| u).collect();
                for u in nbrs {
                    ctx.send_local(u, Msg::Rows3(rows.clone()));
                }
            }
            StepStatus::again()
        } else {
            StepStatus::halt()
        }
    }
}

/// Result of a full (k, l)-SP run.
#[derive(Debug, Clone)]
pub struct SpResult {
    /// `(target, source) -> reported distance`.
    pub labels: BTreeMap<(NodeId, NodeId), u64>,
    pub stretch: Rat,
    pub nq: Rat,
    pub rounds_phase_a: u64,
    pub rounds_phase_b: u64,
    pub report: DeliveryReport,
}

impl SpResult {
    pub fn to_json(&self) -> serde_json::Value {
        let (sn, sd) = rat_parts(self.stretch);
        json!({
            "labels": self.labels.iter().map(|(&(t, s), &d)| json!([t, s, d, 1u64])).collect::<Vec<_>>(),
            "stretch_num": sn,
            "stretch_den": sd,
            "rounds_phaseA": self.rounds_phase_a,
            "rounds_phaseB": self.rounds_phase_b,
        })
    }
}

/// Exact maximum of `reported / true` over all (source, target) pairs; also
/// rejects any label below the true distance. Pairs with `s == t` must
/// report zero and do not contribute a ratio.
pub fn stretch_of(
    g: &WeightedGraph,
    labels: &BTreeMap<(NodeId, NodeId), u64>,
    sources: &[NodeId],
    targets: &[NodeId],
) -> Result<Rat> {
    let mut worst = Rat::from_integer(1);
    for &t in targets {
        let dist = g.dijkstra(t);
        for &s in sources {
            let d_true = dist[ix(s)];
            let &d_rep = labels
                .get(&(t, s))
                .ok_or_else(|| Error::validation(format!("missing label for ({t}, {s})")))?;
            if d_true == 0 {
                if d_rep != 0 {
                    return Err(Error::validation(format!(
                        "nonzero self-distance {d_rep} reported for node {t}"
                    )));
                }
                continue;
            }
            if d_rep < d_true {
                return Err(Error::validation(format!(
                    "label ({t}, {s}) = {d_rep} undercuts the true distance {d_true}"
                )));
            }
            worst = worst.max(Rat::new(d_rep as i128, d_true as i128));
        }
    }
    Ok(worst)
}

/// Solve the instance end to end. Phase A computes per-source distance
/// estimates (exact or skeleton); phase B computes the quality parameter
/// distributedly, builds helper sets, and routes one token per (source,
/// target). Returns the labels collected at the targets, the measured
/// stretch, and the phase round counts.
pub fn solve_k_ell_sp(
    g: &WeightedGraph,
    instance: &SPInstance,
    gamma: u64,
    dist_mode: DistanceMode,
    cfg: &SimConfig,
) -> Result<(SpResult, ExecutionTrace)> {
    let n = g.n();
    let sources = &instance.sources;
    let targets = &instance.targets;
    let src_set: BTreeSet<NodeId> = sources.iter().copied().collect();
    if sources.is_empty() || src_set.len() != sources.len() {
        return Err(Error::validation("sources must be distinct and nonempty"));
    }
    if targets.is_empty() {
        return Err(Error::validation("at least one target required"));
    }
    for &v in sources.iter().chain(targets.iter()) {
        if v < 1 || v > n {
            return Err(Error::validation(format!("node id {v} outside 1..={n}")));
        }
    }
    let k = sources.len() as u64;
    let ell = targets.len() as u64;
    if instance.eps <= Rat::from_integer(0) {
        return Err(Error::validation("eps must be positive"));
    }

    // Target-set admission per mode.
    let oracle = nq_oracle(g, k, gamma)?;
    match instance.mode {
        TargetMode::Fixed => {
            if ell > instance.fixed_cap {
                return Err(Error::InstanceRejected(format!(
                    "{ell} fixed targets exceed the cap of {}",
                    instance.fixed_cap
                )));
            }
        }
        TargetMode::IidUniform { .. } => {
            if Rat::from_integer(ell as i128) > oracle.value {
                return Err(Error::InstanceRejected(format!(
                    "{ell} random targets exceed the neighborhood quality {}",
                    oracle.value
                )));
            }
        }
    }

    // ---- Phase A: distances from every node to every target. ----
    let mut trace_a;
    // d_tilde[si][j] = estimate from sources[si] to targets[j].
    let mut d_tilde: Vec<Vec<u64>> = vec![vec![INF; ell as usize]; sources.len()];
    match dist_mode {
        DistanceMode::ExactReference => {
            let (dist, tr) = sssp_exact_reference(g, targets, &cfg.with_seed(derive_seed(cfg.seed, 71)))?;
            trace_a = tr;
            for (si, &s) in sources.iter().enumerate() {
                for j in 0..ell as usize {
                    d_tilde[si][j] = dist[ix(s)][j];
                }
            }
        }
        DistanceMode::Skeleton { x } => {
            let (sk, explore, tr) =
                skeleton_build(g, x, targets, &cfg.with_seed(derive_seed(cfg.seed, 72)))?;
            trace_a = tr;
            // Virtual-edge Bellman-Ford from the targets, over the global
            // channel between skeleton members.
            let member: BTreeSet<NodeId> = sk.nodes.iter().copied().collect();
            let channels: Vec<BfChannel> = (1..=n)
                .map(|v| {
                    if member.contains(&v) {
                        BfChannel::GlobalVirtual(
                            explore[ix(v)]
                                .iter()
                                .filter(|&(&a, _)| member.contains(&a) && a != v)
                                .map(|(&a, &w)| (a, w))
                                .collect(),
                        )
                    } else {
                        BfChannel::GlobalVirtual(Vec::new())
                    }
                })
                .collect();
            let (sk_dist, tr2) =
                run_bellman_ford(g, targets, channels, &cfg.with_seed(derive_seed(cfg.seed, 73)))?;
            trace_a.extend(&tr2);
            // Flood each member's target-distance vector h hops so every
            // node can combine it with its own hop-limited distances.
            let programs: Vec<FloodProgram> = (1..=n)
                .map(|v| {
                    let mut p = FloodProgram {
                        h: sk.h,
                        known: BTreeMap::new(),
                        fresh: Vec::new(),
                    };
                    if member.contains(&v) {
                        let rows: Vec<(u32, u64)> = (0..ell as u32)
                            .filter(|&j| sk_dist[ix(v)][j as usize] < INF)
                            .map(|j| (j, sk_dist[ix(v)][j as usize]))
                            .collect();
                        p.known.insert(v, rows);
                        p.fresh.push(v);
                    }
                    p
                })
                .collect();
            let (progs, tr3) = run_engine(g, programs, &cfg.with_seed(derive_seed(cfg.seed, 74)))?;
            trace_a.extend(&tr3);
            for (si, &s) in sources.iter().enumerate() {
                let near = &explore[ix(s)];
                let vectors = &progs[ix(s)].known;
                for j in 0..ell as usize {
                    let mut best = INF;
                    for (&a, &dha) in near {
                        if let Some(rows) = vectors.get(&a) {
                            if let Some(&(_, dsa)) =
                                rows.iter().find(|&&(jj, _)| jj as usize == j)
                            {
                                best = best.min(dha.saturating_add(dsa));
                            }
                        }
                    }
                    d_tilde[si][j] = best;
                }
            }
        }
    }
    for (si, row) in d_tilde.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            if d == INF {
                return Err(Error::validation(format!(
                    "phase A left source {} with no estimate for target {}",
                    sources[si], targets[j]
                )));
            }
        }
    }

    // ---- Phase B: quality parameter, helpers, plan, route. ----
    let (nq_rep, mut trace_b) = nq_distributed(g, k, gamma, &cfg.with_seed(derive_seed(cfg.seed, 81)))?;
    debug_assert_eq!(nq_rep.value, oracle.value);
    let (family, tr) = build_helper_sets(
        g,
        targets,
        k,
        gamma,
        nq_rep.value,
        &cfg.with_seed(derive_seed(cfg.seed, 82)),
    )?;
    trace_b.extend(&tr);
    let (routing_plan, tr2) = plan(
        g,
        sources,
        targets,
        k,
        gamma,
        &family,
        &cfg.with_seed(derive_seed(cfg.seed, 83)),
    )?;
    trace_b.extend(&tr2);
    let mut tokens: Vec<Token> = Vec::with_capacity(sources.len() * ell as usize);
    for (si, &s) in sources.iter().enumerate() {
        for j in 1..=ell {
            tokens.push(Token {
                source: s,
                target_index: j,
                payload: d_tilde[si][(j - 1) as usize],
            });
        }
    }
    let (report, tr3) = route_tokens(g, &routing_plan, &tokens, &cfg.with_seed(derive_seed(cfg.seed, 84)))?;
    trace_b.extend(&tr3);

    let mut labels: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    for (&t, set) in &report.delivered {
        for &(s, d) in set {
            labels.insert((t, s), d);
        }
    }
    let stretch = stretch_of(g, &labels, sources, targets)?;
    if dist_mode == DistanceMode::ExactReference && stretch != Rat::from_integer(1) {
        return Err(Error::validation(format!(
            "exact mode produced stretch {stretch}"
        )));
    }

    let rounds_phase_a = trace_a.totals.combined_rounds;
    let rounds_phase_b = trace_b.totals.combined_rounds;
    let mut trace = trace_a;
    trace.extend(&trace_b);
    Ok((
        SpResult {
            labels,
            stretch,
            nq: nq_rep.value,
            rounds_phase_a,
            rounds_phase_b,
            report,
        },
        trace,
    ))
}

/// Centralized S x T distance oracle for equivalence tests.
pub fn exact_sp_oracle(
    g: &WeightedGraph,
    sources: &[NodeId],
    targets: &[NodeId],
) -> BTreeMap<(NodeId, NodeId), u64> {
    let mut out = BTreeMap::new();
    for &t in targets {
        let dist = g.dijkstra(t);
        for &s in sources {
            out.insert((t, s), dist[ix(s)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, randomize_weights, GraphKind};

    #[test]
    fn reference_bf_on_tiny_path() {
        let g = generate(GraphKind::Path { n: 3 }, 0).unwrap();
        let (dist, trace) =
            sssp_exact_reference(&g, &[1], &SimConfig::new(8, 0)).unwrap();
        assert_eq!(dist[ix(3)][0], 2);
        assert!(trace.totals.local_rounds >= 2);
    }

    #[test]
    fn reference_bf_prefers_light_detour() {
        let g = WeightedGraph::from_edges(3, 5, &[(1, 2, 1), (2, 3, 1), (1, 3, 5)]).unwrap();
        let (dist, _) = sssp_exact_reference(&g, &[1], &SimConfig::new(8, 0)).unwrap();
        assert_eq!(dist[ix(3)][0], 2);
    }

    #[test]
    fn reference_bf_matches_dijkstra_on_weighted_grid() {
        let g = generate(GraphKind::Grid { rows: 5, cols: 5 }, 0).unwrap();
        let g = randomize_weights(&g, 9, 4).unwrap();
        let roots = [3, 14, 25];
        let (dist, _) = sssp_exact_reference(&g, &roots, &SimConfig::new(8, 0)).unwrap();
        for (j, &r) in roots.iter().enumerate() {
            let want = g.dijkstra(r);
            for v in g.nodes() {
                assert_eq!(dist[ix(v)][j], want[ix(v)], "root {r} node {v}");
            }
        }
    }

    #[test]
    fn full_sampling_skeleton_is_exact() {
        let g = generate(GraphKind::Grid { rows: 4, cols: 4 }, 0).unwrap();
        let g = randomize_weights(&g, 5, 7).unwrap();
        let (sk, _, _) = skeleton_build(&g, 1, &[], &SimConfig::new(8, 3)).unwrap();
        assert_eq!(sk.nodes.len(), 16);
        assert!(verify_skeleton(&g, &sk));
        // Every real edge appears with its exact weight.
        for (u, v, w) in g.edges() {
            assert!(sk
                .edges
                .iter()
                .any(|&(a, b, ww)| (a, b) == (u, v) && ww <= w));
        }
    }

    #[test]
    fn unit_path_skeleton_pairs_are_exact() {
        let g = generate(GraphKind::Path { n: 100 }, 0).unwrap();
        for seed in [1, 2, 3] {
            let (sk, _, _) = skeleton_build(&g, 10, &[], &SimConfig::new(8, seed)).unwrap();
            for &u in &sk.nodes {
                let d = sk.distances_from(u);
                for &v in &sk.nodes {
                    assert_eq!(
                        d.get(&v).copied(),
                        Some((u as i64 - v as i64).unsigned_abs()),
                        "pair ({u}, {v}) seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn solve_exact_on_path_delivers_distance() {
        let g = generate(GraphKind::Path { n: 10 }, 0).unwrap();
        let inst = SPInstance::fixed(10, vec![10], vec![1]);
        let (res, _) =
            solve_k_ell_sp(&g, &inst, 8, DistanceMode::ExactReference, &SimConfig::new(8, 5))
                .unwrap();
        assert_eq!(res.labels[&(1, 10)], 9);
        assert_eq!(res.stretch, Rat::from_integer(1));
    }

    #[test]
    fn solve_exact_matches_oracle_on_weighted_grid() {
        let g = generate(GraphKind::Grid { rows: 6, cols: 6 }, 0).unwrap();
        let g = randomize_weights(&g, 7, 11).unwrap();
        let sources: Vec<NodeId> = (29..=36).collect();
        let targets = vec![1, 8];
        let inst = SPInstance::fixed(36, sources.clone(), targets.clone());
        let (res, _) =
            solve_k_ell_sp(&g, &inst, 4, DistanceMode::ExactReference, &SimConfig::new(4, 9))
                .unwrap();
        assert_eq!(res.labels, exact_sp_oracle(&g, &sources, &targets));
        assert!(res.rounds_phase_a > 0 && res.rounds_phase_b > 0);
    }

    #[test]
    fn solve_skeleton_on_unit_path_keeps_stretch_one() {
        let g = generate(GraphKind::Path { n: 60 }, 0).unwrap();
        let inst = SPInstance::fixed(60, vec![55, 60], vec![3]);
        let (res, _) = solve_k_ell_sp(
            &g,
            &inst,
            8,
            DistanceMode::Skeleton { x: 5 },
            &SimConfig::new(8, 13),
        )
        .unwrap();
        assert_eq!(res.stretch, Rat::from_integer(1));
        assert_eq!(res.labels[&(3, 60)], 57);
    }

    #[test]
    fn fixed_mode_rejects_oversized_target_sets() {
        let g = generate(GraphKind::Path { n: 8 }, 0).unwrap();
        let mut inst = SPInstance::fixed(8, vec![8], vec![1, 2, 3]);
        inst.fixed_cap = 2;
        let err = solve_k_ell_sp(
            &g,
            &inst,
            8,
            DistanceMode::ExactReference,
            &SimConfig::new(8, 1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InstanceRejected(_)));
    }

    #[test]
    fn iid_mode_rejects_more_targets_than_quality() {
        // k = gamma makes the quality parameter exactly 1.
        let g = generate(GraphKind::Path { n: 16 }, 0).unwrap();
        let inst = SPInstance::iid(16, vec![15, 16, 14, 13], 2, 99);
        if inst.targets.len() >= 2 {
            let err = solve_k_ell_sp(
                &g,
                &inst,
                4,
                DistanceMode::ExactReference,
                &SimConfig::new(4, 1),
            )
            .unwrap_err();
            assert!(matches!(err, Error::InstanceRejected(_)));
        }
    }

    #[test]
    fn stretch_oracle_flags_bad_labels() {
        let g = generate(GraphKind::Path { n: 5 }, 0).unwrap();
        let mut labels = exact_sp_oracle(&g, &[5], &[1]);
        assert_eq!(stretch_of(&g, &labels, &[5], &[1]).unwrap(), Rat::from_integer(1));
        labels.insert((1, 5), 8); // doubled
        assert_eq!(
            stretch_of(&g, &labels, &[5], &[1]).unwrap(),
            Rat::from_integer(2)
        );
        labels.insert((1, 5), 3); // undercut
        assert!(stretch_of(&g, &labels, &[5], &[1]).is_err());
        labels.remove(&(1, 5));
        assert!(stretch_of(&g, &labels, &[5], &[1]).is_err());
    }

    #[test]
    fn iid_sampling_is_deterministic_and_merged() {
        let a = sample_iid_targets(100, 8, 42);
        let b = sample_iid_targets(100, 8, 42);
        assert_eq!(a, b);
        assert!(a.len() <= 8 && !a.is_empty());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }
}
