//! Deterministic ruling sets, nearest-ruler clustering, and randomized
//! helper sets.
//!
//! A receiver that must absorb `k` tokens through a `gamma`-bit straw wants
//! its cluster to share the load: the *helper set* of a target `w` is a
//! random subset of `w`'s cluster, sized so that (token count) / (helpers *
//! gamma) rounds of global traffic suffice, while every cluster stays within
//! `O(NQ log n)` hops of its members so local collection stays cheap.
//!
//! The pipeline is: [`ruling_set`] computes an independent-at-distance-`alpha`
//! node set by processing id bits (each stage floods `alpha - 1` hops and
//! eliminates half the candidate classes); [`cluster_nearest_ruler`] grows
//! BFS trees from all rulers at once; [`build_helper_sets`] runs two
//! convergecast/broadcast sweeps over those trees so every cluster member
//! learns its cluster roster, samples helper memberships, and learns the
//! complete helper lists.

use crate::constants::{ceil_log2, ln_n, HELPER_LOWER_FACTOR, HELPER_OVERSAMPLE_FACTOR, MEMBERSHIP_CAP_FACTOR};
use crate::error::{Error, Result};
use crate::graph::{ix, NodeId, WeightedGraph};
use crate::sim::{run_engine, Ctx, ExecutionTrace, Msg, NodeProgram, SimConfig, StepStatus};
use crate::util::{rat_ceil_u64, rat_parts};
use crate::Rat;
use rand::Rng;
use serde::Serialize;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// Nodes pairwise at hop distance `>= alpha`, with every node within
/// `alpha * ceil(log2 n)` hops of some member.
#[derive(Debug, Clone)]
pub struct RulingSet {
    pub alpha: u32,
    pub rulers: Vec<NodeId>,
}

/// Cluster radius bound for a ruling parameter.
pub fn coverage_bound(alpha: u32, n: u32) -> u32 {
    alpha * ceil_log2(n as u64).max(1)
}

/// Ruling parameter used by helper sets: `2 * ceil(NQ) + 1`, so that the
/// radius-`ceil(NQ)` ball around each ruler belongs to its own cluster.
pub fn helper_alpha(nq: Rat) -> u32 {
    2 * rat_ceil_u64(nq) as u32 + 1
}

#[derive(Debug)]
struct RulingProgram {
    node: NodeId,
    alpha: u32,
    stages: u32,
    active: bool,
    covered: bool,
    forwarded: bool,
}

impl RulingProgram {
    /// Stage `s` (1-based) occupies rounds `[(s-1)*alpha + 1, s*alpha]`:
    /// `alpha - 1` flood rounds plus one settling round.
    fn stage_of(&self, round: u64) -> (u32, u32) {
        let a = self.alpha as u64;
        let s = ((round - 1) / a + 1) as u32;
        let t = ((round - 1) % a + 1) as u32;
        (s, t)
    }
}

impl NodeProgram for RulingProgram {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        let (stage, t) = self.stage_of(ctx.round);
        let freshly_marked = !ctx.inbox_local().is_empty() && !self.covered;
        if freshly_marked {
            self.covered = true;
        }

        if t == 1 {
            // Stage opening: class-0 candidates are this stage's sources.
            let bit = (self.node as u64 - 1) >> (stage - 1) & 1;
            if self.active && bit == 0 {
                self.covered = true;
                self.forwarded = true;
                let targets: Vec<NodeId> = ctx.neighbors().iter().map(|&(u, _)| u).collect();
                for u in targets {
                    ctx.send_local(u, Msg::Fields(vec![stage as u64]));
                }
            }
        } else if freshly_marked && t < self.alpha && !self.forwarded {
            // Forward the mark while the flood window is open.
            self.forwarded = true;
            let targets: Vec<NodeId> = ctx.neighbors().iter().map(|&(u, _)| u).collect();
            for u in targets {
                ctx.send_local(u, Msg::Fields(vec![stage as u64]));
            }
        }

        if t == self.alpha as u32 {
            // Stage close: covered class-1 candidates are ruled out.
            let bit = (self.node as u64 - 1) >> (stage - 1) & 1;
            if self.active && bit == 1 && self.covered {
                self.active = false;
            }
            self.covered = false;
            self.forwarded = false;
            if stage == self.stages {
                return StepStatus::halt();
            }
        }
        StepStatus::again()
    }
}

/// Compute a ruling set distributedly. `alpha = 1` returns all nodes with no
/// traffic; otherwise the run costs `alpha * ceil(log2 n)` rounds, all local.
pub fn ruling_set(
    g: &WeightedGraph,
    alpha: u32,
    cfg: &SimConfig,
) -> Result<(RulingSet, ExecutionTrace)> {
    if alpha < 1 {
        return Err(Error::validation("alpha must be at least 1"));
    }
    let n = g.n();
    if alpha == 1 || n == 1 {
        let rulers = if alpha == 1 {
            g.nodes().collect()
        } else {
            vec![1]
        };
        return Ok((
            RulingSet { alpha, rulers },
            ExecutionTrace::new(n, cfg.gamma, cfg.seed, crate::constants::audit_exempt(cfg.gamma, n)),
        ));
    }
    let stages = ceil_log2(n as u64).max(1);
    let programs: Vec<RulingProgram> = (1..=n)
        .map(|v| RulingProgram {
            node: v,
            alpha,
            stages,
            active: true,
            covered: false,
            forwarded: false,
        })
        .collect();
    let (progs, trace) = run_engine(g, programs, cfg)?;
    let rulers: Vec<NodeId> = progs
        .iter()
        .filter(|p| p.active)
        .map(|p| p.node)
        .collect();
    debug_assert!(!rulers.is_empty());
    Ok((RulingSet { alpha, rulers }, trace))
}

/// Nearest-ruler clustering: assignment, hop distance, and the BFS forest
/// (parents point toward the ruler).
#[derive(Debug, Clone)]
pub struct Clustering {
    pub alpha: u32,
    /// Guaranteed upper bound on any node's hop distance to its ruler.
    pub beta_bound: u32,
    pub rulers: Vec<NodeId>,
    /// `ruler_of[ix(v)]`: the ruler whose cluster `v` joined.
    pub ruler_of: Vec<NodeId>,
    /// `hop[ix(v)]`: hop distance from `v` to its ruler.
    pub hop: Vec<u32>,
    /// BFS-tree parent (toward the ruler); `None` exactly for rulers.
    pub parent: Vec<Option<NodeId>>,
    /// BFS-tree children.
    pub children: Vec<Vec<NodeId>>,
    /// Deepest observed cluster node.
    pub max_depth: u32,
}

impl Clustering {
    /// Members of each cluster, keyed by ruler.
    pub fn members(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut map: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (i, &r) in self.ruler_of.iter().enumerate() {
            map.entry(r).or_default().push(i as NodeId + 1);
        }
        map
    }

    /// For every node, the map `descendant -> child` used to route down its
    /// subtree (the node itself excluded).
    pub fn route_tables(&self) -> Vec<BTreeMap<NodeId, NodeId>> {
        let n = self.ruler_of.len();
        let mut tables: Vec<BTreeMap<NodeId, NodeId>> = vec![BTreeMap::new(); n];
        // Process nodes by decreasing depth so child tables are complete.
        let mut order: Vec<NodeId> = (1..=n as u32).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(self.hop[ix(v)]));
        for v in order {
            if let Some(p) = self.parent[ix(v)] {
                let mut sub: Vec<NodeId> = vec![v];
                sub.extend(tables[ix(v)].keys().copied());
                for d in sub {
                    tables[ix(p)].insert(d, v);
                }
            }
        }
        tables
    }
}

const TAG_CLAIM: u64 = 11;
const TAG_CHILD: u64 = 12;

#[derive(Debug)]
struct ClusterProgram {
    node: NodeId,
    is_ruler: bool,
    window: u32,
    best: Option<NodeId>,
    hop: u32,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
}

impl NodeProgram for ClusterProgram {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        let t = ctx.round;
        let w = self.window as u64;
        if t <= w + 1 {
            // Flood window: first arrivals fix distance and ruler.
            if self.best.is_none() {
                if self.is_ruler {
                    self.best = Some(self.node);
                    self.hop = 0;
                } else {
                    let mut claim: Option<(NodeId, NodeId)> = None; // (ruler, sender)
                    for env in ctx.inbox_local() {
                        if let Some(f) = env.msg.as_fields() {
                            if f.first() == Some(&TAG_CLAIM) {
                                let ruler = f[1] as NodeId;
                                if claim.map_or(true, |(r, s)| (ruler, env.src) < (r, s)) {
                                    claim = Some((ruler, env.src));
                                }
                            }
                        }
                    }
                    if let Some((ruler, sender)) = claim {
                        self.best = Some(ruler);
                        self.hop = (t - 1) as u32;
                        self.parent = Some(sender);
                    }
                }
                // Newly settled nodes forward their claim immediately.
                if let Some(rid) = self.best {
                    if t <= w {
                        let payload = Msg::Fields(vec![TAG_CLAIM, rid as u64]);
                        let targets: Vec<NodeId> =
                            ctx.neighbors().iter().map(|&(u, _)| u).collect();
                        for u in targets {
                            ctx.send_local(u, payload.clone());
                        }
                    }
                }
            }
            StepStatus::sleep_until(if t < w + 2 { w + 2 } else { t + 1 })
        } else if t == w + 2 {
            assert!(
                self.best.is_some(),
                "node {} unreachable from every ruler within the coverage bound",
                self.node
            );
            if let Some(p) = self.parent {
                ctx.send_local(p, Msg::Fields(vec![TAG_CHILD]));
            }
            StepStatus::again()
        } else {
            for env in ctx.inbox_local() {
                if env.msg.as_fields().map(|f| f.first()) == Some(Some(&TAG_CHILD)) {
                    self.children.push(env.src);
                }
            }
            self.children.sort_unstable();
            StepStatus::halt()
        }
    }
}

/// Grow BFS clusters around the rulers; ties go to the smallest ruler id,
/// then the smallest parent id. Costs `O(alpha log n)` local rounds.
pub fn cluster_nearest_ruler(
    g: &WeightedGraph,
    ruling: &RulingSet,
    cfg: &SimConfig,
) -> Result<(Clustering, ExecutionTrace)> {
    let n = g.n();
    let beta_bound = coverage_bound(ruling.alpha, n);
    let ruler_set: BTreeSet<NodeId> = ruling.rulers.iter().copied().collect();
    let window = beta_bound.max(1);
    let programs: Vec<ClusterProgram> = (1..=n)
        .map(|v| ClusterProgram {
            node: v,
            is_ruler: ruler_set.contains(&v),
            window,
            best: None,
            hop: 0,
            parent: None,
            children: Vec::new(),
        })
        .collect();
    let (progs, trace) = run_engine(g, programs, cfg)?;
    let mut clustering = Clustering {
        alpha: ruling.alpha,
        beta_bound,
        rulers: ruling.rulers.clone(),
        ruler_of: vec![0; n as usize],
        hop: vec![0; n as usize],
        parent: vec![None; n as usize],
        children: vec![Vec::new(); n as usize],
        max_depth: 0,
    };
    for p in progs {
        let i = ix(p.node);
        clustering.ruler_of[i] = p.best.expect("unassigned node");
        clustering.hop[i] = p.hop;
        clustering.parent[i] = p.parent;
        clustering.children[i] = p.children;
        clustering.max_depth = clustering.max_depth.max(p.hop);
    }
    debug_assert!(clustering.max_depth <= beta_bound);
    Ok((clustering, trace))
}

/// Helper sets for a target list: per target `w`, a random subset of `w`'s
/// cluster that every cluster member knows in full.
#[derive(Debug, Clone)]
pub struct HelperFamily {
    pub targets: Vec<NodeId>,
    pub k: u64,
    pub gamma: u64,
    /// Neighborhood quality the sampling rate was derived from.
    pub nq: Rat,
    pub alpha: u32,
    pub clustering: Clustering,
    /// `w -> sorted helper ids`.
    pub sets: BTreeMap<NodeId, Vec<NodeId>>,
    /// `w -> membership probability used in its cluster`.
    pub q_used: BTreeMap<NodeId, f64>,
    /// Per-node `descendant -> child` routing tables learned during the
    /// convergecasts (index `ix(v)`).
    pub route_tables: Vec<BTreeMap<NodeId, NodeId>>,
}

impl HelperFamily {
    /// Deterministic JSON export: targets with their helper lists and
    /// sampling rates.
    pub fn to_json(&self) -> serde_json::Value {
        let (nq_num, nq_den) = rat_parts(self.nq);
        json!({
            "k": self.k,
            "gamma": self.gamma,
            "nq_num": nq_num,
            "nq_den": nq_den,
            "alpha": self.alpha,
            "beta_bound": self.clustering.beta_bound,
            "rulers": self.clustering.rulers,
            "targets": self.targets.iter().map(|w| json!({
                "target": w,
                "q": self.q_used[w],
                "helpers": self.sets[w],
            })).collect::<Vec<_>>(),
        })
    }
}

/// Membership probability for a cluster of size `csize`.
fn helper_q(k: u64, gamma: u64, nq: Rat, csize: u64, c: u32, n: u32) -> f64 {
    let nq_f = *nq.numer() as f64 / *nq.denom() as f64;
    let raw = (HELPER_OVERSAMPLE_FACTOR as f64 * c as f64 * ln_n(n) * k as f64)
        / (gamma as f64 * nq_f * csize as f64);
    raw.min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BuildWindow {
    RosterUp,
    RosterDown,
    SetsUp,
    SetsDown,
    Done,
}

#[derive(Debug)]
struct HelperBuildProgram {
    node: NodeId,
    n: u32,
    k: u64,
    gamma: u64,
    c: u32,
    nq: Rat,
    depth: u32,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    t_max: u32,
    targets: BTreeSet<NodeId>,
    subtree: Vec<NodeId>,
    route: BTreeMap<NodeId, NodeId>,
    roster: Vec<NodeId>,
    my_sets: Vec<NodeId>,
    collected: Vec<(NodeId, NodeId)>,
    full_sets: BTreeMap<NodeId, Vec<NodeId>>,
    q_by_target: BTreeMap<NodeId, f64>,
}

impl HelperBuildProgram {
    fn window_at(&self, round: u64) -> (BuildWindow, u64) {
        let t = self.t_max as u64;
        if round <= t + 1 {
            (BuildWindow::RosterUp, round)
        } else if round <= 2 * t + 2 {
            (BuildWindow::RosterDown, round - (t + 1))
        } else if round <= 3 * t + 4 {
            (BuildWindow::SetsUp, round - (2 * t + 2))
        } else if round <= 4 * t + 6 {
            (BuildWindow::SetsDown, round - (3 * t + 4))
        } else {
            (BuildWindow::Done, 0)
        }
    }
}

impl NodeProgram for HelperBuildProgram {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        let t = self.t_max as u64;
        let (window, pos) = self.window_at(ctx.round);
        match window {
            BuildWindow::RosterUp => {
                // Children (depth d+1) sent at (t+1)-(d+1); absorb their
                // subtree rosters, then send ours at (t+1)-d.
                for env in ctx.inbox_local() {
                    if let Msg::Rows(rows) = &env.msg {
                        for &(member, _) in rows.iter() {
                            self.subtree.push(member);
                            self.route.insert(member, env.src);
                        }
                    }
                }
                if self.depth >= 1 && pos == t + 1 - self.depth as u64 {
                    let mut rows: Vec<(u32, u64)> =
                        self.subtree.iter().map(|&m| (m, 0)).collect();
                    rows.push((self.node, 0));
                    ctx.send_local(self.parent.unwrap(), Msg::Rows(Arc::new(rows)));
                }
                StepStatus::again()
            }
            BuildWindow::RosterDown => {
                for env in ctx.inbox_local() {
                    if let Msg::Rows(rows) = &env.msg {
                        self.roster = rows.iter().map(|&(m, _)| m).collect();
                    }
                }
                if self.depth == 0 && pos == 1 {
                    let mut roster = self.subtree.clone();
                    roster.push(self.node);
                    roster.sort_unstable();
                    self.roster = roster;
                }
                // Forward the roster to children one level per round.
                if pos == self.depth as u64 + 1 && !self.children.is_empty() {
                    let rows: Arc<Vec<(u32, u64)>> =
                        Arc::new(self.roster.iter().map(|&m| (m, 0)).collect());
                    let children = self.children.clone();
                    for ch in children {
                        ctx.send_local(ch, Msg::Rows(rows.clone()));
                    }
                }
                StepStatus::again()
            }
            BuildWindow::SetsUp => {
                if pos == 1 {
                    // Roster is complete: sample memberships.
                    assert!(!self.roster.is_empty(), "roster missing at node {}", self.node);
                    let csize = self.roster.len() as u64;
                    let local_targets: Vec<NodeId> = self
                        .roster
                        .iter()
                        .copied()
                        .filter(|w| self.targets.contains(w))
                        .collect();
                    for w in local_targets {
                        let q = helper_q(self.k, self.gamma, self.nq, csize, self.c, self.n);
                        self.q_by_target.insert(w, q);
                        // A target always serves itself, so its set can
                        // never come up empty when the sampling mean drops
                        // below 1 (which happens whenever k < gamma * NQ —
                        // a regime where one helper is plenty anyway).
                        if w == self.node || q >= 1.0 || ctx.rng.gen_bool(q) {
                            self.my_sets.push(w);
                            self.collected.push((w, self.node));
                        }
                    }
                }
                for env in ctx.inbox_local() {
                    if let Msg::Rows(rows) = &env.msg {
                        for &(w, member) in rows.iter() {
                            self.collected.push((w, member as NodeId));
                        }
                    }
                }
                if self.depth >= 1 && pos == t + 2 - self.depth as u64 {
                    let rows: Vec<(u32, u64)> = self
                        .collected
                        .iter()
                        .map(|&(w, member)| (w, member as u64))
                        .collect();
                    ctx.send_local(self.parent.unwrap(), Msg::Rows(Arc::new(rows)));
                }
                StepStatus::again()
            }
            BuildWindow::SetsDown => {
                for env in ctx.inbox_local() {
                    if let Msg::Rows(rows) = &env.msg {
                        self.collected = rows
                            .iter()
                            .map(|&(w, member)| (w, member as NodeId))
                            .collect();
                    }
                }
                if pos == self.depth as u64 + 1 {
                    if !self.children.is_empty() {
                        let rows: Arc<Vec<(u32, u64)>> = Arc::new(
                            self.collected
                                .iter()
                                .map(|&(w, member)| (w, member as u64))
                                .collect(),
                        );
                        let children = self.children.clone();
                        for ch in children {
                            ctx.send_local(ch, Msg::Rows(rows.clone()));
                        }
                    }
                }
                if ctx.round == 4 * t + 6 {
                    // Assemble the final per-target lists.
                    let mut sets: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
                    for w in self.roster.iter().filter(|w| self.targets.contains(w)) {
                        sets.entry(*w).or_default();
                    }
                    for &(w, member) in &self.collected {
                        sets.entry(w).or_default().push(member);
                    }
                    for list in sets.values_mut() {
                        list.sort_unstable();
                        list.dedup();
                    }
                    self.full_sets = sets;
                    return StepStatus::halt();
                }
                StepStatus::again()
            }
            BuildWindow::Done => {
                unreachable!("helper build stepped past its schedule");
            }
        }
    }
}

/// Build helper sets for `targets` on top of a fresh ruling/clustering at
/// `alpha = 2 ceil(NQ) + 1`. All nodes of a cluster finish knowing the full
/// helper list of every target in their cluster. The returned trace covers
/// ruling, clustering, and the build sweeps.
pub fn build_helper_sets(
    g: &WeightedGraph,
    targets: &[NodeId],
    k: u64,
    gamma: u64,
    nq: Rat,
    cfg: &SimConfig,
) -> Result<(HelperFamily, ExecutionTrace)> {
    let n = g.n();
    if targets.is_empty() {
        return Err(Error::validation("at least one target required"));
    }
    let mut tgt: Vec<NodeId> = targets.to_vec();
    tgt.sort_unstable();
    tgt.dedup();
    if tgt[0] < 1 || *tgt.last().unwrap() > n {
        return Err(Error::validation("target id outside 1..=n"));
    }
    if nq < Rat::from_integer(1) {
        return Err(Error::validation("NQ value below 1"));
    }

    let alpha = helper_alpha(nq);
    let (ruling, mut trace) = ruling_set(g, alpha, cfg)?;
    let (clustering, trace2) = cluster_nearest_ruler(g, &ruling, &cfg.with_seed(
        crate::util::derive_seed(cfg.seed, 1),
    ))?;
    trace.extend(&trace2);

    let t_max = clustering.beta_bound.max(1);
    let target_set: BTreeSet<NodeId> = tgt.iter().copied().collect();
    let programs: Vec<HelperBuildProgram> = (1..=n)
        .map(|v| HelperBuildProgram {
            node: v,
            n,
            k,
            gamma,
            c: cfg.whp_exponent,
            nq,
            depth: clustering.hop[ix(v)],
            parent: clustering.parent[ix(v)],
            children: clustering.children[ix(v)].clone(),
            t_max,
            targets: target_set.clone(),
            subtree: Vec::new(),
            route: BTreeMap::new(),
            roster: Vec::new(),
            my_sets: Vec::new(),
            collected: Vec::new(),
            full_sets: BTreeMap::new(),
            q_by_target: BTreeMap::new(),
        })
        .collect();
    let build_cfg = cfg.with_seed(crate::util::derive_seed(cfg.seed, 2));
    let (progs, trace3) = run_engine(g, programs, &build_cfg)?;
    trace.extend(&trace3);

    // Assemble and cross-check: every member of a cluster must have learned
    // identical helper lists.
    let mut sets: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut q_used: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut route_tables: Vec<BTreeMap<NodeId, NodeId>> = vec![BTreeMap::new(); n as usize];
    for p in &progs {
        route_tables[ix(p.node)] = p.route.clone();
        for (w, list) in &p.full_sets {
            match sets.get(w) {
                None => {
                    sets.insert(*w, list.clone());
                }
                Some(existing) => {
                    if existing != list {
                        return Err(Error::validation(format!(
                            "cluster members disagree on the helper list of target {w}"
                        )));
                    }
                }
            }
        }
        for (w, q) in &p.q_by_target {
            q_used.insert(*w, *q);
        }
    }
    for w in &tgt {
        let list = sets.get(w).cloned().unwrap_or_default();
        if list.is_empty() {
            return Err(Error::validation(format!(
                "target {w} ended up with an empty helper set"
            )));
        }
        sets.insert(*w, list);
    }
    sets.retain(|w, _| target_set.contains(w));
    q_used.retain(|w, _| target_set.contains(w));

    Ok((
        HelperFamily {
            targets: tgt,
            k,
            gamma,
            nq,
            alpha,
            clustering,
            sets,
            q_used,
            route_tables,
        },
        trace,
    ))
}

/// Result of checking a helper family against its contract.
#[derive(Debug, Clone, Serialize)]
pub struct HelperCheck {
    /// Every helper set is large enough: saturated clusters exactly the
    /// cluster roster with `|C| >= k / ((NQ + 1) gamma)`; sampled clusters
    /// at least half the sampling mean `4 c ln n * k / (gamma NQ)`.
    pub size_ok: bool,
    /// Every helper lies within `2 alpha ceil(log2 n)` hops of its target.
    pub hop_ok: bool,
    /// No node serves in more than `16 c ln n` helper sets.
    pub membership_ok: bool,
    pub max_membership: u64,
    pub membership_cap: f64,
    pub worst_hop: u32,
    pub hop_cap: u32,
}

/// Check the three helper-set guarantees. The hop bound is deterministic;
/// the two cardinality bounds hold with high probability per run.
pub fn verify_helper_family(g: &WeightedGraph, family: &HelperFamily, c: u32) -> HelperCheck {
    let n = g.n();
    let members = family.clustering.members();
    let nq_f = *family.nq.numer() as f64 / *family.nq.denom() as f64;

    let mut size_ok = true;
    for w in &family.targets {
        let r = family.clustering.ruler_of[ix(*w)];
        let csize = members[&r].len() as u64;
        let set = &family.sets[w];
        let q = family.q_used[w];
        if q >= 1.0 {
            let roster_match = set.len() as u64 == csize;
            // (NQ + 1) * gamma * |C| >= k, exactly.
            let lhs = (family.nq + Rat::from_integer(1))
                * Rat::from_integer(family.gamma as i128)
                * Rat::from_integer(csize as i128);
            size_ok &= roster_match && lhs >= Rat::from_integer(family.k as i128);
        } else {
            let mean_half = (HELPER_LOWER_FACTOR as f64) * c as f64 * ln_n(n) * family.k as f64
                / (family.gamma as f64 * nq_f);
            size_ok &= set.len() as f64 >= mean_half;
        }
    }

    let hop_cap = 2 * family.alpha * ceil_log2(n as u64).max(1);
    let mut worst_hop = 0;
    for w in &family.targets {
        let hops = g.bfs_hops(*w);
        for h in &family.sets[w] {
            worst_hop = worst_hop.max(hops[ix(*h)]);
        }
    }
    let hop_ok = worst_hop <= hop_cap;

    let mut load: BTreeMap<NodeId, u64> = BTreeMap::new();
    for set in family.sets.values() {
        for h in set {
            *load.entry(*h).or_insert(0) += 1;
        }
    }
    let max_membership = load.values().copied().max().unwrap_or(0);
    let membership_cap = MEMBERSHIP_CAP_FACTOR as f64 * c as f64 * ln_n(n);
    let membership_ok = (max_membership as f64) <= membership_cap;

    HelperCheck {
        size_ok,
        hop_ok,
        membership_ok,
        max_membership,
        membership_cap,
        worst_hop,
        hop_cap,
    }
}
