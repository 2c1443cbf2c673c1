//! Token routing through hashed intermediates and helper sets.
//!
//! `k` sources each hold one token per target in an ordered list
//! `T = {t_1..t_l}`. Sending them directly would overload the targets'
//! `gamma`-bit receive budgets, so tokens travel in four phases:
//!
//! 1. every source `s` sends token `(s, j)` over the global channel to the
//!    intermediate node `h(pack(g(s), j))`, throttled to batches of `b`
//!    per round (`g` compresses source ids into `[k]`, so helpers never
//!    need the source roster);
//! 2. the `k` task indices of each target are split evenly among its
//!    helpers, and each helper requests its tasks `(i, j)` from the
//!    responsible intermediates, again `b` per round;
//! 3. intermediates answer each request with every stored token whose
//!    compressed index matches, chunked so responses respect the per-round
//!    budget, with explicit empty responses so helpers can count
//!    completions;
//! 4. helpers forward the tokens to their targets over the cluster trees
//!    (local channel only).
//!
//! Phases are separated by sum-aggregate barriers, and phases 2/3 repeat in
//! fixed-length epochs (traffic window, then barrier) until every node
//! reports completion. The plan also carries two audit counters: `X_u`, the
//! number of `(i, j)` keys hashed to intermediate `u`, and `Y_i`, the number
//! of sources compressed to index `i` — the balls-into-bins loads that the
//! capacity argument rests on.

use crate::cluster::HelperFamily;
use crate::constants::{batch_size, ceil_log2, field_bits};
use crate::error::{Error, Result};
use crate::graph::{ix, NodeId, WeightedGraph};
use crate::hash::{HashFamilySpec, HashSeed};
use crate::sim::agg::{AggregateCore, SumU64};
use crate::sim::gossip::broadcast_set;
use crate::sim::{run_engine, Ctx, ExecutionTrace, Msg, NodeProgram, SimConfig, StepStatus};
use crate::util::{bit_len, derive_seed, node_rng};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

/// One unit of routed data: the payload travels from `source` to the
/// `target_index`-th target of the plan (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub source: NodeId,
    pub target_index: u64,
    pub payload: u64,
}

/// Key layout for the intermediate hash: `i * 2^ceil(log2(l+1)) + j`.
pub fn pack_key(i: u64, j: u64, ell: u64) -> u64 {
    (i << ceil_log2(ell + 1)) | j
}

fn pack_width(ell: u64) -> u32 {
    ceil_log2(ell + 1)
}

/// Map a packed `(i, j)` key to an intermediate node id.
fn h_node(seed: &HashSeed, key: u64, n: u32) -> NodeId {
    (seed.eval(key) % n as u64) as NodeId + 1
}

/// Compress a source id into an index in `[k]`.
fn g_index(seed: &HashSeed, id: NodeId, k: u64) -> u64 {
    seed.eval(id as u64) % k + 1
}

/// Split `k` items among `parts` consumers as evenly as possible; the first
/// `k mod parts` consumers take one extra.
pub fn split_even(k: u64, parts: u64) -> Vec<u64> {
    let base = k / parts;
    let rem = k % parts;
    (0..parts)
        .map(|i| base + if i < rem { 1 } else { 0 })
        .collect()
}

/// Everything the four routing phases need, fixed before any token moves.
#[derive(Debug, Clone)]
pub struct RoutingPlan {
    /// Ordered targets `t_1..t_l`; indices `j` refer to this order.
    pub targets: Vec<NodeId>,
    pub sources: Vec<NodeId>,
    pub k: u64,
    pub gamma: u64,
    pub batch: u64,
    pub seed_h: HashSeed,
    pub seed_g: HashSeed,
    /// `helper -> (i, j)` task assignments, contiguous index ranges per
    /// helper in helper-id order.
    pub tasks: BTreeMap<NodeId, Vec<(u64, u64)>>,
    pub family: HelperFamily,
    /// Max over nodes `u` of `|{(i,j) : h(pack(i,j)) = u}|`.
    pub x_u_max: u64,
    /// Max over indices `i` of `|{s in S : g(s) = i}|`.
    pub y_i_max: u64,
}

/// Outcome of a routing run.
#[derive(Debug, Clone)]
pub struct DeliveryReport {
    /// `target -> {(source, payload)}`.
    pub delivered: BTreeMap<NodeId, BTreeSet<(NodeId, u64)>>,
    pub delivered_count: u64,
    pub rounds_local: u64,
    pub rounds_global: u64,
    pub max_rx_bits: u64,
    pub x_u_max: u64,
    pub y_i_max: u64,
    pub seed: u64,
    pub audit_exempt: bool,
}

impl DeliveryReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "delivered_count": self.delivered_count,
            "rounds_local": self.rounds_local,
            "rounds_global": self.rounds_global,
            "max_rx_bits": self.max_rx_bits,
            "xu_max": self.x_u_max,
            "yi_max": self.y_i_max,
            "seed": self.seed,
            "audit_exempt": self.audit_exempt,
        })
    }
}

/// Hash family shapes for this instance. Range extraction is a power-of-two
/// truncation followed by a modulus, which skews bin probabilities by at
/// most a factor of two — within the slack of the load constants.
fn hash_specs(n: u32, k: u64, ell: u64, batch: u64) -> (HashFamilySpec, HashFamilySpec) {
    let independence = batch
        .max((ell as f64 * crate::constants::ln_n(n)).ceil() as u64)
        .max(1) as u32;
    let spec_h = HashFamilySpec {
        domain_bits: bit_len(pack_key(k, ell, ell)),
        range_bits: ceil_log2(n as u64).max(1),
        independence,
    };
    let spec_g = HashFamilySpec {
        domain_bits: bit_len(n as u64),
        range_bits: ceil_log2(k).max(1),
        independence,
    };
    (spec_h, spec_g)
}

/// Serialize hash seeds as 32-bit halves keyed by slot so they survive the
/// set-broadcast (items must be distinct u64 values).
fn seed_items(seed_h: &HashSeed, seed_g: &HashSeed) -> Vec<u64> {
    let mut items = Vec::new();
    let mut slot = 0u64;
    for seed in [seed_h, seed_g] {
        for &c in &seed.coeffs {
            items.push((slot << 32) | (c & 0xffff_ffff));
            slot += 1;
            items.push((slot << 32) | (c >> 32));
            slot += 1;
        }
    }
    items
}

fn seeds_from_items(
    items: &[u64],
    spec_h: HashFamilySpec,
    spec_g: HashFamilySpec,
    prime_h: u64,
    prime_g: u64,
) -> Result<(HashSeed, HashSeed)> {
    let mut sorted: Vec<u64> = items.to_vec();
    sorted.sort_unstable();
    let halves: Vec<u64> = sorted.iter().map(|it| it & 0xffff_ffff).collect();
    let total = spec_h.independence as usize + spec_g.independence as usize;
    if halves.len() != 2 * total {
        return Err(Error::validation("seed broadcast item count mismatch"));
    }
    let coeffs: Vec<u64> = halves
        .chunks(2)
        .map(|pair| pair[0] | (pair[1] << 32))
        .collect();
    let (ch, cg) = coeffs.split_at(spec_h.independence as usize);
    Ok((
        HashSeed::from_parts(spec_h, prime_h, ch.to_vec())?,
        HashSeed::from_parts(spec_g, prime_g, cg.to_vec())?,
    ))
}

/// Build the routing plan: broadcast the target ordering and hash seeds to
/// every node, then split each target's `k` task indices evenly among its
/// helpers. The trace covers both broadcasts; the task split costs nothing
/// (helper lists are already cluster-wide knowledge).
pub fn plan(
    g: &WeightedGraph,
    sources: &[NodeId],
    targets: &[NodeId],
    k: u64,
    gamma: u64,
    family: &HelperFamily,
    cfg: &SimConfig,
) -> Result<(RoutingPlan, ExecutionTrace)> {
    let n = g.n();
    if n < 2 {
        return Err(Error::validation("routing needs at least two nodes"));
    }
    let src_set: BTreeSet<NodeId> = sources.iter().copied().collect();
    if src_set.len() != sources.len() || sources.is_empty() {
        return Err(Error::validation("sources must be distinct and nonempty"));
    }
    if k != sources.len() as u64 {
        return Err(Error::validation(format!(
            "k = {k} but {} sources supplied",
            sources.len()
        )));
    }
    let tgt_sorted: Vec<NodeId> = {
        let mut t: Vec<NodeId> = targets.to_vec();
        t.sort_unstable();
        t.dedup();
        t
    };
    if tgt_sorted.len() != targets.len() {
        return Err(Error::validation("targets must be distinct"));
    }
    if tgt_sorted != family.targets {
        return Err(Error::validation(
            "helper family was built for a different target set",
        ));
    }
    for &v in sources.iter().chain(targets) {
        if v < 1 || v > n {
            return Err(Error::validation(format!("node id {v} outside 1..={n}")));
        }
    }
    let ell = targets.len() as u64;
    let batch = batch_size(gamma, n);
    if pack_key(k, ell, ell) > u32::MAX as u64 {
        return Err(Error::validation("instance too large for packed task keys"));
    }

    // Publish the target ordering: item = j * 2^32 + id, held by t_j.
    let mut holders: Vec<Vec<u64>> = vec![Vec::new(); n as usize];
    for (idx, &t) in targets.iter().enumerate() {
        holders[ix(t)].push(((idx as u64 + 1) << 32) | t as u64);
    }
    let (_, mut trace) = broadcast_set(g, &holders, ell, &cfg.with_seed(derive_seed(cfg.seed, 21)))?;

    // Node 1 draws both hash seeds and publishes them the same way.
    let (spec_h, spec_g) = hash_specs(n, k, ell, batch);
    let mut rng = node_rng(derive_seed(cfg.seed, 22), 1);
    let seed_h = HashSeed::sample(spec_h, &mut rng)?;
    let seed_g = HashSeed::sample(spec_g, &mut rng)?;
    let items = seed_items(&seed_h, &seed_g);
    let mut holders: Vec<Vec<u64>> = vec![Vec::new(); n as usize];
    holders[0] = items.clone();
    let (outcome, trace2) = broadcast_set(
        g,
        &holders,
        items.len() as u64,
        &cfg.with_seed(derive_seed(cfg.seed, 23)),
    )?;
    trace.extend(&trace2);
    // Reconstruct from what the broadcast actually delivered, as any node
    // would.
    let (seed_h, seed_g) = seeds_from_items(
        &outcome.known[ix(n)],
        spec_h,
        spec_g,
        seed_h.prime,
        seed_g.prime,
    )?;

    // Split task indices contiguously over each target's sorted helpers.
    let mut tasks: BTreeMap<NodeId, Vec<(u64, u64)>> = BTreeMap::new();
    for (idx, &t) in targets.iter().enumerate() {
        let j = idx as u64 + 1;
        let helpers = &family.sets[&t];
        let loads = split_even(k, helpers.len() as u64);
        let mut next_i = 1u64;
        for (h, cnt) in helpers.iter().zip(loads) {
            for i in next_i..next_i + cnt {
                tasks.entry(*h).or_default().push((i, j));
            }
            next_i += cnt;
        }
    }

    // Audit counters: loads induced by the fixed seeds.
    let mut x_loads: BTreeMap<NodeId, u64> = BTreeMap::new();
    for i in 1..=k {
        for j in 1..=ell {
            *x_loads
                .entry(h_node(&seed_h, pack_key(i, j, ell), n))
                .or_insert(0) += 1;
        }
    }
    let mut y_loads: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in sources {
        *y_loads.entry(g_index(&seed_g, s, k)).or_insert(0) += 1;
    }

    Ok((
        RoutingPlan {
            targets: targets.to_vec(),
            sources: sources.to_vec(),
            k,
            gamma,
            batch,
            seed_h,
            seed_g,
            tasks,
            family: family.clone(),
            x_u_max: x_loads.values().copied().max().unwrap_or(0),
            y_i_max: y_loads.values().copied().max().unwrap_or(0),
        },
        trace,
    ))
}

const TAG_REQ: u64 = 31;
const TAG_P1_BARRIER: u64 = 101;
const TAG_EPOCH_BARRIER: u64 = 102;
/// Sentinel in the middle column marking a response-header row.
const RESP_HEADER: u32 = u32::MAX;

#[derive(Debug)]
struct RouteProgram {
    node: NodeId,
    n: u32,
    fb: u32,
    ell: u64,
    b: u64,
    seed_h: Arc<HashSeed>,
    targets: Arc<Vec<NodeId>>,
    // Phase-1 source state: rows (pack, source, payload) in target order.
    my_rows: Vec<(u32, u32, u64)>,
    // Schedule constants.
    r1: u64,
    s1: u64,
    f1: u64,
    e_len: u64,
    a_len: u64,
    resp_budget: u64,
    // Intermediate state.
    store: BTreeMap<u32, Vec<(u32, u64)>>,
    resp_queue: VecDeque<(NodeId, u32)>,
    resp_chunk_pos: u64,
    // Helper state.
    my_tasks: Vec<(u64, u64)>,
    task_sent: usize,
    task_recv: BTreeMap<u32, (Option<u64>, Vec<(u32, u64)>)>,
    tasks_done: usize,
    held: Vec<(u32, u32, u64)>, // (j, src, payload) awaiting local delivery
    // Barrier state.
    agg: Option<AggregateCore<SumU64>>,
    epoch_base: u64,
    // Phase-4 state.
    p4_start: Option<u64>,
    depth: u32,
    parent: Option<NodeId>,
    route: BTreeMap<NodeId, NodeId>,
    t_max: u64,
    up_rows: Vec<(u32, u32, u64)>,
    down_rows: Vec<(u32, u32, u64)>,
    delivered: Vec<(u32, u64)>,
}

impl RouteProgram {
    fn absorb(&mut self, ctx: &mut Ctx<'_>) {
        let r = ctx.round;
        let mut completed: Vec<u32> = Vec::new();
        for env in ctx.inbox_global() {
            match &env.msg {
                Msg::Rows3(rows) if r <= self.r1 + 1 => {
                    // Phase-1 tokens land in the store.
                    for &(pack, src, payload) in rows.iter() {
                        self.store.entry(pack).or_default().push((src, payload));
                    }
                }
                Msg::Rows3(rows) => {
                    // Response chunks: header row fixes the expected total.
                    for &(pack, col, val) in rows.iter() {
                        let entry = self.task_recv.entry(pack).or_insert((None, Vec::new()));
                        if col == RESP_HEADER {
                            entry.0 = Some(val);
                        } else {
                            entry.1.push((col, val));
                        }
                        completed.push(pack);
                    }
                }
                Msg::Fields(f) if f.first() == Some(&TAG_REQ) => {
                    let pack = pack_key(f[1], f[2], self.ell) as u32;
                    self.resp_queue.push_back((env.src, pack));
                }
                _ => {} // barrier traffic is absorbed by the aggregation core
            }
        }
        completed.sort_unstable();
        completed.dedup();
        let w = pack_width(self.ell);
        for pack in completed {
            let done = match self.task_recv.get(&pack) {
                Some((Some(total), rows)) => rows.len() as u64 == *total,
                _ => false,
            };
            if done {
                let (_, rows) = self.task_recv.remove(&pack).unwrap();
                let j = (pack & ((1u32 << w) - 1)) as u32;
                for (src, payload) in rows {
                    self.held.push((j, src, payload));
                }
                self.tasks_done += 1;
            }
        }
        // Local channel: cluster-tree rows during phase 4.
        if let Some(p4) = self.p4_start {
            let rel = r - p4;
            let mut incoming: Vec<(u32, u32, u64)> = Vec::new();
            for env in ctx.inbox_local() {
                if let Msg::Rows3(rows) = &env.msg {
                    incoming.extend(rows.iter().copied());
                }
            }
            for (j, src, payload) in incoming {
                if self.targets[(j - 1) as usize] == self.node {
                    self.delivered.push((src, payload));
                } else if rel <= self.t_max {
                    self.up_rows.push((j, src, payload));
                } else {
                    self.down_rows.push((j, src, payload));
                }
            }
        }
    }

    fn send_tokens(&mut self, ctx: &mut Ctx<'_>) {
        let r = ctx.round;
        let lo = ((r - 1) * self.b) as usize;
        if lo >= self.my_rows.len() {
            return;
        }
        let hi = (lo + self.b as usize).min(self.my_rows.len());
        let mut by_dst: BTreeMap<NodeId, Vec<(u32, u32, u64)>> = BTreeMap::new();
        for &row in &self.my_rows[lo..hi] {
            let dst = h_node(&self.seed_h, row.0 as u64, self.n);
            by_dst.entry(dst).or_default().push(row);
        }
        for (dst, rows) in by_dst {
            ctx.send_global(dst, Msg::Rows3(Arc::new(rows)));
        }
    }

    fn traffic(&mut self, ctx: &mut Ctx<'_>) {
        // Helper requests, `b` per round.
        let mut sent = 0;
        while self.task_sent < self.my_tasks.len() && sent < self.b {
            let (i, j) = self.my_tasks[self.task_sent];
            let dst = h_node(&self.seed_h, pack_key(i, j, self.ell), self.n);
            ctx.send_global(dst, Msg::Fields(vec![TAG_REQ, i, j]));
            self.task_sent += 1;
            sent += 1;
        }
        // Intermediate responses within the per-round bit budget.
        let row_bits = 3 * self.fb as u64;
        let mut budget = self.resp_budget;
        while let Some(&(helper, pack)) = self.resp_queue.front() {
            if budget < 2 * row_bits {
                break;
            }
            let tokens = self.store.get(&pack).cloned().unwrap_or_default();
            let total = tokens.len() as u64;
            let max_data = budget / row_bits - 1;
            let take = (total - self.resp_chunk_pos).min(max_data);
            let mut rows: Vec<(u32, u32, u64)> = vec![(pack, RESP_HEADER, total)];
            for t in 0..take {
                let (src, payload) = tokens[(self.resp_chunk_pos + t) as usize];
                rows.push((pack, src, payload));
            }
            budget = budget.saturating_sub(rows.len() as u64 * row_bits);
            ctx.send_global(helper, Msg::Rows3(Arc::new(rows)));
            self.resp_chunk_pos += take;
            if self.resp_chunk_pos >= total {
                self.resp_queue.pop_front();
                self.resp_chunk_pos = 0;
            }
        }
    }

    fn phase23_done(&self) -> bool {
        self.task_sent == self.my_tasks.len()
            && self.tasks_done == self.my_tasks.len()
            && self.resp_queue.is_empty()
    }
}

impl NodeProgram for RouteProgram {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        self.absorb(ctx);
        let r = ctx.round;

        // Phase 1: batched token sends, then a gap round for the last
        // arrivals, then a synchronization barrier.
        if r <= self.r1 {
            if !self.my_rows.is_empty() {
                self.send_tokens(ctx);
            }
            return StepStatus::again();
        }
        if r < self.s1 {
            return StepStatus::again();
        }
        if r <= self.f1 {
            if r == self.s1 {
                self.agg = Some(AggregateCore::new(
                    self.node,
                    self.n,
                    self.s1,
                    TAG_P1_BARRIER,
                    SumU64(1),
                ));
            }
            let agg = self.agg.as_mut().expect("phase-1 barrier not started");
            agg.on_round(ctx);
            if r == self.f1 {
                let sum = agg.result().expect("barrier incomplete").0;
                assert_eq!(sum, self.n as u64, "phase-1 barrier lost nodes");
                self.agg = None;
                self.epoch_base = r;
                self.traffic(ctx);
            }
            return StepStatus::again();
        }

        // Phases 2/3: epochs of traffic + completion barrier.
        if self.p4_start.is_none() {
            let te = self.epoch_base;
            if r < te + self.e_len {
                self.traffic(ctx);
                return StepStatus::again();
            }
            if r == te + self.e_len {
                return StepStatus::again(); // gap: final responses land
            }
            let bs = te + self.e_len + 1;
            if r == bs {
                let done = SumU64(self.phase23_done() as u64);
                self.agg = Some(AggregateCore::new(
                    self.node,
                    self.n,
                    bs,
                    TAG_EPOCH_BARRIER,
                    done,
                ));
            }
            let agg = self.agg.as_mut().expect("epoch barrier not started");
            agg.on_round(ctx);
            if r < bs + self.a_len {
                return StepStatus::again();
            }
            let sum = agg.result().expect("epoch barrier incomplete").0;
            self.agg = None;
            if sum < self.n as u64 {
                self.epoch_base = r;
                self.traffic(ctx);
                return StepStatus::again();
            }
            self.p4_start = Some(r);
            // Fall through: the deepest nodes start the local collection
            // this very round.
        }

        // Phase 4: convergecast to the ruler, then route down to targets.
        let p4 = self.p4_start.unwrap();
        let rel = r - p4;
        if rel == 0 {
            let held = std::mem::take(&mut self.held);
            for (j, src, payload) in held {
                if self.targets[(j - 1) as usize] == self.node {
                    self.delivered.push((src, payload));
                } else {
                    self.up_rows.push((j, src, payload));
                }
            }
        }
        if self.depth >= 1 && rel == self.t_max - self.depth as u64 && !self.up_rows.is_empty() {
            let rows = std::mem::take(&mut self.up_rows);
            ctx.send_local(self.parent.unwrap(), Msg::Rows3(Arc::new(rows)));
        }
        if rel == self.t_max + 1 && self.depth == 0 {
            // Ruler: everything left upward now heads back down.
            self.down_rows.append(&mut self.up_rows);
        }
        if rel == self.t_max + 1 + self.depth as u64 && !self.down_rows.is_empty() {
            let rows = std::mem::take(&mut self.down_rows);
            let mut by_child: BTreeMap<NodeId, Vec<(u32, u32, u64)>> = BTreeMap::new();
            for row in rows {
                let w = self.targets[(row.0 - 1) as usize];
                let child = *self
                    .route
                    .get(&w)
                    .unwrap_or_else(|| panic!("node {} has no route to target {w}", self.node));
                by_child.entry(child).or_default().push(row);
            }
            for (child, rows) in by_child {
                ctx.send_local(child, Msg::Rows3(Arc::new(rows)));
            }
        }
        if rel >= 2 * self.t_max + 2 {
            return StepStatus::halt();
        }
        StepStatus::again()
    }
}

/// Route one token per (source, target) pair per the plan. Returns the
/// delivery report and the full trace (phases 1–3 global, phase 4 local).
pub fn route_tokens(
    g: &WeightedGraph,
    plan: &RoutingPlan,
    tokens: &[Token],
    cfg: &SimConfig,
) -> Result<(DeliveryReport, ExecutionTrace)> {
    let n = g.n();
    let ell = plan.targets.len() as u64;
    let fb = field_bits(n);
    let src_set: BTreeSet<NodeId> = plan.sources.iter().copied().collect();

    // Exactly one token per (source, target-index), payloads in range.
    let mut seen: BTreeSet<(NodeId, u64)> = BTreeSet::new();
    for t in tokens {
        if !src_set.contains(&t.source) {
            return Err(Error::validation(format!(
                "token source {} is not in the plan",
                t.source
            )));
        }
        if t.target_index < 1 || t.target_index > ell {
            return Err(Error::validation(format!(
                "token target index {} outside 1..={ell}",
                t.target_index
            )));
        }
        if bit_len(t.payload) > fb {
            return Err(Error::validation(format!(
                "token payload {} exceeds the {fb}-bit field",
                t.payload
            )));
        }
        if !seen.insert((t.source, t.target_index)) {
            return Err(Error::validation(format!(
                "duplicate token for source {} target index {}",
                t.source, t.target_index
            )));
        }
    }
    if seen.len() as u64 != plan.k * ell {
        return Err(Error::validation(format!(
            "expected {} tokens, got {}",
            plan.k * ell,
            tokens.len()
        )));
    }

    let m = ceil_log2(n as u64).max(1) as u64;
    let a_len = AggregateCore::<SumU64>::rounds(n);
    let r1 = ell.div_ceil(plan.batch);
    let s1 = r1 + 2;
    let f1 = s1 + a_len;
    let e_len = (2 * m).max(1);
    let resp_budget = plan
        .gamma
        .saturating_sub(plan.batch * 3 * fb as u64)
        .max(6 * fb as u64);
    let t_max = plan.family.clustering.beta_bound.max(1) as u64;

    let seed_h = Arc::new(plan.seed_h.clone());
    let seed_g = Arc::new(plan.seed_g.clone());
    let targets = Arc::new(plan.targets.clone());
    let mut tokens_by_source: BTreeMap<NodeId, Vec<(u32, u32, u64)>> = BTreeMap::new();
    for t in tokens {
        let i = g_index(&seed_g, t.source, plan.k);
        let pack = pack_key(i, t.target_index, ell) as u32;
        tokens_by_source
            .entry(t.source)
            .or_default()
            .push((pack, t.source, t.payload));
    }
    for rows in tokens_by_source.values_mut() {
        // Send in target order so batches line up across sources.
        rows.sort_by_key(|&(pack, _, _)| pack & ((1u32 << pack_width(ell)) - 1));
    }

    let programs: Vec<RouteProgram> = (1..=n)
        .map(|v| RouteProgram {
            node: v,
            n,
            fb,
            ell,
            b: plan.batch,
            seed_h: seed_h.clone(),
            targets: targets.clone(),
            my_rows: tokens_by_source.get(&v).cloned().unwrap_or_default(),
            r1,
            s1,
            f1,
            e_len,
            a_len,
            resp_budget,
            store: BTreeMap::new(),
            resp_queue: VecDeque::new(),
            resp_chunk_pos: 0,
            my_tasks: plan.tasks.get(&v).cloned().unwrap_or_default(),
            task_sent: 0,
            task_recv: BTreeMap::new(),
            tasks_done: 0,
            held: Vec::new(),
            agg: None,
            epoch_base: 0,
            p4_start: None,
            depth: plan.family.clustering.hop[ix(v)],
            parent: plan.family.clustering.parent[ix(v)],
            route: plan.family.route_tables[ix(v)].clone(),
            t_max,
            up_rows: Vec::new(),
            down_rows: Vec::new(),
            delivered: Vec::new(),
        })
        .collect();

    let (progs, trace) = run_engine(g, programs, cfg)?;

    // Completeness: every target holds exactly its expected (source,
    // payload) set.
    let mut expected: BTreeMap<NodeId, BTreeSet<(NodeId, u64)>> = BTreeMap::new();
    for t in tokens {
        let w = plan.targets[(t.target_index - 1) as usize];
        expected.entry(w).or_default().insert((t.source, t.payload));
    }
    let mut delivered: BTreeMap<NodeId, BTreeSet<(NodeId, u64)>> = BTreeMap::new();
    for &w in plan.targets.iter() {
        delivered.insert(w, progs[ix(w)].delivered.iter().copied().collect());
    }
    for (w, want) in &expected {
        let got = &delivered[w];
        if got != want {
            return Err(Error::validation(format!(
                "target {w} received {} of {} tokens",
                got.intersection(want).count(),
                want.len()
            )));
        }
    }
    let delivered_count = delivered.values().map(|s| s.len() as u64).sum();

    Ok((
        DeliveryReport {
            delivered,
            delivered_count,
            rounds_local: trace.totals.local_rounds,
            rounds_global: trace.totals.global_rounds,
            max_rx_bits: trace.max_node_recv_bits,
            x_u_max: plan.x_u_max,
            y_i_max: plan.y_i_max,
            seed: cfg.seed,
            audit_exempt: trace.audit_exempt,
        },
        trace,
    ))
}

/// Convenience wrapper: NQ -> helpers -> plan -> route, chaining the traces.
/// `nq_value` is the instance's neighborhood quality (computed upstream).
pub fn route_end_to_end(
    g: &WeightedGraph,
    sources: &[NodeId],
    targets: &[NodeId],
    tokens: &[Token],
    gamma: u64,
    nq_value: crate::Rat,
    cfg: &SimConfig,
) -> Result<(DeliveryReport, ExecutionTrace)> {
    let k = sources.len() as u64;
    let (family, mut trace) = crate::cluster::build_helper_sets(
        g,
        targets,
        k,
        gamma,
        nq_value,
        &cfg.with_seed(derive_seed(cfg.seed, 41)),
    )?;
    let (routing_plan, trace2) = plan(
        g,
        sources,
        targets,
        k,
        gamma,
        &family,
        &cfg.with_seed(derive_seed(cfg.seed, 42)),
    )?;
    trace.extend(&trace2);
    let (report, trace3) = route_tokens(g, &routing_plan, tokens, &cfg.with_seed(derive_seed(cfg.seed, 43)))?;
    trace.extend(&trace3);
    let mut report = report;
    report.seed = cfg.seed;
    report.audit_exempt = trace.audit_exempt;
    Ok((report, trace))
}
