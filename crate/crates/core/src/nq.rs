//! Neighborhood quality: how hard it is to funnel `k` tokens into one node
//! when every node can absorb `gamma` global bits per round but may lean on
//! its hop-neighborhood for local relaying.
//!
//! For a node `v`, radius `d` buys a pool of `|B(v, d)|` local relays at a
//! local price of `d` rounds, while the global phase needs
//! `k / (|B(v, d)| * gamma)` rounds to push `k` tokens through that pool.
//! The quality of `v` is the best trade-off
//!
//! ```text
//! NQ(v) = min_{1 <= d <= D}  max( k / (|B(v, d)| * gamma),  d )
//! ```
//!
//! with `D` the hop diameter, and the graph value is `NQ = max_v NQ(v)`,
//! which equals the same formula evaluated on the pointwise-minimum profile
//! `N(d) = min_v |B(v, d)|`. Values are exact rationals.
//!
//! [`nq_oracle`] computes everything centrally; [`nq_distributed`] runs the
//! simulator protocol: per depth, one local flood round extends every ball
//! by one hop, then a global min-aggregation publishes `N(d)`, and all nodes
//! apply the same stopping rule — stop at the first depth where the
//! objective stops improving, or at saturation. On a connected graph the
//! objective is strictly decreasing before its minimum, so the rule is exact,
//! and every per-node optimum lies within the explored prefix.

use crate::constants::ceil_log2;
use crate::error::{Error, Result};
use crate::graph::{NodeId, WeightedGraph};
use crate::sim::agg::{AggregateCore, MinU64};
use crate::sim::{
    run_engine, Ctx, ExecutionTrace, IdSet, Msg, NodeProgram, SimConfig, StepStatus, TraceTotals,
};
use crate::util::{rat_parts, rat_u};
use crate::Rat;
use serde_json::json;
use std::sync::Arc;

/// One node's quality value and its optimal radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeNq {
    pub node: NodeId,
    pub nq: Rat,
    pub d_v: u32,
}

/// Full neighborhood-quality result.
#[derive(Debug, Clone)]
pub struct NqReport {
    pub n: u32,
    pub k: u64,
    pub gamma: u64,
    /// Graph value `max_v NQ(v)`.
    pub value: Rat,
    /// Smallest optimal radius of the graph-level objective.
    pub d_star: u32,
    /// Smallest node id attaining the graph value.
    pub argmax_node: NodeId,
    /// Per-node values, ascending by id.
    pub per_node: Vec<NodeNq>,
    /// Traffic counters when computed by the distributed protocol; `None`
    /// for the oracle.
    pub rounds: Option<TraceTotals>,
}

impl NqReport {
    /// Deterministic JSON form.
    pub fn to_json(&self) -> serde_json::Value {
        let (nq_num, nq_den) = rat_parts(self.value);
        json!({
            "n": self.n,
            "k": self.k,
            "gamma": self.gamma,
            "nq_num": nq_num,
            "nq_den": nq_den,
            "d_star": self.d_star,
            "argmax_node": self.argmax_node,
            "per_node": self.per_node.iter().map(|p| {
                let (num, den) = rat_parts(p.nq);
                json!([p.node, num, den, p.d_v])
            }).collect::<Vec<_>>(),
            "rounds": match &self.rounds {
                None => serde_json::Value::Null,
                Some(t) => json!({
                    "local": t.local_rounds,
                    "global": t.global_rounds,
                    "combined": t.combined_rounds,
                }),
            },
        })
    }
}

/// The radius objective `max(k / (ball * gamma), d)`.
fn objective(k: u64, gamma: u64, ball: u64, d: u32) -> Rat {
    Rat::new(k as i128, ball as i128 * gamma as i128).max(Rat::from_integer(d as i128))
}

/// Minimize the objective over `d = 1..=domain` given ball sizes
/// `profile[d]` (index 0 = radius 0); saturates past the profile end.
/// Returns `(value, smallest optimal d)`.
fn minimize(profile: &[u64], k: u64, gamma: u64, domain: u32) -> (Rat, u32) {
    debug_assert!(domain >= 1);
    let mut best: Option<(Rat, u32)> = None;
    for d in 1..=domain {
        let ball = profile[(d as usize).min(profile.len() - 1)];
        let m = objective(k, gamma, ball, d);
        if best.map_or(true, |(b, _)| m < b) {
            best = Some((m, d));
        }
    }
    best.unwrap()
}

fn validate(g: &WeightedGraph, k: u64, gamma: u64) -> Result<()> {
    if g.n() < 2 {
        return Err(Error::validation("neighborhood quality needs n >= 2"));
    }
    if k < 1 || k > g.n() as u64 {
        return Err(Error::validation(format!(
            "k = {k} outside [1, n] = [1, {}]",
            g.n()
        )));
    }
    if gamma < 1 {
        return Err(Error::validation("gamma must be at least 1"));
    }
    Ok(())
}

/// Per-node quality of `v` by direct computation.
pub fn nq_node_oracle(g: &WeightedGraph, v: NodeId, k: u64, gamma: u64) -> Result<(Rat, u32)> {
    validate(g, k, gamma)?;
    let domain = g.hop_diameter();
    let profile = g.neighborhood_profile(v);
    Ok(minimize(&profile, k, gamma, domain))
}

fn assemble_report(
    g: &WeightedGraph,
    k: u64,
    gamma: u64,
    per_node: Vec<NodeNq>,
    min_profile: &[u64],
    domain: u32,
    rounds: Option<TraceTotals>,
) -> NqReport {
    let (value, d_star) = minimize(min_profile, k, gamma, domain);
    let best = per_node
        .iter()
        .max_by(|a, b| a.nq.cmp(&b.nq).then(b.node.cmp(&a.node)))
        .expect("nonempty");
    // The graph-level formula and the per-node maximum agree exactly.
    debug_assert_eq!(best.nq, value);
    NqReport {
        n: g.n(),
        k,
        gamma,
        value,
        d_star,
        argmax_node: best.node,
        per_node,
        rounds,
    }
}

/// Centralized computation of the graph value and every per-node value.
pub fn nq_oracle(g: &WeightedGraph, k: u64, gamma: u64) -> Result<NqReport> {
    validate(g, k, gamma)?;
    let domain = g.hop_diameter();
    let per_node: Vec<NodeNq> = g
        .nodes()
        .map(|v| {
            let profile = g.neighborhood_profile(v);
            let (nq, d_v) = minimize(&profile, k, gamma, domain);
            NodeNq { node: v, nq, d_v }
        })
        .collect();
    let min_profile = g.min_neighborhood_profile();
    Ok(assemble_report(g, k, gamma, per_node, &min_profile, domain, None))
}

/// Exact check of the square-root ceiling `NQ <= sqrt(k / gamma) + 1`,
/// compared as `(NQ - 1)^2 <= k / gamma` in rationals.
pub fn within_sqrt_bound(value: Rat, k: u64, gamma: u64) -> bool {
    if value <= Rat::from_integer(1) {
        return true;
    }
    let excess = value - Rat::from_integer(1);
    excess * excess <= rat_u(k, gamma)
}

const TAG_MIN_BALL: u64 = 3;

struct NqProgram {
    node: NodeId,
    n: u32,
    m: u32,
    k: u64,
    gamma: u64,
    known: IdSet,
    delta: Vec<NodeId>,
    /// `|B(v, d)|` for each explored `d` (index `d`, entry 0 is 1).
    profile: Vec<u64>,
    /// Aggregated `N(d)` for `d = 1..` (index `d - 1`).
    mins: Vec<u64>,
    agg: Option<AggregateCore<MinU64>>,
    outcome: Option<(Rat, u32, Rat, u32)>, // (NQ(v), d_v, NQ, d_star)
}

impl NqProgram {
    fn cycle_len(&self) -> u64 {
        2 * self.m as u64 + 1
    }

    /// Depth currently being explored at engine round `r`.
    fn depth_of(&self, r: u64) -> u64 {
        (r - 1) / self.cycle_len() + 1
    }
}

impl NodeProgram for NqProgram {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        // Absorb flood arrivals (extends the current ball by one hop).
        let mut delta_set: Option<IdSet> = None;
        for env in ctx.inbox_local() {
            if let Msg::Set(set) = &env.msg {
                let fresh = set.minus(&self.known);
                if !fresh.is_empty() {
                    delta_set
                        .get_or_insert_with(|| IdSet::new(self.n))
                        .union_into(&fresh);
                }
            }
        }
        if let Some(ds) = delta_set {
            self.known.union_into(&ds);
            self.delta = ds.iter().collect();
        }

        let cycle_len = self.cycle_len();
        let depth = self.depth_of(ctx.round);
        let pos = (ctx.round - 1) % cycle_len; // 0 = expansion round

        if pos == 0 {
            // Finish the previous depth's aggregation before expanding.
            if let Some(agg) = self.agg.as_mut() {
                agg.on_round(ctx);
                debug_assert!(agg.done());
                let n_d = agg.result().unwrap().0;
                self.agg = None;
                self.mins.push(n_d);
                let d = depth as u32 - 1; // the depth just aggregated
                let stop_improved = d >= 2 && {
                    let m_prev = objective(self.k, self.gamma, self.mins[d as usize - 2], d - 1);
                    let m_here = objective(self.k, self.gamma, self.mins[d as usize - 1], d);
                    m_prev <= m_here
                };
                let saturated = n_d == self.n as u64;
                if stop_improved || saturated {
                    // Explored domain: all depths up to `d` (minus the
                    // non-improving tail when the rule fired).
                    let domain = if stop_improved && !saturated { d } else { d };
                    let (nq_v, d_v) = minimize(&self.profile, self.k, self.gamma, domain);
                    let mut graph_profile = vec![u64::MAX; domain as usize + 1];
                    for dd in 1..=domain {
                        graph_profile[dd as usize] = self.mins[dd as usize - 1];
                    }
                    let (nq, d_star) = minimize(&graph_profile, self.k, self.gamma, domain);
                    self.outcome = Some((nq_v, d_v, nq, d_star));
                    return StepStatus::halt();
                }
            }
            // Expansion send for `depth`.
            if self.profile.is_empty() {
                self.profile.push(1);
                self.known.insert(self.node);
                self.delta = vec![self.node];
            }
            if !self.delta.is_empty() {
                let payload = Msg::Set(Arc::new(IdSet::from_ids(
                    self.n,
                    self.delta.iter().copied(),
                )));
                let targets: Vec<NodeId> = ctx.neighbors().iter().map(|&(u, _)| u).collect();
                for u in targets {
                    ctx.send_local(u, payload.clone());
                }
            }
            self.delta.clear();
            StepStatus::again()
        } else if pos == 1 {
            // Ball for `depth` is now complete; start the aggregation.
            self.profile.push(self.known.len() as u64);
            debug_assert_eq!(self.profile.len() as u64 - 1, depth);
            let mut agg = AggregateCore::new(
                self.node,
                self.n,
                ctx.round,
                TAG_MIN_BALL,
                MinU64(*self.profile.last().unwrap()),
            );
            agg.on_round(ctx);
            self.agg = Some(agg);
            StepStatus::again()
        } else {
            if let Some(agg) = self.agg.as_mut() {
                agg.on_round(ctx);
            }
            StepStatus::again()
        }
    }
}

/// Distributed computation: every node learns the graph value and its own
/// `(NQ(v), d_v)` exactly. Costs at most `d_star + 1` local flood rounds and
/// `(d_star + 1) * 2 ceil(log2 n)` global rounds.
pub fn nq_distributed(
    g: &WeightedGraph,
    k: u64,
    gamma: u64,
    cfg: &SimConfig,
) -> Result<(NqReport, ExecutionTrace)> {
    validate(g, k, gamma)?;
    let n = g.n();
    let m = ceil_log2(n as u64);
    let programs: Vec<NqProgram> = (1..=n)
        .map(|v| NqProgram {
            node: v,
            n,
            m,
            k,
            gamma,
            known: IdSet::new(n),
            delta: Vec::new(),
            profile: Vec::new(),
            mins: Vec::new(),
            agg: None,
            outcome: None,
        })
        .collect();
    let (progs, trace) = run_engine(g, programs, cfg)?;

    let mut per_node = Vec::with_capacity(n as usize);
    let mut graph_value: Option<(Rat, u32)> = None;
    for p in &progs {
        let (nq_v, d_v, nq, d_star) = p.outcome.expect("protocol halted without an outcome");
        per_node.push(NodeNq {
            node: p.node,
            nq: nq_v,
            d_v,
        });
        // Every node derives the same graph-level answer.
        match graph_value {
            None => graph_value = Some((nq, d_star)),
            Some(gv) => debug_assert_eq!(gv, (nq, d_star)),
        }
    }
    let (value, d_star) = graph_value.unwrap();
    let best = per_node
        .iter()
        .max_by(|a, b| a.nq.cmp(&b.nq).then(b.node.cmp(&a.node)))
        .unwrap();
    let report = NqReport {
        n,
        k,
        gamma,
        value,
        d_star,
        argmax_node: best.node,
        per_node: per_node.clone(),
        rounds: Some(trace.totals.clone()),
    };
    debug_assert_eq!(report.value, best.nq);
    Ok((report, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    fn rat(n: i128, d: i128) -> Rat {
        Rat::new(n, d)
    }

    #[test]
    fn path_nine_all_tokens() {
        let g = generate(GraphKind::Path { n: 9 }, 0).unwrap();
        let r = nq_oracle(&g, 9, 1).unwrap();
        assert_eq!(r.value, rat(3, 1));
        assert_eq!(r.d_star, 2);
        // Middle node trades off at radius 2 as well.
        let (nq5, d5) = nq_node_oracle(&g, 5, 9, 1).unwrap();
        assert_eq!((nq5, d5), (rat(2, 1), 2));
        // Endpoints are the worst nodes.
        assert_eq!(r.argmax_node, 1);
    }

    #[test]
    fn clique_is_perfect() {
        let g = generate(GraphKind::Complete { n: 10 }, 0).unwrap();
        let r = nq_oracle(&g, 10, 1).unwrap();
        assert_eq!(r.value, rat(1, 1));
        assert_eq!(r.d_star, 1);
        assert_eq!(r.argmax_node, 1);
    }

    #[test]
    fn star_center_and_leaves_differ() {
        let g = generate(GraphKind::Star { n: 10 }, 0).unwrap();
        let r = nq_oracle(&g, 10, 1).unwrap();
        assert_eq!(r.value, rat(2, 1));
        assert_eq!(r.d_star, 2);
        assert_eq!(r.argmax_node, 2); // smallest leaf id
        assert_eq!((r.per_node[0].nq, r.per_node[0].d_v), (rat(1, 1), 1));
        assert_eq!((r.per_node[1].nq, r.per_node[1].d_v), (rat(2, 1), 2));
    }

    #[test]
    fn distributed_matches_oracle_on_small_family() {
        for (kind, k, gamma) in [
            (GraphKind::Path { n: 9 }, 9u64, 1u64),
            (GraphKind::Path { n: 17 }, 8, 2),
            (GraphKind::Star { n: 10 }, 10, 1),
            (GraphKind::Complete { n: 10 }, 10, 1),
            (GraphKind::Grid { rows: 5, cols: 5 }, 25, 1),
            (GraphKind::Cycle { n: 12 }, 12, 3),
            (
                GraphKind::Lollipop {
                    clique: 8,
                    tail: 8,
                },
                16,
                1,
            ),
        ] {
            let g = generate(kind, 0).unwrap();
            let oracle = nq_oracle(&g, k, gamma).unwrap();
            let (dist, trace) = nq_distributed(&g, k, gamma, &SimConfig::new(8, 1)).unwrap();
            assert_eq!(oracle.value, dist.value, "{kind:?}");
            assert_eq!(oracle.d_star, dist.d_star, "{kind:?}");
            assert_eq!(oracle.argmax_node, dist.argmax_node, "{kind:?}");
            for (a, b) in oracle.per_node.iter().zip(&dist.per_node) {
                assert_eq!((a.nq, a.d_v), (b.nq, b.d_v), "{kind:?} node {}", a.node);
            }
            // Round budget: (d_star + 2) * (2 ceil(log2 n) + 1).
            let m = ceil_log2(g.n() as u64) as u64;
            let budget = (oracle.d_star as u64 + 2) * (2 * m + 1);
            assert!(
                trace.totals.combined_rounds <= budget,
                "{kind:?}: {} > {budget}",
                trace.totals.combined_rounds
            );
            // Local rounds stay within d_star + 1.
            assert!(trace.totals.local_rounds <= oracle.d_star as u64 + 1);
        }
    }

    #[test]
    fn sqrt_bound_holds_and_is_tight_on_paths() {
        for n in [9u32, 25, 64, 100] {
            let g = generate(GraphKind::Path { n }, 0).unwrap();
            let r = nq_oracle(&g, n as u64, 1).unwrap();
            assert!(within_sqrt_bound(r.value, n as u64, 1));
            assert!(r.value >= Rat::from_integer(1));
            // Paths meet the ceiling up to the additive constant:
            // NQ >= sqrt(n) - 1.
            let lower = r.value + Rat::from_integer(1);
            assert!(
                lower * lower >= Rat::from_integer(n as i128),
                "path {n}: NQ = {}",
                r.value
            );
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let g = generate(GraphKind::Path { n: 4 }, 0).unwrap();
        assert!(nq_oracle(&g, 0, 1).is_err());
        assert!(nq_oracle(&g, 5, 1).is_err());
        assert!(nq_oracle(&g, 2, 0).is_err());
    }
}
