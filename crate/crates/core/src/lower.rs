//! Hard-instance construction showing why routing k distances to one probe
//! node needs as many rounds as the neighborhood quality predicts.
//!
//! The construction picks the probe `v` with the worst quality value, builds
//! a hop-BFS tree, and partitions the nodes outside `v`'s critical ball into
//! two camps `V1`, `V2` whose weighted distances from `v` differ by a
//! polynomial factor. A random bit string then selects one source per index
//! pair, any solver's answers at `v` decode the string back, and an
//! information-flow audit counts the global bits that crossed into `v`'s
//! ball against the entropy that must have moved.

use crate::error::{Error, Result};
use crate::graph::{ix, NodeId, WeightedGraph};
use crate::nq::nq_oracle;
use crate::sim::ExecutionTrace;
use crate::util::rat_parts;
use crate::Rat;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};

/// A rooted tree over an arbitrary subset of node ids, with subtree sizes.
#[derive(Debug, Clone)]
pub struct RootedTree {
    pub root: NodeId,
    /// Member ids, ascending.
    pub nodes: Vec<NodeId>,
    pub parent: BTreeMap<NodeId, NodeId>,
    pub children: BTreeMap<NodeId, Vec<NodeId>>,
    subtree: BTreeMap<NodeId, u32>,
}

impl RootedTree {
    /// Build from an explicit parent map (the root is the one absent key).
    pub fn from_parents(root: NodeId, parent: &BTreeMap<NodeId, NodeId>) -> Result<RootedTree> {
        let mut nodes: BTreeSet<NodeId> = parent.keys().copied().collect();
        nodes.extend(parent.values().copied());
        nodes.insert(root);
        if parent.contains_key(&root) {
            return Err(Error::validation("root must not have a parent"));
        }
        let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for &v in &nodes {
            children.entry(v).or_default();
        }
        for (&c, &p) in parent {
            children.get_mut(&p).unwrap().push(c);
        }
        let mut tree = RootedTree {
            root,
            nodes: nodes.iter().copied().collect(),
            parent: parent.clone(),
            children,
            subtree: BTreeMap::new(),
        };
        tree.recount()?;
        Ok(tree)
    }

    /// Hop-BFS tree of a graph: each non-root node's parent is its
    /// smallest-id neighbor one hop closer to the root.
    pub fn bfs(g: &WeightedGraph, root: NodeId) -> RootedTree {
        let hops = g.bfs_hops(root);
        let mut parent = BTreeMap::new();
        for v in g.nodes() {
            if v == root {
                continue;
            }
            let h = hops[ix(v)];
            let p = g
                .neighbors(v)
                .iter()
                .map(|&(u, _)| u)
                .filter(|&u| hops[ix(u)] + 1 == h)
                .min()
                .expect("connected graph has a parent candidate");
            parent.insert(v, p);
        }
        RootedTree::from_parents(root, &parent).expect("BFS parent map forms a tree")
    }

    /// Restrict to the subtree rooted at `u`.
    pub fn subtree_at(&self, u: NodeId) -> RootedTree {
        let members = self.descendants(u);
        let parent: BTreeMap<NodeId, NodeId> = members
            .iter()
            .filter(|&&c| c != u)
            .map(|&c| (c, self.parent[&c]))
            .collect();
        RootedTree::from_parents(u, &parent).expect("subtree restriction is a tree")
    }

    fn recount(&mut self) -> Result<()> {
        // Count subtree sizes leaves-first; a cycle or disconnection leaves
        // some node uncounted.
        self.subtree.clear();
        let mut order: Vec<NodeId> = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                return Err(Error::validation("parent map contains a cycle"));
            }
            order.push(v);
            stack.extend(self.children[&v].iter().copied());
        }
        if order.len() != self.nodes.len() {
            return Err(Error::validation("parent map is not connected"));
        }
        for &v in order.iter().rev() {
            let t = 1 + self
                .children[&v]
                .iter()
                .map(|c| self.subtree[c])
                .sum::<u32>();
            self.subtree.insert(v, t);
        }
        Ok(())
    }

    pub fn len(&self) -> u32 {
        self.nodes.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in the subtree rooted at `u`, including `u`.
    pub fn t(&self, u: NodeId) -> u32 {
        self.subtree[&u]
    }

    /// Nodes outside the subtree rooted at `u`.
    pub fn p(&self, u: NodeId) -> u32 {
        self.len() - self.t(u)
    }

    pub fn descendants(&self, u: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![u];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.children[&v].iter().copied());
        }
        out.sort_unstable();
        out
    }
}

/// A node whose removal leaves components of at most half the tree each:
/// descend the heaviest-subtree path and stop at the last node still holding
/// a majority in its subtree.
pub fn splitting_node(tree: &RootedTree) -> NodeId {
    let n = tree.len();
    let mut x = tree.root;
    loop {
        let next = tree.children[&x]
            .iter()
            .copied()
            .max_by_key(|&c| (tree.t(c), std::cmp::Reverse(c)));
        match next {
            Some(s) if 2 * tree.p(s) < n => x = s,
            _ => break,
        }
    }
    debug_assert!(2 * tree.p(x) <= n);
    debug_assert!(tree.children[&x].iter().all(|&c| 2 * tree.t(c) <= n));
    x
}

/// A weight-rigged instance around probe node `v`: reported distances at `v`
/// reveal which of each index pair was tagged as a source.
#[derive(Debug, Clone)]
pub struct HardInstance {
    /// The reweighted graph (same topology as the input).
    pub graph: WeightedGraph,
    pub k: u64,
    pub gamma: u64,
    pub v: NodeId,
    pub d_v: u32,
    /// Nodes outside the ball of radius `d_v - 1` around `v`.
    pub n_prime: u32,
    pub v1: Vec<NodeId>,
    pub v2: Vec<NodeId>,
    /// Tree edges `(parent, child)` that every root-to-V2 tree path crosses.
    pub e_prime: Vec<(NodeId, NodeId)>,
    /// Index pairing: entry `i` holds `(v1_i, v2_i)`.
    pub pairing: Vec<(NodeId, NodeId)>,
    pub k_prime: u64,
    /// Exponent of the distance-separating polynomial `p(n) = n^e`.
    pub p_exponent: u32,
    /// The hop-BFS tree the weights were assigned on.
    pub tree: RootedTree,
}

impl HardInstance {
    /// `n * p(n)`: decode threshold, and the weight of the separator edges.
    pub fn threshold(&self) -> u64 {
        let n = self.graph.n() as u64;
        n * n.pow(self.p_exponent)
    }

    /// Sidecar record accompanying the edge-list export.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "v": self.v,
            "d_v": self.d_v,
            "V1": self.v1,
            "V2": self.v2,
            "E_prime": self.e_prime.iter().map(|&(p, c)| json!([p, c])).collect::<Vec<_>>(),
            "pairing": self.pairing.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
            "k_prime": self.k_prime,
            "p_poly": self.p_exponent,
        })
    }
}

/// One tree of the partition: its root and its node set.
type Part = (NodeId, Vec<NodeId>);

fn part_size(parts: &[Part]) -> u32 {
    parts.iter().map(|(_, m)| m.len() as u32).sum()
}

/// Greedily move trees (given largest-first) into a group until it reaches
/// `quarter_of / 4` nodes.
fn fill_group(pool: &mut Vec<Part>, quarter_of: u32) -> Vec<Part> {
    let mut group = Vec::new();
    while 4 * part_size(&group) < quarter_of {
        group.push(pool.remove(0));
    }
    group
}

/// Split the trees hanging below the ball into two groups of at least an
/// eighth of the outside nodes each, per the two-case analysis: either all
/// trees are small and greedy grouping works, or one tree holds a majority
/// and is cut at its splitting node first.
fn choose_groups(
    tv: &RootedTree,
    mut trees: Vec<Part>,
    n_prime: u32,
) -> (Vec<Part>, Vec<Part>, Option<NodeId>) {
    trees.sort_by_key(|(r, m)| (std::cmp::Reverse(m.len()), *r));
    if let Some(pos) = trees.iter().position(|(_, m)| 2 * m.len() as u32 > n_prime) {
        // One tree holds a strict majority: cut it at its splitting node x.
        // The parent-side remainder may only ever join the first group.
        let (big_root, _) = trees[pos];
        let sub = tv.subtree_at(big_root);
        let n_i = sub.len();
        let x = splitting_node(&sub);
        let in_x: BTreeSet<NodeId> = sub.descendants(x).into_iter().collect();
        let upper: Vec<NodeId> = sub
            .nodes
            .iter()
            .copied()
            .filter(|u| !in_x.contains(u))
            .collect();
        let mut kids: Vec<Part> = sub.children[&x]
            .iter()
            .map(|&c| (c, sub.descendants(c)))
            .collect();
        kids.sort_by_key(|(r, m)| (std::cmp::Reverse(m.len()), *r));
        let upper_large = 4 * upper.len() as u32 >= n_i;
        if upper_large {
            let g1 = vec![(big_root, upper)];
            let g2 = if 4 * kids[0].1.len() as u32 >= n_i {
                vec![kids.remove(0)]
            } else {
                kids
            };
            return (g1, g2, Some(x));
        }
        let num_large = kids.iter().filter(|(_, m)| 4 * m.len() as u32 >= n_i).count();
        let (g1, g2) = match num_large {
            0 => {
                let g1 = fill_group(&mut kids, n_i);
                let g2 = fill_group(&mut kids, n_i);
                (g1, g2)
            }
            1 => {
                let g1 = vec![kids.remove(0)];
                (g1, kids)
            }
            _ => {
                let g1 = vec![kids.remove(0)];
                let g2 = vec![kids.remove(0)];
                (g1, g2)
            }
        };
        return (g1, g2, Some(x));
    }
    // All trees hold at most half the outside nodes each.
    let large: Vec<usize> = trees
        .iter()
        .enumerate()
        .filter(|(_, (_, m))| 4 * m.len() as u32 >= n_prime)
        .map(|(i, _)| i)
        .collect();
    match large.len() {
        l if l >= 2 => {
            let g2 = trees.remove(large[1]);
            let g1 = trees.remove(large[0]);
            (vec![g1], vec![g2], None)
        }
        1 => {
            let g1 = vec![trees.remove(large[0])];
            let g2 = fill_group(&mut trees, n_prime);
            (g1, g2, None)
        }
        _ => {
            let g1 = fill_group(&mut trees, n_prime);
            let g2 = fill_group(&mut trees, n_prime);
            (g1, g2, None)
        }
    }
}

/// Build the hard instance for `(g, k, gamma)` with separation polynomial
/// `p(n) = n^p_exponent`. Rejects graphs where the probe's critical radius
/// is zero or fewer than eight nodes lie outside the ball.
pub fn build_hard_instance(
    g: &WeightedGraph,
    k: u64,
    gamma: u64,
    p_exponent: u32,
) -> Result<HardInstance> {
    if p_exponent < 1 {
        return Err(Error::validation("separation polynomial must be at least n"));
    }
    let n = g.n();
    let report = nq_oracle(g, k, gamma)?;
    let v = report.argmax_node;
    let d_v = report.per_node[ix(v)].d_v;
    // With k <= gamma, a radius of zero would already minimize the probe's
    // objective: the quality parameter is constant and there is no ball to
    // keep information out of.
    if k <= gamma {
        return Err(Error::InstanceRejected(format!(
            "k = {k} <= gamma = {gamma}: trivial regime, no effective radius around probe {v}"
        )));
    }
    let hops = g.bfs_hops(v);
    let outside: Vec<NodeId> = g.nodes().filter(|&u| hops[ix(u)] >= d_v).collect();
    let n_prime = outside.len() as u32;
    if n_prime < 8 {
        return Err(Error::InstanceRejected(format!(
            "only {n_prime} nodes outside the radius-{} ball around {v}; need at least 8",
            d_v - 1
        )));
    }

    let tv = RootedTree::bfs(g, v);
    // Trees hanging below the ball: rooted exactly at hop d_v.
    let trees: Vec<Part> = outside
        .iter()
        .copied()
        .filter(|&r| hops[ix(r)] == d_v)
        .map(|r| (r, tv.descendants(r)))
        .collect();
    debug_assert_eq!(part_size(&trees), n_prime);
    let (g1, g2, _) = choose_groups(&tv, trees, n_prime);

    let v1: Vec<NodeId> = {
        let mut m: Vec<NodeId> = g1.iter().flat_map(|(_, m)| m.iter().copied()).collect();
        m.sort_unstable();
        m
    };
    let v2: Vec<NodeId> = {
        let mut m: Vec<NodeId> = g2.iter().flat_map(|(_, m)| m.iter().copied()).collect();
        m.sort_unstable();
        m
    };
    assert!(8 * v1.len() as u32 >= n_prime && 8 * v2.len() as u32 >= n_prime);
    let e_prime: Vec<(NodeId, NodeId)> = g2.iter().map(|&(r, _)| (tv.parent[&r], r)).collect();

    let p_n = (n as u64).pow(p_exponent);
    let w_mid = n as u64 * p_n;
    let w_heavy = w_mid + n as u64;
    let tree_edge: BTreeSet<(NodeId, NodeId)> = tv
        .parent
        .iter()
        .map(|(&c, &p)| (p.min(c), p.max(c)))
        .collect();
    let sep_edge: BTreeSet<(NodeId, NodeId)> =
        e_prime.iter().map(|&(p, c)| (p.min(c), p.max(c))).collect();
    let edges: Vec<(NodeId, NodeId, u64)> = g
        .edges()
        .into_iter()
        .map(|(a, b, _)| {
            let key = (a.min(b), a.max(b));
            let w = if sep_edge.contains(&key) {
                w_mid
            } else if tree_edge.contains(&key) {
                1
            } else {
                w_heavy
            };
            (a, b, w)
        })
        .collect();
    let graph = WeightedGraph::from_edges(n, w_heavy, &edges)?;

    let k_prime = (k.div_ceil(16)).min(v1.len() as u64).min(v2.len() as u64);
    let pairing: Vec<(NodeId, NodeId)> = (0..k_prime as usize)
        .map(|i| (v1[i], v2[i]))
        .collect();

    Ok(HardInstance {
        graph,
        k,
        gamma,
        v,
        d_v,
        n_prime,
        v1,
        v2,
        e_prime,
        pairing,
        k_prime,
        p_exponent,
        tree: tv,
    })
}

/// Structural and metric checks: group sizes, separator coverage (every
/// tree path from the probe to V2 crosses a separator edge, no path to V1
/// does), and the polynomial distance gap.
pub fn verify_instance(inst: &HardInstance) -> bool {
    let n_ok = 8 * inst.v1.len() as u32 >= inst.n_prime
        && 8 * inst.v2.len() as u32 >= inst.n_prime
        && inst.v1.iter().all(|u| !inst.v2.contains(u));
    let sep: BTreeSet<(NodeId, NodeId)> = inst.e_prime.iter().copied().collect();
    let crossings = |u: NodeId| {
        let mut c = 0;
        let mut cur = u;
        while cur != inst.v {
            let p = inst.tree.parent[&cur];
            if sep.contains(&(p, cur)) {
                c += 1;
            }
            cur = p;
        }
        c
    };
    let paths_ok = inst.v1.iter().all(|&u| crossings(u) == 0)
        && inst.v2.iter().all(|&w| crossings(w) == 1);
    let dist = inst.graph.dijkstra(inst.v);
    let max_v1 = inst.v1.iter().map(|&u| dist[ix(u)]).max().unwrap_or(0);
    let min_v2 = inst.v2.iter().map(|&w| dist[ix(w)]).min().unwrap_or(u64::MAX);
    let gap_ok = max_v1 <= inst.graph.n() as u64 && min_v2 >= inst.threshold();
    n_ok && paths_ok && gap_ok
}

/// A bit string and the source set it selects.
#[derive(Debug, Clone)]
pub struct SourceEncoding {
    pub bits: Vec<bool>,
    /// `sources[i]` is `v1_i` when `bits[i]` is false, else `v2_i`.
    pub sources: Vec<NodeId>,
}

pub fn encode_sources(inst: &HardInstance, bits: &[bool]) -> Result<SourceEncoding> {
    if bits.len() as u64 != inst.k_prime {
        return Err(Error::validation(format!(
            "bit string length {} does not match k' = {}",
            bits.len(),
            inst.k_prime
        )));
    }
    let sources = bits
        .iter()
        .zip(&inst.pairing)
        .map(|(&b, &(a, c))| if b { c } else { a })
        .collect();
    Ok(SourceEncoding {
        bits: bits.to_vec(),
        sources,
    })
}

/// Recover the bit string from distance labels at the probe (index order).
/// Below the threshold decodes 0, above decodes 1; a label exactly on the
/// threshold carries no margin and is rejected.
pub fn decode_from_distances(labels: &[u64], inst: &HardInstance) -> Result<Vec<bool>> {
    if labels.len() as u64 != inst.k_prime {
        return Err(Error::validation(format!(
            "label count {} does not match k' = {}",
            labels.len(),
            inst.k_prime
        )));
    }
    let thr = inst.threshold();
    labels
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d == thr {
                Err(Error::DecodeAmbiguous { index: i, threshold: thr })
            } else {
                Ok(d > thr)
            }
        })
        .collect()
}

/// The round lower bound at the probe node, with both raw terms exposed.
#[derive(Debug, Clone)]
pub struct LbReport {
    /// `min(term_info, term_dist)`; zero in the trivial regime.
    pub value: Rat,
    /// `ceil(k/16) / (N(v, d_v - 1) * gamma)`.
    pub term_info: Rat,
    /// `(d_v - 1)/2 - 1` (may be non-positive).
    pub term_dist: Rat,
    /// The quality-parameter chain value `NQ - 1`.
    pub chain: Rat,
    pub v: NodeId,
    pub d_v: u32,
    pub n_ball: u64,
    pub k_prime: u64,
    /// Critical radius is zero: the bound degenerates to a constant.
    pub trivial: bool,
}

impl LbReport {
    pub fn to_json(&self) -> serde_json::Value {
        let (vn, vd) = rat_parts(self.value);
        let (i_n, i_d) = rat_parts(self.term_info);
        let (d_n, d_d) = rat_parts(self.term_dist);
        let (c_n, c_d) = rat_parts(self.chain);
        json!({
            "value_num": vn, "value_den": vd,
            "term_info_num": i_n, "term_info_den": i_d,
            "term_dist_num": d_n, "term_dist_den": d_d,
            "chain_num": c_n, "chain_den": c_d,
            "v": self.v,
            "d_v": self.d_v,
            "n_ball": self.n_ball,
            "k_prime": self.k_prime,
            "trivial": self.trivial,
        })
    }
}

/// Evaluate the round bound `min(k'/(N gamma), (d_v - 1)/2 - 1)` at the
/// worst probe node, alongside the quality-parameter chain value.
pub fn lb_value(g: &WeightedGraph, k: u64, gamma: u64) -> Result<LbReport> {
    let report = nq_oracle(g, k, gamma)?;
    let v = report.argmax_node;
    let d_v = report.per_node[ix(v)].d_v;
    let chain = report.value - Rat::from_integer(1);
    // k <= gamma: radius zero would minimize the probe objective, the bound
    // degenerates to a constant. Reported with d_v = 0.
    if k <= gamma {
        return Ok(LbReport {
            value: Rat::from_integer(0),
            term_info: Rat::from_integer(0),
            term_dist: Rat::from_integer(0),
            chain,
            v,
            d_v: 0,
            n_ball: 1,
            k_prime: k.div_ceil(16),
            trivial: true,
        });
    }
    let hops = g.bfs_hops(v);
    let n_ball = g.nodes().filter(|&u| hops[ix(u)] < d_v).count() as u64;
    let k_prime = k.div_ceil(16);
    let term_info = Rat::new(k_prime as i128, (n_ball * gamma) as i128);
    let term_dist = Rat::new(d_v as i128 - 1, 2) - Rat::from_integer(1);
    Ok(LbReport {
        value: term_info.min(term_dist),
        term_info,
        term_dist,
        chain,
        v,
        d_v,
        n_ball,
        k_prime,
        trivial: false,
    })
}

/// Aggregate information-flow audit over repeated solver runs.
#[derive(Debug, Clone)]
pub struct AuditReport {
    /// Hop separation `h = d_v - 1`.
    pub h: u32,
    /// Nodes within `h - 1` hops of the probe.
    pub ball: Vec<NodeId>,
    pub runs: u64,
    pub successes: u64,
    /// Mean delivered global bits received by the ball per run.
    pub mean_bits: Rat,
    /// `p_hat * k' - 1`: the entropy that must have crossed on average.
    pub entropy_bound: Rat,
    /// `min((p_hat * k' - 1)/(N * gamma), h/2 - 1)` rounds.
    pub bound_rounds: Rat,
    /// Mean bits into the ball meet the entropy bound.
    pub satisfied: bool,
    /// The distance term `h/2 - 1` is non-positive, so the round bound
    /// says nothing.
    pub vacuous: bool,
}

impl AuditReport {
    pub fn to_json(&self) -> serde_json::Value {
        let (mb_n, mb_d) = rat_parts(self.mean_bits);
        let (eb_n, eb_d) = rat_parts(self.entropy_bound);
        let (br_n, br_d) = rat_parts(self.bound_rounds);
        json!({
            "h": self.h,
            "ball_size": self.ball.len(),
            "runs": self.runs,
            "successes": self.successes,
            "mean_bits_num": mb_n, "mean_bits_den": mb_d,
            "entropy_bound_num": eb_n, "entropy_bound_den": eb_d,
            "bound_rounds_num": br_n, "bound_rounds_den": br_d,
            "satisfied": self.satisfied,
            "vacuous": self.vacuous,
        })
    }
}

/// Compare the global bits delivered into the probe's ball against the
/// entropy the successful runs must have moved. `runs` pairs each run's
/// trace with its decode-success flag.
pub fn audit_information_flow(
    inst: &HardInstance,
    runs: &[(ExecutionTrace, bool)],
) -> Result<AuditReport> {
    if runs.is_empty() {
        return Err(Error::validation("audit needs at least one run"));
    }
    let h = inst.d_v - 1;
    let hops = inst.graph.bfs_hops(inst.v);
    let ball: Vec<NodeId> = inst
        .graph
        .nodes()
        .filter(|&u| hops[ix(u)] < h.max(1))
        .collect();
    let n_ball = ball.len() as u64;
    let total_bits: u128 = runs
        .iter()
        .map(|(t, _)| t.global_recv_bits_for(&ball) as u128)
        .sum();
    let successes = runs.iter().filter(|(_, ok)| *ok).count() as u64;
    let n_runs = runs.len() as u64;
    let mean_bits = Rat::new(total_bits as i128, n_runs as i128);
    let p_hat = Rat::new(successes as i128, n_runs as i128);
    let entropy_bound = p_hat * Rat::from_integer(inst.k_prime as i128) - Rat::from_integer(1);
    let term_dist = Rat::new(h as i128, 2) - Rat::from_integer(1);
    let term_info = entropy_bound / Rat::from_integer((n_ball * inst.gamma) as i128);
    Ok(AuditReport {
        h,
        ball,
        runs: n_runs,
        successes,
        mean_bits,
        entropy_bound,
        bound_rounds: term_info.min(term_dist),
        satisfied: mean_bits >= entropy_bound,
        vacuous: term_dist <= Rat::from_integer(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};
    use crate::sim::SimConfig;
    use crate::sp::{solve_k_ell_sp, DistanceMode, SPInstance};
    use crate::util::node_rng;
    use rand::Rng;

    fn path_tree(n: u32) -> RootedTree {
        let parent: BTreeMap<NodeId, NodeId> = (2..=n).map(|v| (v, v - 1)).collect();
        RootedTree::from_parents(1, &parent).unwrap()
    }

    #[test]
    fn splitting_node_on_seven_path_is_the_middle() {
        let t = path_tree(7);
        assert_eq!(splitting_node(&t), 4);
        assert_eq!(t.t(4), 4);
        assert_eq!(t.p(4), 3);
    }

    #[test]
    fn splitting_node_on_star_is_the_center() {
        let parent: BTreeMap<NodeId, NodeId> = (2..=9).map(|v| (v, 1)).collect();
        let t = RootedTree::from_parents(1, &parent).unwrap();
        assert_eq!(splitting_node(&t), 1);
    }

    #[test]
    fn splitting_node_on_balanced_binary_is_the_root() {
        let parent: BTreeMap<NodeId, NodeId> = (2..=7).map(|v| (v, v / 2)).collect();
        let t = RootedTree::from_parents(1, &parent).unwrap();
        assert_eq!(splitting_node(&t), 1);
    }

    #[test]
    fn splitting_node_components_stay_small_on_random_trees() {
        for seed in 0..100u32 {
            let mut rng = node_rng(0xB0B0, seed);
            let n: u32 = rng.gen_range(2..=128);
            let parent: BTreeMap<NodeId, NodeId> =
                (2..=n).map(|v| (v, rng.gen_range(1..v))).collect();
            let t = RootedTree::from_parents(1, &parent).unwrap();
            let x = splitting_node(&t);
            // Components after removing x: each child subtree plus the rest.
            for &c in &t.children[&x] {
                assert!(2 * t.t(c) <= n, "seed {seed}: child {c} too big");
            }
            assert!(2 * t.p(x) <= n, "seed {seed}: parent side too big");
        }
    }

    #[test]
    fn path64_instance_separates_distances() {
        let g = generate(GraphKind::Path { n: 64 }, 0).unwrap();
        let inst = build_hard_instance(&g, 64, 1, 1).unwrap();
        assert!(verify_instance(&inst));
        assert!(8 * inst.v1.len() as u32 >= inst.n_prime);
        assert!(8 * inst.v2.len() as u32 >= inst.n_prime);
        let dist = inst.graph.dijkstra(inst.v);
        let max1 = inst.v1.iter().map(|&u| dist[ix(u)]).max().unwrap();
        let min2 = inst.v2.iter().map(|&w| dist[ix(w)]).min().unwrap();
        assert!(max1 <= 64);
        assert!(min2 >= 64 * 64);
        assert_eq!(inst.k_prime, 4);
    }

    #[test]
    fn small_star_is_rejected() {
        let g = generate(GraphKind::Star { n: 9 }, 0).unwrap();
        let err = build_hard_instance(&g, 9, 1, 1).unwrap_err();
        assert!(matches!(err, Error::InstanceRejected(_)));
    }

    #[test]
    fn binary_tree_weights_use_only_the_three_values() {
        let edges: Vec<(NodeId, NodeId, u64)> =
            (2..=63).map(|v| (v / 2, v, 1)).collect();
        let g = WeightedGraph::from_edges(63, 1, &edges).unwrap();
        let inst = build_hard_instance(&g, 63, 1, 1).unwrap();
        let allowed = [1u64, 63 * 63, 63 * 63 + 63];
        for (_, _, w) in inst.graph.edges() {
            assert!(allowed.contains(&w), "unexpected weight {w}");
        }
        assert!(verify_instance(&inst));
    }

    #[test]
    fn encode_decode_round_trips_on_exact_distances() {
        let g = generate(GraphKind::Path { n: 64 }, 0).unwrap();
        let inst = build_hard_instance(&g, 64, 1, 1).unwrap();
        let dist = inst.graph.dijkstra(inst.v);
        for seed in 0..20u32 {
            let mut rng = node_rng(0xE2C0DE, seed);
            let bits: Vec<bool> = (0..inst.k_prime).map(|_| rng.gen_bool(0.5)).collect();
            let enc = encode_sources(&inst, &bits).unwrap();
            let labels: Vec<u64> = enc.sources.iter().map(|&s| dist[ix(s)]).collect();
            assert_eq!(decode_from_distances(&labels, &inst).unwrap(), bits);
        }
    }

    #[test]
    fn decode_tolerates_polynomial_stretch_and_flags_the_boundary() {
        let g = generate(GraphKind::Path { n: 64 }, 0).unwrap();
        let inst = build_hard_instance(&g, 64, 1, 1).unwrap();
        let dist = inst.graph.dijkstra(inst.v);
        let p_n = 64u64;
        // All-zeros bits, labels inflated by the full allowed factor.
        let bits = vec![false; inst.k_prime as usize];
        let enc = encode_sources(&inst, &bits).unwrap();
        let labels: Vec<u64> = enc
            .sources
            .iter()
            .map(|&s| dist[ix(s)] * (p_n - 1))
            .collect();
        assert_eq!(decode_from_distances(&labels, &inst).unwrap(), bits);
        // A label exactly on the threshold is refused.
        let mut forged = labels;
        forged[0] = inst.threshold();
        assert!(matches!(
            decode_from_distances(&forged, &inst),
            Err(Error::DecodeAmbiguous { .. })
        ));
    }

    #[test]
    fn encode_rejects_wrong_length() {
        let g = generate(GraphKind::Path { n: 64 }, 0).unwrap();
        let inst = build_hard_instance(&g, 64, 1, 1).unwrap();
        assert!(encode_sources(&inst, &[true]).is_err());
    }

    #[test]
    fn lb_value_on_path_100() {
        let g = generate(GraphKind::Path { n: 100 }, 0).unwrap();
        let r = lb_value(&g, 100, 1).unwrap();
        assert!(!r.trivial);
        assert_eq!(r.d_v, 9);
        assert_eq!(r.n_ball, 9);
        assert_eq!(r.k_prime, 7);
        assert_eq!(r.term_info, Rat::new(7, 9));
        assert_eq!(r.term_dist, Rat::from_integer(3));
        assert_eq!(r.value, Rat::new(7, 9));
        // The chain inequality with the implementation's constants.
        assert!(r.value >= r.chain / Rat::from_integer(16) - Rat::new(3, 2));
        assert!(r.value > Rat::from_integer(0));
    }

    #[test]
    fn lb_value_trivial_on_clique_with_large_budget() {
        let g = generate(GraphKind::Complete { n: 10 }, 0).unwrap();
        let r = lb_value(&g, 10, 10).unwrap();
        assert!(r.trivial);
        assert_eq!(r.value, Rat::from_integer(0));
    }

    #[test]
    fn lb_value_tracks_quality_on_lollipop() {
        let g = generate(GraphKind::Lollipop { clique: 100, tail: 100 }, 0).unwrap();
        let r = lb_value(&g, 200, 1).unwrap();
        assert!(!r.trivial);
        assert!(r.value > Rat::from_integer(0));
        assert!(r.value >= r.chain / Rat::from_integer(16) - Rat::new(3, 2));
    }

    #[test]
    fn solver_run_decodes_and_audit_meets_entropy_bound() {
        let g = generate(GraphKind::Path { n: 64 }, 0).unwrap();
        let inst = build_hard_instance(&g, 64, 1, 1).unwrap();
        let mut runs = Vec::new();
        for seed in 0..3u32 {
            let mut rng = node_rng(0xAD17, seed);
            let bits: Vec<bool> = (0..inst.k_prime).map(|_| rng.gen_bool(0.5)).collect();
            let enc = encode_sources(&inst, &bits).unwrap();
            let sp = SPInstance::fixed(64, enc.sources.clone(), vec![inst.v]);
            let (res, trace) = solve_k_ell_sp(
                &inst.graph,
                &sp,
                inst.gamma,
                DistanceMode::ExactReference,
                &SimConfig::new(inst.gamma, seed as u64),
            )
            .unwrap();
            let labels: Vec<u64> = enc
                .sources
                .iter()
                .map(|&s| res.labels[&(inst.v, s)])
                .collect();
            let ok = decode_from_distances(&labels, &inst)
                .map(|x| x == bits)
                .unwrap_or(false);
            assert!(ok, "seed {seed} failed to decode");
            runs.push((trace, ok));
        }
        let audit = audit_information_flow(&inst, &runs).unwrap();
        assert_eq!(audit.successes, 3);
        assert!(audit.satisfied, "mean bits {} below bound", audit.mean_bits);
        assert!(!audit.vacuous);
        assert_eq!(
            audit.entropy_bound,
            Rat::from_integer(inst.k_prime as i128 - 1)
        );
    }

    #[test]
    fn audit_flags_vacuous_separation() {
        // Probe radius 2 gives hop separation h = 1: the distance term dies.
        let g = generate(GraphKind::Star { n: 16 }, 0).unwrap();
        let inst = build_hard_instance(&g, 16, 1, 1).unwrap();
        assert_eq!(inst.d_v, 2);
        assert!(verify_instance(&inst));
        let (_, trace) = crate::nq::nq_distributed(&inst.graph, 16, 1, &SimConfig::new(1, 7)).unwrap();
        let audit = audit_information_flow(&inst, &[(trace, true)]).unwrap();
        assert!(audit.vacuous);
        assert_eq!(audit.ball, vec![inst.v]);
    }
}
