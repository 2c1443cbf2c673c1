//! Execution traces: per-round traffic records, capacity metering, and the
//! deterministic JSON export.

use serde::Serialize;
use serde_json::json;

/// Aggregated traffic counters for one run (or several concatenated runs).
#[derive(Debug, Clone, Default, Serialize)]
pub struct TraceTotals {
    /// Rounds in which at least one local-mode message was sent.
    pub local_rounds: u64,
    /// Rounds in which at least one global-mode message was sent.
    pub global_rounds: u64,
    /// Rounds with any traffic at all; a round using both modes counts once.
    pub combined_rounds: u64,
    /// Wall-clock engine rounds elapsed, including silent ones.
    pub engine_rounds: u64,
    pub local_msgs: u64,
    pub local_bits: u64,
    pub global_msgs: u64,
    pub global_bits: u64,
    pub dropped_msgs: u64,
    pub dropped_bits: u64,
}

/// Global-channel bits one node sent and received in one round.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NodeRoundBits {
    pub node: u32,
    pub sent: u64,
    pub recv: u64,
}

/// Traffic in one round. Only rounds with traffic are recorded.
#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub local_msgs: u64,
    pub local_bits: u64,
    pub global_msgs: u64,
    pub global_bits: u64,
    /// Global-channel per-node bits; only nodes with nonzero traffic appear,
    /// ascending by id.
    pub per_node: Vec<NodeRoundBits>,
}

/// A message removed by the capacity adversary.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DropRecord {
    pub round: u64,
    pub src: u32,
    pub dst: u32,
    pub bits: u64,
}

/// Full record of a simulation: sparse round log, drops, totals, and the
/// per-(node, round) capacity high-water marks.
#[derive(Debug, Clone, Serialize)]
pub struct ExecutionTrace {
    pub n: u32,
    pub gamma: u64,
    pub seed: u64,
    /// True when the run metered the global channel instead of enforcing it
    /// (budget below the enforcement threshold).
    pub audit_exempt: bool,
    pub rounds: Vec<RoundRecord>,
    pub dropped: Vec<DropRecord>,
    pub totals: TraceTotals,
    /// Max global bits any single node sent in any single round.
    pub max_node_sent_bits: u64,
    /// Max global bits any single node received in any single round.
    pub max_node_recv_bits: u64,
}

impl ExecutionTrace {
    pub(crate) fn new(n: u32, gamma: u64, seed: u64, audit_exempt: bool) -> Self {
        ExecutionTrace {
            n,
            gamma,
            seed,
            audit_exempt,
            rounds: Vec::new(),
            dropped: Vec::new(),
            totals: TraceTotals::default(),
            max_node_sent_bits: 0,
            max_node_recv_bits: 0,
        }
    }

    /// Append another run's trace, shifting its round numbers to follow this
    /// one. Used to chain protocol phases into one end-to-end record.
    pub fn extend(&mut self, other: &ExecutionTrace) {
        let offset = self.totals.engine_rounds;
        for r in &other.rounds {
            let mut r = r.clone();
            r.round += offset;
            self.rounds.push(r);
        }
        for d in &other.dropped {
            let mut d = *d;
            d.round += offset;
            self.dropped.push(d);
        }
        let t = &other.totals;
        self.totals.local_rounds += t.local_rounds;
        self.totals.global_rounds += t.global_rounds;
        self.totals.combined_rounds += t.combined_rounds;
        self.totals.engine_rounds += t.engine_rounds;
        self.totals.local_msgs += t.local_msgs;
        self.totals.local_bits += t.local_bits;
        self.totals.global_msgs += t.global_msgs;
        self.totals.global_bits += t.global_bits;
        self.totals.dropped_msgs += t.dropped_msgs;
        self.totals.dropped_bits += t.dropped_bits;
        self.max_node_sent_bits = self.max_node_sent_bits.max(other.max_node_sent_bits);
        self.max_node_recv_bits = self.max_node_recv_bits.max(other.max_node_recv_bits);
        self.audit_exempt = self.audit_exempt || other.audit_exempt;
    }

    /// Total global-channel bits received, over the whole run, by the given
    /// nodes (pass a sorted-or-not list; duplicates are ignored).
    pub fn global_recv_bits_for(&self, nodes: &[u32]) -> u64 {
        let set: std::collections::BTreeSet<u32> = nodes.iter().copied().collect();
        self.rounds
            .iter()
            .flat_map(|r| r.per_node.iter())
            .filter(|b| set.contains(&b.node))
            .map(|b| b.recv)
            .sum()
    }

    /// Deterministic JSON form: fixed key order, sparse per-round records,
    /// per-node bits as `[node, sent, recv]` triples parallel to `rounds`.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n": self.n,
            "gamma": self.gamma,
            "seed": self.seed,
            "audit_exempt": self.audit_exempt,
            "rounds": self.rounds.iter().map(|r| json!({
                "round": r.round,
                "local_msgs": r.local_msgs,
                "local_bits": r.local_bits,
                "global_msgs": r.global_msgs,
                "global_bits": r.global_bits,
            })).collect::<Vec<_>>(),
            "per_node_bits": self.rounds.iter().map(|r| {
                r.per_node.iter().map(|b| json!([b.node, b.sent, b.recv])).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "dropped": self.dropped.iter().map(|d| json!({
                "round": d.round,
                "src": d.src,
                "dst": d.dst,
                "bits": d.bits,
            })).collect::<Vec<_>>(),
            "totals": {
                "local": self.totals.local_rounds,
                "global": self.totals.global_rounds,
                "combined": self.totals.combined_rounds,
                "engine_rounds": self.totals.engine_rounds,
                "local_msgs": self.totals.local_msgs,
                "local_bits": self.totals.local_bits,
                "global_msgs": self.totals.global_msgs,
                "global_bits": self.totals.global_bits,
                "dropped_msgs": self.totals.dropped_msgs,
                "dropped_bits": self.totals.dropped_bits,
                "max_node_sent_bits": self.max_node_sent_bits,
                "max_node_recv_bits": self.max_node_recv_bits,
            },
        })
    }
}
