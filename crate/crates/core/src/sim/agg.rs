//! Global-channel aggregation and broadcast over a binomial tree.
//!
//! With ranks `r = id - 1`, reduce level `j` has every rank with
//! `r mod 2^(j+1) == 2^j` send its accumulator to rank `r - 2^j`; after
//! `m = ceil(log2 n)` levels rank 0 holds the combined value. Broadcast
//! level `j` has every rank `r < 2^j` forward the result to `r + 2^j`.
//! Each level is one traffic round, so one aggregation costs exactly `2 m`
//! global rounds (`0` when `n = 1`) and every node sends and receives at
//! most one accumulator-sized message per round.
//!
//! The combining value must be commutative and associative; the schedule
//! fixes the combine order, so results are deterministic either way.

use super::{Ctx, Msg, NodeProgram, StepStatus};
use crate::constants::ceil_log2;
use crate::error::Result;
use crate::graph::WeightedGraph;
use crate::sim::{run_engine, ExecutionTrace, SimConfig};

/// A value that can ride the aggregation tree: a fixed-width field encoding
/// plus a commutative, associative combine.
pub trait AggValue: Clone {
    /// Number of `u64` fields in the encoding.
    const WIDTH: usize;
    fn encode(&self, out: &mut Vec<u64>);
    fn decode(fields: &[u64]) -> Self;
    fn combine(&mut self, other: &Self);
}

/// Max of u64 values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxU64(pub u64);

impl AggValue for MaxU64 {
    const WIDTH: usize = 1;
    fn encode(&self, out: &mut Vec<u64>) {
        out.push(self.0);
    }
    fn decode(fields: &[u64]) -> Self {
        MaxU64(fields[0])
    }
    fn combine(&mut self, other: &Self) {
        self.0 = self.0.max(other.0);
    }
}

/// Min of u64 values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinU64(pub u64);

impl AggValue for MinU64 {
    const WIDTH: usize = 1;
    fn encode(&self, out: &mut Vec<u64>) {
        out.push(self.0);
    }
    fn decode(fields: &[u64]) -> Self {
        MinU64(fields[0])
    }
    fn combine(&mut self, other: &Self) {
        self.0 = self.0.min(other.0);
    }
}

/// Saturating sum of u64 values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SumU64(pub u64);

impl AggValue for SumU64 {
    const WIDTH: usize = 1;
    fn encode(&self, out: &mut Vec<u64>) {
        out.push(self.0);
    }
    fn decode(fields: &[u64]) -> Self {
        SumU64(fields[0])
    }
    fn combine(&mut self, other: &Self) {
        self.0 = self.0.saturating_add(other.0);
    }
}

/// One node's share of an in-flight aggregation. Embed it in a larger
/// program and call [`AggregateCore::on_round`] every engine round from
/// `start` through `start + rounds(n)` inclusive; the result is available on
/// every node once [`AggregateCore::result`] returns `Some`, which happens
/// at round `start + rounds(n)` exactly.
#[derive(Debug, Clone)]
pub struct AggregateCore<T: AggValue> {
    rank: u64,
    n: u64,
    m: u32,
    start: u64,
    tag: u64,
    acc: T,
    have_acc: bool,
    result: Option<T>,
}

impl<T: AggValue> AggregateCore<T> {
    /// Traffic rounds one aggregation takes on `n` nodes.
    pub fn rounds(n: u32) -> u64 {
        2 * ceil_log2(n as u64) as u64
    }

    /// Set up an aggregation whose first traffic round is `start`. Messages
    /// are tagged with `tag` so concurrent streams can share inboxes.
    pub fn new(node: u32, n: u32, start: u64, tag: u64, value: T) -> Self {
        AggregateCore {
            rank: (node - 1) as u64,
            n: n as u64,
            m: ceil_log2(n as u64),
            start,
            tag,
            acc: value,
            have_acc: true,
            result: None,
        }
    }

    /// Whether the aggregation has delivered its result on this node.
    pub fn done(&self) -> bool {
        self.result.is_some()
    }

    /// The combined value, once [`Self::done`].
    pub fn result(&self) -> Option<&T> {
        self.result.as_ref()
    }

    /// Engine round in which `result` becomes available on every node.
    pub fn finish_round(&self) -> u64 {
        self.start + Self::rounds(self.n as u32)
    }

    /// Process one engine round: absorb tagged arrivals from the global
    /// inbox, then emit this level's sends. Rounds outside
    /// `[start, finish_round]` are ignored, so callers may simply invoke it
    /// unconditionally.
    pub fn on_round(&mut self, ctx: &mut Ctx<'_>) {
        let round = ctx.round;
        if round < self.start || round > self.finish_round() || self.n == 1 {
            if self.n == 1 && round >= self.start && self.result.is_none() {
                self.result = Some(self.acc.clone());
            }
            return;
        }

        // Absorb arrivals (sent in the previous round).
        let mut inbound: Vec<T> = Vec::new();
        for env in ctx.inbox_global() {
            if let Some(fields) = env.msg.as_fields() {
                if fields.first() == Some(&self.tag) {
                    inbound.push(T::decode(&fields[1..]));
                }
            }
        }
        let rel = round - self.start;
        if rel <= self.m as u64 {
            // Reduce phase arrival: combine into the accumulator.
            for v in inbound {
                self.acc.combine(&v);
            }
        } else {
            // Broadcast phase arrival: adopt the final value.
            if let Some(v) = inbound.into_iter().next() {
                self.result = Some(v.clone());
                self.acc = v;
                self.have_acc = true;
            }
        }

        if rel < self.m as u64 {
            // Reduce level `rel`: send up if this rank's bit says so.
            let j = rel;
            if self.have_acc && self.rank % (1 << (j + 1)) == (1 << j) {
                let dst = (self.rank - (1 << j) + 1) as u32;
                let mut fields = vec![self.tag];
                self.acc.encode(&mut fields);
                ctx.send_global(dst, Msg::Fields(fields));
                self.have_acc = false;
            }
        } else if rel < 2 * self.m as u64 {
            // Broadcast level `rel - m`.
            let j = rel - self.m as u64;
            if self.rank == 0 && self.result.is_none() {
                // Rank 0 finished reducing at rel == m.
                self.result = Some(self.acc.clone());
            }
            if self.result.is_some() && self.rank < (1 << j) {
                let dst_rank = self.rank + (1 << j);
                if dst_rank < self.n {
                    let mut fields = vec![self.tag];
                    self.acc.encode(&mut fields);
                    ctx.send_global(dst_rank as u32 + 1, Msg::Fields(fields));
                }
            }
        } else if self.rank == 0 && self.result.is_none() {
            self.result = Some(self.acc.clone());
        }
    }
}

/// Standalone program wrapping one [`AggregateCore`].
struct AggregateProgram<T: AggValue> {
    core: AggregateCore<T>,
}

impl<T: AggValue> NodeProgram for AggregateProgram<T> {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> StepStatus {
        self.core.on_round(ctx);
        if ctx.round >= self.core.finish_round() {
            debug_assert!(self.core.done());
            StepStatus::halt()
        } else {
            StepStatus::again()
        }
    }
}

/// Aggregation operator for [`aggregate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggOp {
    Max,
    Sum,
}

/// Combine one `u64` per node over the global channel; all nodes learn the
/// result. Costs exactly `2 ceil(log2 n)` global rounds.
pub fn aggregate(
    g: &WeightedGraph,
    values: &[u64],
    op: AggOp,
    cfg: &SimConfig,
) -> Result<(u64, ExecutionTrace)> {
    let n = g.n();
    if values.len() != n as usize {
        return Err(crate::error::Error::validation(format!(
            "{} values for {} nodes",
            values.len(),
            n
        )));
    }
    match op {
        AggOp::Max => {
            let programs: Vec<AggregateProgram<MaxU64>> = (1..=n)
                .map(|v| AggregateProgram {
                    core: AggregateCore::new(v, n, 1, 0, MaxU64(values[(v - 1) as usize])),
                })
                .collect();
            let (progs, trace) = run_engine(g, programs, cfg)?;
            let results: Vec<u64> = progs
                .iter()
                .map(|p| p.core.result().expect("aggregation incomplete").0)
                .collect();
            debug_assert!(results.windows(2).all(|w| w[0] == w[1]));
            Ok((results[0], trace))
        }
        AggOp::Sum => {
            let programs: Vec<AggregateProgram<SumU64>> = (1..=n)
                .map(|v| AggregateProgram {
                    core: AggregateCore::new(v, n, 1, 0, SumU64(values[(v - 1) as usize])),
                })
                .collect();
            let (progs, trace) = run_engine(g, programs, cfg)?;
            let results: Vec<u64> = progs
                .iter()
                .map(|p| p.core.result().expect("aggregation incomplete").0)
                .collect();
            debug_assert!(results.windows(2).all(|w| w[0] == w[1]));
            Ok((results[0], trace))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    #[test]
    fn sum_and_max_on_assorted_sizes() {
        for n in [1u32, 2, 3, 5, 8, 13, 16, 31, 40] {
            let g = generate(GraphKind::Path { n }, 0).unwrap();
            let values: Vec<u64> = (1..=n as u64).map(|v| v * v % 97).collect();
            let cfg = SimConfig::new(1, 3);
            let (sum, trace) = aggregate(&g, &values, AggOp::Sum, &cfg).unwrap();
            assert_eq!(sum, values.iter().sum::<u64>(), "n = {n}");
            let expected_rounds = 2 * ceil_log2(n as u64) as u64;
            assert_eq!(trace.totals.global_rounds, expected_rounds, "n = {n}");
            assert_eq!(trace.totals.combined_rounds, expected_rounds);
            assert_eq!(trace.totals.local_rounds, 0);

            let (max, _) = aggregate(&g, &values, AggOp::Max, &cfg).unwrap();
            assert_eq!(max, *values.iter().max().unwrap());
        }
    }

    #[test]
    fn single_node_takes_zero_rounds() {
        let g = generate(GraphKind::Path { n: 1 }, 0).unwrap();
        let (sum, trace) = aggregate(&g, &[41], AggOp::Sum, &SimConfig::new(4, 0)).unwrap();
        assert_eq!(sum, 41);
        assert_eq!(trace.totals.combined_rounds, 0);
    }

    #[test]
    fn per_round_agg_traffic_fits_small_budgets() {
        // Binomial levels send one accumulator per node per round, so even a
        // modest enforced budget passes without drops.
        let g = generate(GraphKind::Path { n: 64 }, 0).unwrap();
        let mut cfg = SimConfig::new(8 * 6 * 6, 3); // exactly the enforcement threshold
        cfg.policy = crate::sim::ViolationPolicy::AuditFail;
        let values: Vec<u64> = (0..64).collect();
        let (sum, trace) = aggregate(&g, &values, AggOp::Sum, &cfg).unwrap();
        assert_eq!(sum, 2016);
        assert!(!trace.audit_exempt);
        assert_eq!(trace.totals.dropped_msgs, 0);
    }
}
