//! Pinned protocol constants.
//!
//! Every tunable in the protocol stack lives here with the rationale for its
//! value, so that round budgets, sampling rates, and concentration thresholds
//! are auditable in one place instead of being scattered magic numbers.

/// Exponent `c` in "with high probability": failure probability targets are
/// of the form `n^-c`. All sampling rates and load thresholds scale with it.
/// `2` keeps failures negligible at the instance sizes the test suite uses
/// while keeping helper sets and retry budgets small.
pub const DEFAULT_WHP_EXPONENT: u32 = 2;

/// Per-(node, round) load threshold for hashed work assignment is
/// `(1 + 3c) * expected`. The additive `3c` comes from a multiplicative
/// Chernoff bound: for sums of k-wise independent indicators with mean `mu >=
/// ln n`, `Pr[X > (1+3c) mu] <= n^-c`. With `c = 2` the factor is 7.
pub const LOAD_FACTOR_NUM: u32 = 1 + 3 * DEFAULT_WHP_EXPONENT;

/// A routed token occupies at most this many header/payload fields, each of
/// [`field_bits`] bits: (source id, target index, payload, sequencing slack).
pub const TOKEN_FIELDS: u64 = 4;

/// Global-channel batch size divisor: one token with its acknowledgment
/// bookkeeping costs at most `8 * ceil(log2 n)^2` bits per round (at most 4
/// fields of up to `2 ceil(log2 n)` bits each, doubled for the reply
/// direction), so a budget of `gamma` bits moves
/// `max(1, gamma / (8 ceil(log2 n)^2))` tokens per round.
pub const BATCH_BITS_PER_TOKEN_FACTOR: u64 = 8;

/// Helper-set oversampling factor: membership probability is
/// `min(1, (k / (gamma * NQ)) * (8 c ln n) / |C|)` over a cluster `C`. The
/// `8 c ln n` factor keeps the sampled set within a factor 2 of its mean with
/// probability `1 - n^-c` (multiplicative Chernoff at mean `>= 8 c ln n`
/// halves to `4 c ln n`).
pub const HELPER_OVERSAMPLE_FACTOR: u64 = 8;

/// Lower statistical bound checked on sampled helper sets: at least
/// `4 c ln n * k / (gamma * NQ)` members (half the sampling mean).
pub const HELPER_LOWER_FACTOR: u64 = HELPER_OVERSAMPLE_FACTOR / 2;

/// Upper statistical bound on how many helper sets one node joins:
/// `16 c ln n` (twice the per-node membership mean, again Chernoff).
pub const MEMBERSHIP_CAP_FACTOR: u64 = 2 * HELPER_OVERSAMPLE_FACTOR;

/// Fraction of the `k` sources the lower-bound instance keeps on each side of
/// its balanced partition: `k' = ceil(k / 16)`. The split loses a factor 2
/// (two sides), the balanced-partition guarantee another 8 (each side keeps
/// at least `floor(n'/8)` subtree nodes).
pub const SOURCE_FRACTION_DIVISOR: u64 = 16;

/// Balanced tree partitions guarantee `min(|V1|, |V2|) >= floor(n'/8)` where
/// `n'` counts nodes below the splitting node.
pub const PARTITION_FRACTION_DIVISOR: u32 = 8;

/// Weight-range exponent: edge weights are polynomially bounded by
/// `n^WEIGHT_RANGE_EXPONENT`, which caps the default weight range `n^2 + n`
/// used by the lower-bound forge and sizes one message field.
pub const WEIGHT_RANGE_EXPONENT: u32 = 3;

/// Rounds with `gamma < AUDIT_EXEMPT_FACTOR * ceil(log2 n)^2` run the global
/// channel in *metered* mode: capacities are recorded and reported but not
/// enforced, because a single field-sized control message already exceeds
/// tiny budgets and strict enforcement would deadlock every protocol. At or
/// above the threshold, capacities are enforced per the violation policy.
pub const AUDIT_EXEMPT_FACTOR: u64 = 8;

/// Bits in one gossip item: a value plus its field tag,
/// `2 * ceil(log2 n)` bits.
pub const GOSSIP_ITEM_FIELDS: u64 = 2;

/// Returns `ceil(log2 x)` for `x >= 1` (`0` for `x = 1`).
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1, "ceil_log2 undefined for 0");
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Bits reserved for one message field: enough for any id, weight, or
/// distance value in a graph with `n` nodes and weights at most
/// `n^WEIGHT_RANGE_EXPONENT` (distances are at most `n * w_max < n^4`... the
/// field is sized as `ceil(log2(n^(WEIGHT_RANGE_EXPONENT + 1)))` to cover
/// accumulated path weights as well).
pub fn field_bits(n: u32) -> u32 {
    let n = n as u128;
    let bound = n.pow(WEIGHT_RANGE_EXPONENT + 1).max(2);
    128 - (bound - 1).leading_zeros()
}

/// Global-channel tokens movable per round per node:
/// `max(1, gamma / (8 * ceil(log2 n)^2))`.
pub fn batch_size(gamma: u64, n: u32) -> u64 {
    let lg = ceil_log2(n as u64).max(1) as u64;
    (gamma / (BATCH_BITS_PER_TOKEN_FACTOR * lg * lg)).max(1)
}

/// Whether a run at this `(n, gamma)` meters the global channel instead of
/// enforcing it. See [`AUDIT_EXEMPT_FACTOR`].
pub fn audit_exempt(gamma: u64, n: u32) -> bool {
    let lg = ceil_log2(n as u64).max(1) as u64;
    gamma < AUDIT_EXEMPT_FACTOR * lg * lg
}

/// `ln n` as used by all sampling rates (natural logarithm, f64).
pub fn ln_n(n: u32) -> f64 {
    (n.max(2) as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_small_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
    }

    #[test]
    fn batch_size_matches_worked_examples() {
        // gamma = 1568 = 8 * 7^2 * 4 with n = 128 (ceil log2 = 7) moves 4
        // tokens per round; tiny budgets always move at least one.
        assert_eq!(batch_size(1568, 128), 4);
        assert_eq!(batch_size(1, 128), 1);
        assert_eq!(batch_size(8, 9), 1);
    }

    #[test]
    fn load_factor_is_seven_at_default_exponent() {
        assert_eq!(LOAD_FACTOR_NUM, 7);
    }

    #[test]
    fn exemption_threshold() {
        // n = 64: ceil(log2) = 6, threshold 8 * 36 = 288.
        assert!(audit_exempt(287, 64));
        assert!(!audit_exempt(288, 64));
        assert!(audit_exempt(1, 1024));
        assert!(audit_exempt(8, 1024));
    }

    #[test]
    fn field_bits_covers_ids_and_weights() {
        // n = 9: bound 9^4 = 6561, ceil(log2) = 13 bits.
        assert_eq!(field_bits(9), 13);
        // Every id and every legal weight fits in one field.
        for n in [2u32, 9, 64, 1024] {
            let fb = field_bits(n);
            assert!((n as u128) < (1u128 << fb));
            let w_max = (n as u128).pow(WEIGHT_RANGE_EXPONENT);
            assert!(w_max <= (1u128 << fb));
        }
    }
}
