//! Small shared utilities: seed derivation, bit lengths, rational helpers.

use crate::Rat;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; used to derive independent sub-seeds from one master
/// seed without correlated low bits.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed for a labeled phase of a pipeline run.
pub fn derive_seed(master: u64, phase: u64) -> u64 {
    mix64(master ^ mix64(phase.wrapping_add(0xa5a5_5a5a_0f0f_f0f0)))
}

/// Deterministic per-node RNG: independent streams for distinct
/// `(seed, node)` pairs within one protocol phase.
pub fn node_rng(seed: u64, node: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed).wrapping_add(mix64(node as u64 + 1)))
}

/// Number of bits needed to write `x` in binary (`0` needs 1 bit here, since
/// a transmitted field is never empty).
pub fn bit_len(x: u64) -> u32 {
    if x == 0 {
        1
    } else {
        64 - x.leading_zeros()
    }
}

/// Exact rational from unsigned parts (`den > 0`).
pub fn rat_u(num: u64, den: u64) -> Rat {
    assert!(den > 0, "zero denominator");
    Rat::new(num as i128, den as i128)
}

/// Ceiling of a non-negative rational as u64.
pub fn rat_ceil_u64(r: Rat) -> u64 {
    assert!(*r.numer() >= 0, "negative rational");
    let c = r.ceil();
    u64::try_from(c.to_integer()).expect("ceil out of u64 range")
}

/// Serialize a rational as a reduced `(num, den)` pair of i64 for JSON
/// output. Panics if the reduced value does not fit, which cannot happen for
/// the parameter ranges this crate accepts (ids, weights, and counts all fit
/// in 64 bits and every reported rational is a quotient of such values).
pub fn rat_parts(r: Rat) -> (i64, i64) {
    let num = i64::try_from(*r.numer()).expect("rational numerator out of i64 range");
    let den = i64::try_from(*r.denom()).expect("rational denominator out of i64 range");
    (num, den)
}

/// Integer square root (floor) of a u64.
pub fn isqrt(x: u64) -> u64 {
    if x < 2 {
        return x;
    }
    let mut r = (x as f64).sqrt() as u64;
    while (r as u128) * (r as u128) > x as u128 {
        r -= 1;
    }
    while ((r + 1) as u128) * ((r + 1) as u128) <= x as u128 {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::RngCore;

    #[test]
    fn bit_len_examples() {
        assert_eq!(bit_len(0), 1);
        assert_eq!(bit_len(1), 1);
        assert_eq!(bit_len(2), 2);
        assert_eq!(bit_len(255), 8);
        assert_eq!(bit_len(256), 9);
    }

    #[test]
    fn node_rngs_are_deterministic_and_distinct() {
        let a1 = node_rng(7, 1).next_u64();
        let a2 = node_rng(7, 1).next_u64();
        let b = node_rng(7, 2).next_u64();
        let c = node_rng(8, 1).next_u64();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert_ne!(a1, c);
    }

    #[test]
    fn isqrt_exact_and_floor() {
        for x in 0..2000u64 {
            let r = isqrt(x);
            assert!(r * r <= x && (r + 1) * (r + 1) > x, "x = {x}");
        }
        assert_eq!(isqrt(u64::MAX), (1u64 << 32) - 1);
    }

    #[test]
    fn rat_ceil_matches_integer_division() {
        assert_eq!(rat_ceil_u64(rat_u(7, 2)), 4);
        assert_eq!(rat_ceil_u64(rat_u(8, 2)), 4);
        assert_eq!(rat_ceil_u64(rat_u(0, 5)), 0);
    }
}
