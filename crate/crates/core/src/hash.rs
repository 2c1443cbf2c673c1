//! k-wise independent hash functions from random polynomials over a prime
//! field.
//!
//! A seed is a uniformly random polynomial of degree `< k` over `GF(p)` with
//! `p > 2^max(a, b)`; evaluating it at `k` distinct keys gives `k` independent
//! uniform field values (any `k` point-value pairs determine exactly one
//! polynomial). Outputs are truncated to `b` bits when used as a hash into a
//! power-of-two range; the truncation bias is at most `p mod 2^b / p`, which
//! the prime choices below keep negligible.

use crate::constants::ceil_log2;
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape of a hash family: keys have `domain_bits` bits, outputs
/// `range_bits`, and any `independence` distinct keys hash independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashFamilySpec {
    pub domain_bits: u32,
    pub range_bits: u32,
    pub independence: u32,
}

/// Mersenne prime `2^61 - 1`, the field modulus for wide domains.
pub const MERSENNE_61: u64 = (1u64 << 61) - 1;

/// Smallest prime exceeding `2^bits`. Trial division finds it for
/// `bits <= 30`; for `31..=60` the Mersenne prime `2^61 - 1` is used (it
/// exceeds `2^60`, so it works for every such width). Wider domains are
/// rejected.
pub fn field_prime_above(bits: u32) -> Result<u64> {
    if bits > 60 {
        return Err(Error::validation(format!(
            "hash domains wider than 60 bits are not supported (requested {bits})"
        )));
    }
    if bits > 30 {
        return Ok(MERSENNE_61);
    }
    let mut candidate = (1u64 << bits) + 1;
    loop {
        if is_prime_u64(candidate) {
            return Ok(candidate);
        }
        candidate += 1;
    }
}

fn is_prime_u64(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    if x % 2 == 0 {
        return x == 2;
    }
    let mut d = 3u64;
    while d * d <= x {
        if x % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A sampled hash function: `independence` uniform coefficients over `GF(p)`,
/// lowest degree first (`coeffs[0]` is the constant term).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashSeed {
    pub spec: HashFamilySpec,
    pub prime: u64,
    pub coeffs: Vec<u64>,
}

impl HashSeed {
    /// Draw a uniform seed for the family.
    pub fn sample(spec: HashFamilySpec, rng: &mut impl Rng) -> Result<Self> {
        if spec.independence == 0 {
            return Err(Error::validation("independence must be at least 1"));
        }
        let prime = field_prime_above(spec.domain_bits.max(spec.range_bits))?;
        let coeffs = (0..spec.independence)
            .map(|_| rng.gen_range(0..prime))
            .collect();
        Ok(HashSeed {
            spec,
            prime,
            coeffs,
        })
    }

    /// Build a seed from explicit coefficients (primarily for tests and for
    /// replaying serialized seeds).
    pub fn from_parts(spec: HashFamilySpec, prime: u64, coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.len() != spec.independence as usize {
            return Err(Error::validation("coefficient count != independence"));
        }
        if coeffs.iter().any(|&c| c >= prime) {
            return Err(Error::validation("coefficient outside field"));
        }
        Ok(HashSeed {
            spec,
            prime,
            coeffs,
        })
    }

    /// Polynomial evaluation over the field: result in `[0, p)`.
    pub fn eval_field(&self, key: u64) -> u64 {
        let p = self.prime as u128;
        let x = (key as u128) % p;
        let mut acc: u128 = 0;
        for &c in self.coeffs.iter().rev() {
            acc = (acc * x + c as u128) % p;
        }
        acc as u64
    }

    /// Hash into the `range_bits`-bit range: field evaluation truncated
    /// modulo `2^range_bits`.
    pub fn eval(&self, key: u64) -> u64 {
        let y = self.eval_field(key);
        if self.spec.range_bits >= 64 {
            y
        } else {
            y & ((1u64 << self.spec.range_bits) - 1)
        }
    }

    /// Bits needed to broadcast this seed: one field element per coefficient.
    pub fn seed_bits(&self) -> u64 {
        self.spec.independence as u64 * ceil_log2(self.prime) as u64
    }

    /// Serialize: a big-endian `u32` byte-length prefix, then the spec
    /// (`u16` independence, `u8` domain bits, `u8` range bits), the prime as
    /// a big-endian `u64`, and each coefficient as a big-endian `u64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let body_len = 2 + 1 + 1 + 8 + 8 * self.coeffs.len();
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_be_bytes());
        out.extend_from_slice(&(self.spec.independence as u16).to_be_bytes());
        out.push(self.spec.domain_bits as u8);
        out.push(self.spec.range_bits as u8);
        out.extend_from_slice(&self.prime.to_be_bytes());
        for &c in &self.coeffs {
            out.extend_from_slice(&c.to_be_bytes());
        }
        out
    }

    /// Inverse of [`Self::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |msg: &str| Error::validation(format!("seed bytes: {msg}"));
        if bytes.len() < 4 {
            return Err(fail("truncated length prefix"));
        }
        let body_len = u32::from_be_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let body = &bytes[4..];
        if body.len() != body_len {
            return Err(fail("length prefix mismatch"));
        }
        if body.len() < 12 {
            return Err(fail("truncated header"));
        }
        let independence = u16::from_be_bytes(body[0..2].try_into().unwrap()) as u32;
        let domain_bits = body[2] as u32;
        let range_bits = body[3] as u32;
        let prime = u64::from_be_bytes(body[4..12].try_into().unwrap());
        let coeff_bytes = &body[12..];
        if coeff_bytes.len() != 8 * independence as usize {
            return Err(fail("coefficient block length mismatch"));
        }
        let coeffs: Vec<u64> = coeff_bytes
            .chunks_exact(8)
            .map(|c| u64::from_be_bytes(c.try_into().unwrap()))
            .collect();
        HashSeed::from_parts(
            HashFamilySpec {
                domain_bits,
                range_bits,
                independence,
            },
            prime,
            coeffs,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_polynomial_is_constant() {
        let spec = HashFamilySpec {
            domain_bits: 8,
            range_bits: 3,
            independence: 1,
        };
        let seed = HashSeed::from_parts(spec, field_prime_above(8).unwrap(), vec![5]).unwrap();
        for x in 0..20 {
            assert_eq!(seed.eval(x), 5);
        }
    }

    #[test]
    fn pairwise_example_evaluates_by_horner() {
        // h(x) = (3 + 2x mod 17) mod 16 at x = 4 gives 11.
        let spec = HashFamilySpec {
            domain_bits: 4,
            range_bits: 4,
            independence: 2,
        };
        let seed = HashSeed::from_parts(spec, 17, vec![3, 2]).unwrap();
        assert_eq!(seed.eval_field(4), 11);
        assert_eq!(seed.eval(4), 11);
    }

    #[test]
    fn prime_selection() {
        assert_eq!(field_prime_above(4).unwrap(), 17);
        assert_eq!(field_prime_above(8).unwrap(), 257);
        assert_eq!(field_prime_above(16).unwrap(), 65537);
        assert_eq!(field_prime_above(31).unwrap(), MERSENNE_61);
        assert_eq!(field_prime_above(60).unwrap(), MERSENNE_61);
        assert!(field_prime_above(61).is_err());
        assert!(is_prime_u64(MERSENNE_61));
    }

    #[test]
    fn seed_bit_count() {
        let spec = HashFamilySpec {
            domain_bits: 40,
            range_bits: 10,
            independence: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seed = HashSeed::sample(spec, &mut rng).unwrap();
        assert_eq!(seed.seed_bits(), 3 * 61);
    }

    #[test]
    fn serialization_round_trip() {
        let spec = HashFamilySpec {
            domain_bits: 20,
            range_bits: 12,
            independence: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let seed = HashSeed::sample(spec, &mut rng).unwrap();
        let bytes = seed.to_bytes();
        let back = HashSeed::from_bytes(&bytes).unwrap();
        assert_eq!(seed, back);
        assert!(HashSeed::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn pairwise_uniformity_over_small_field() {
        // Over all p^2 seeds of a degree-<2 polynomial mod 5, each pair of
        // distinct keys maps to each output pair exactly once.
        let p = 5u64;
        let spec = HashFamilySpec {
            domain_bits: 2,
            range_bits: 3,
            independence: 2,
        };
        for x1 in 0..p {
            for x2 in 0..p {
                if x1 == x2 {
                    continue;
                }
                let mut counts = vec![0u32; (p * p) as usize];
                for c0 in 0..p {
                    for c1 in 0..p {
                        let seed =
                            HashSeed::from_parts(spec, p, vec![c0, c1]).unwrap();
                        let y1 = seed.eval_field(x1);
                        let y2 = seed.eval_field(x2);
                        counts[(y1 * p + y2) as usize] += 1;
                    }
                }
                assert!(counts.iter().all(|&c| c == 1));
            }
        }
    }
}
