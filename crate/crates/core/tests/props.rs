//! Randomized property checks for the pure algebraic building blocks:
//! integer helpers, load splitting, key packing, hash-seed serialization,
//! target sampling, and tree splitting.

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;

use hybridsim_core::constants::{batch_size, ceil_log2, field_bits};
use hybridsim_core::hash::{field_prime_above, HashFamilySpec, HashSeed};
use hybridsim_core::lower::{splitting_node, RootedTree};
use hybridsim_core::routing::{pack_key, split_even};
use hybridsim_core::sp::sample_iid_targets;
use hybridsim_core::util::{bit_len, isqrt, node_rng};

proptest! {
    #[test]
    fn isqrt_is_the_exact_floor(x in any::<u64>()) {
        let r = isqrt(x) as u128;
        prop_assert!(r * r <= x as u128);
        prop_assert!((r + 1) * (r + 1) > x as u128);
    }

    #[test]
    fn bit_len_is_the_binary_width(x in any::<u64>()) {
        let w = bit_len(x);
        if x == 0 {
            prop_assert_eq!(w, 1);
        } else {
            prop_assert!(x >> (w - 1) == 1, "x = {x}, width = {w}");
        }
    }

    #[test]
    fn ceil_log2_brackets_its_argument(x in 1u64..) {
        let c = ceil_log2(x);
        prop_assert!(c <= 64);
        if c < 64 {
            prop_assert!(1u128 << c >= x as u128);
        }
        if c > 0 {
            prop_assert!(1u128 << (c - 1) < x as u128);
        }
    }

    #[test]
    fn field_bits_covers_four_id_fields(n in 2u32..=1_000_000) {
        // A field must hold values up to n^4 (distances under w_max = n^3).
        let fb = field_bits(n);
        prop_assert!(2u128.pow(fb) >= (n as u128).pow(4));
    }

    #[test]
    fn batch_size_fits_the_budget(gamma in 1u64..10_000_000, n in 2u32..100_000) {
        let b = batch_size(gamma, n);
        prop_assert!(b >= 1);
        let m = ceil_log2(n as u64) as u64;
        if b > 1 {
            prop_assert!(8 * m * m * b <= gamma);
        }
    }

    #[test]
    fn split_even_partitions_exactly(k in 0u64..1_000_000, parts in 1u64..500) {
        let v = split_even(k, parts);
        prop_assert_eq!(v.len() as u64, parts);
        prop_assert_eq!(v.iter().sum::<u64>(), k);
        let hi = *v.iter().max().unwrap();
        let lo = *v.iter().min().unwrap();
        prop_assert!(hi - lo <= 1);
    }

    #[test]
    fn pack_key_is_injective(
        i1 in 0u64..1_000_000, i2 in 0u64..1_000_000,
        j1 in 0u64..64, j2 in 0u64..64,
        ell in 1u64..64,
    ) {
        let j1 = j1 % (ell + 1);
        let j2 = j2 % (ell + 1);
        if (i1, j1) != (i2, j2) {
            prop_assert_ne!(pack_key(i1, j1, ell), pack_key(i2, j2, ell));
        } else {
            prop_assert_eq!(pack_key(i1, j1, ell), pack_key(i2, j2, ell));
        }
    }

    #[test]
    fn hash_seed_survives_serialization(
        domain_bits in 1u32..=30,
        independence in 1u32..8,
        raw in any::<u64>(),
    ) {
        let prime = field_prime_above(domain_bits).unwrap();
        let spec = HashFamilySpec {
            domain_bits,
            range_bits: domain_bits,
            independence,
        };
        let mut rng = node_rng(raw, 0);
        let seed = HashSeed::sample(spec, &mut rng).unwrap();
        let back = HashSeed::from_bytes(&seed.to_bytes()).unwrap();
        prop_assert_eq!(&seed, &back);
        for key in [0u64, 1, raw % prime] {
            prop_assert!(seed.eval_field(key) < prime);
            prop_assert!(seed.eval(key) < (1u64 << domain_bits.min(63)) .max(1));
            prop_assert_eq!(seed.eval_field(key), back.eval_field(key));
        }
    }

    #[test]
    fn iid_targets_sorted_unique_in_range(
        n in 2u32..5_000,
        ell in 1u64..64,
        seed in any::<u64>(),
    ) {
        let t = sample_iid_targets(n, ell, seed);
        prop_assert!(!t.is_empty());
        prop_assert!(t.len() as u64 <= ell);
        prop_assert!(t.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(t.iter().all(|&v| (1..=n).contains(&v)));
    }

    #[test]
    fn splitting_node_halves_random_trees(n in 2u32..256, raw in any::<u64>()) {
        let mut rng = node_rng(raw, 1);
        let mut parent = BTreeMap::new();
        for i in 2..=n {
            parent.insert(i, rng.gen_range(1..i));
        }
        let tree = RootedTree::from_parents(1, &parent).unwrap();
        let x = splitting_node(&tree);
        prop_assert!(2 * tree.p(x) <= n);
        for &c in tree.children.get(&x).map_or(&[][..], |v| &v[..]) {
            prop_assert!(2 * tree.t(c) <= n);
        }
    }
}
