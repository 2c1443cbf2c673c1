//! Message payloads and their bit accounting.
//!
//! Global-channel capacity enforcement needs every payload to have a
//! well-defined size in bits. Each variant documents its accounting rule;
//! sizes are deliberately pessimistic (a field is charged even when its value
//! is small) so that measured traffic upper-bounds any real encoding.

use crate::constants::ceil_log2;
use crate::graph::NodeId;
use crate::util::bit_len;
use std::sync::Arc;

/// A set of node ids `1..=n`, stored as a bitmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdSet {
    n: u32,
    words: Vec<u64>,
}

impl IdSet {
    /// Empty set over ids `1..=n`.
    pub fn new(n: u32) -> Self {
        IdSet {
            n,
            words: vec![0; (n as usize + 64) / 64],
        }
    }

    /// Build from an iterator of ids.
    pub fn from_ids(n: u32, ids: impl IntoIterator<Item = NodeId>) -> Self {
        let mut s = IdSet::new(n);
        for v in ids {
            s.insert(v);
        }
        s
    }

    /// Insert `v`; returns true if it was not present.
    pub fn insert(&mut self, v: NodeId) -> bool {
        debug_assert!(v >= 1 && v <= self.n);
        let (w, b) = (v as usize / 64, v as usize % 64);
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    /// Membership test.
    pub fn contains(&self, v: NodeId) -> bool {
        let (w, b) = (v as usize / 64, v as usize % 64);
        self.words[w] & (1 << b) != 0
    }

    /// Number of ids in the set.
    pub fn len(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// True if no ids are present.
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Union `other` into `self`; returns how many ids were new.
    pub fn union_into(&mut self, other: &IdSet) -> u32 {
        debug_assert_eq!(self.n, other.n);
        let mut added = 0;
        for (a, &b) in self.words.iter_mut().zip(&other.words) {
            added += (b & !*a).count_ones();
            *a |= b;
        }
        added
    }

    /// Ids present in `self` but not in `other`.
    pub fn minus(&self, other: &IdSet) -> IdSet {
        debug_assert_eq!(self.n, other.n);
        IdSet {
            n: self.n,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| a & !b)
                .collect(),
        }
    }

    /// Ascending iterator over the ids in the set.
    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros();
                    bits &= bits - 1;
                    Some((wi * 64 + b as usize) as NodeId)
                }
            })
        })
    }
}

/// Compact multi-item payload for set dissemination: a stream tag plus a
/// batch of values. Each value is charged `max(2 ceil(log2 n), bit_len)`
/// bits (an id-sized item plus its slot header), the tag one such slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemsPayload {
    pub tag: u64,
    pub items: Vec<u64>,
}

/// One simulator message payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Msg {
    /// Tuple of field values; the global-channel workhorse. Each field is
    /// charged `max(field_bits, bit_len(value))` bits.
    Fields(Vec<u64>),
    /// Set of node ids (local flooding). Charged as an id list:
    /// `len * field_bits`.
    Set(Arc<IdSet>),
    /// `(id, value)` rows (local tables). Charged `2 * field_bits` per row.
    Rows(Arc<Vec<(u32, u64)>>),
    /// `(id, id, value)` rows (local tables). Charged `3 * field_bits` per
    /// row.
    Rows3(Arc<Vec<(u32, u32, u64)>>),
    /// Tagged item batch for set dissemination (see [`ItemsPayload`]).
    Items(Arc<ItemsPayload>),
    /// Raw bytes, charged 8 bits per byte.
    Bytes(Arc<Vec<u8>>),
}

impl Msg {
    /// Size of this payload in bits under the sizing rules above. Every
    /// message costs at least one bit: a zero-bit message would be a free
    /// signaling channel.
    pub fn bit_size(&self, n: u32, field_bits: u32) -> u64 {
        let fb = field_bits as u64;
        let raw = match self {
            Msg::Fields(fields) => fields
                .iter()
                .map(|&v| fb.max(bit_len(v) as u64))
                .sum::<u64>(),
            Msg::Set(set) => set.len() as u64 * fb,
            Msg::Rows(rows) => rows.len() as u64 * 2 * fb,
            Msg::Rows3(rows) => rows.len() as u64 * 3 * fb,
            Msg::Items(p) => {
                let slot = 2 * ceil_log2(n.max(2) as u64) as u64;
                slot + p
                    .items
                    .iter()
                    .map(|&v| slot.max(bit_len(v) as u64))
                    .sum::<u64>()
            }
            Msg::Bytes(b) => b.len() as u64 * 8,
        };
        raw.max(1)
    }

    /// Borrow the field tuple if this is a `Fields` payload.
    pub fn as_fields(&self) -> Option<&[u64]> {
        match self {
            Msg::Fields(f) => Some(f),
            _ => None,
        }
    }
}

/// An addressed message in flight.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub src: NodeId,
    pub dst: NodeId,
    /// Send-order counter within `(src, round)`; ties in delivery and
    /// adversary decisions break on `(src, seq)`.
    pub seq: u32,
    pub msg: Msg,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idset_basic_ops() {
        let mut s = IdSet::new(100);
        assert!(s.insert(1));
        assert!(s.insert(64));
        assert!(s.insert(100));
        assert!(!s.insert(64));
        assert_eq!(s.len(), 3);
        assert!(s.contains(100) && !s.contains(99));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 64, 100]);

        let t = IdSet::from_ids(100, [64, 65]);
        let mut u = s.clone();
        assert_eq!(u.union_into(&t), 1);
        assert_eq!(u.len(), 4);
        assert_eq!(s.minus(&t).iter().collect::<Vec<_>>(), vec![1, 100]);
    }

    #[test]
    fn field_sizing_charges_full_fields() {
        // field_bits = 13 for n = 9; small values still cost a field, wide
        // values cost their own length.
        let m = Msg::Fields(vec![1, 1 << 40]);
        assert_eq!(m.bit_size(9, 13), 13 + 41);
    }

    #[test]
    fn items_sizing_uses_id_slots() {
        // n = 16: slot = 2 * 4 = 8 bits; tag + 3 narrow items = 4 slots.
        let m = Msg::Items(Arc::new(ItemsPayload {
            tag: 1,
            items: vec![3, 9, 200],
        }));
        assert_eq!(m.bit_size(16, 16), 8 + 8 + 8 + 8);
    }

    #[test]
    fn every_message_costs_at_least_one_bit() {
        assert_eq!(Msg::Fields(vec![]).bit_size(4, 8), 1);
        assert_eq!(Msg::Bytes(Arc::new(vec![])).bit_size(4, 8), 1);
    }
}
