//! In-memory ordered write buffer.
//!
//! The memtable keeps at most one entry per key (latest sequence number
//! wins) and tracks an approximate byte footprint. While `Active` it never
//! grows past its flush threshold: a put that would exceed the threshold
//! fails with [`MemtableError::Full`] and the caller rotates to a fresh
//! memtable first.

use crate::types::{Key, SeqNo, Value};
use std::collections::BTreeMap;
use std::ops::Bound;
use thiserror::Error;

/// Fixed per-entry accounting overhead added on top of key/value bytes.
const ENTRY_OVERHEAD: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MemtableError {
    #[error("memtable is immutable")]
    Immutable,
    #[error("sequence number {attempted} does not exceed {current}")]
    SeqRegression { current: SeqNo, attempted: SeqNo },
    #[error("memtable at flush threshold; rotate before inserting")]
    Full,
    #[error("memtable is empty")]
    Empty,
    #[error("memtable is still active")]
    StillActive,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MemtableState {
    Active,
    Immutable,
}

#[derive(Clone, Debug)]
pub struct Memtable {
    entries: BTreeMap<Key, (SeqNo, Value)>,
    approx_bytes: usize,
    flush_threshold: usize,
    state: MemtableState,
    max_seq: SeqNo,
    min_seq: SeqNo,
}

impl Memtable {
    pub fn new(flush_threshold: usize) -> Self {
        Memtable {
            entries: BTreeMap::new(),
            approx_bytes: 0,
            flush_threshold,
            state: MemtableState::Active,
            max_seq: 0,
            min_seq: u64::MAX,
        }
    }

    pub fn state(&self) -> MemtableState {
        self.state
    }

    pub fn approx_bytes(&self) -> usize {
        self.approx_bytes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest sequence number inserted, or 0 if empty.
    pub fn max_seq(&self) -> SeqNo {
        self.max_seq
    }

    pub fn min_seq(&self) -> SeqNo {
        if self.entries.is_empty() {
            0
        } else {
            self.min_seq
        }
    }

    fn entry_bytes(key: &[u8], value: &Value) -> usize {
        key.len() + value.len() + ENTRY_OVERHEAD
    }

    /// Whether inserting `(key, value)` would keep the memtable within its
    /// flush threshold. A single oversized entry always fits an empty
    /// memtable, otherwise nothing could ever be written.
    pub fn fits(&self, key: &[u8], value: &Value) -> bool {
        if self.entries.is_empty() {
            return true;
        }
        let added = Self::entry_bytes(key, value);
        let replaced = self
            .entries
            .get(key)
            .map(|(_, v)| Self::entry_bytes(key, v))
            .unwrap_or(0);
        self.approx_bytes + added - replaced <= self.flush_threshold
    }

    /// Insert or replace an entry. Fails with [`MemtableError::Full`] when
    /// the insert would push `approx_bytes` past the flush threshold; the
    /// caller rotates and retries on a fresh memtable.
    pub fn put(&mut self, key: Key, seq: SeqNo, value: Value) -> Result<(), MemtableError> {
        if self.state != MemtableState::Active {
            return Err(MemtableError::Immutable);
        }
        if seq <= self.max_seq {
            return Err(MemtableError::SeqRegression { current: self.max_seq, attempted: seq });
        }
        if !self.fits(&key, &value) {
            return Err(MemtableError::Full);
        }
        let added = Self::entry_bytes(&key, &value);
        if let Some((_, old)) = self.entries.insert(key.clone(), (seq, value)) {
            self.approx_bytes -= Self::entry_bytes(&key, &old);
        }
        self.approx_bytes += added;
        self.max_seq = seq;
        self.min_seq = self.min_seq.min(seq);
        Ok(())
    }

    pub fn get(&self, key: &[u8]) -> Option<(SeqNo, &Value)> {
        self.entries.get(key).map(|(s, v)| (*s, v))
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&Key, SeqNo, &Value)> {
        self.entries.iter().map(|(k, (s, v))| (k, *s, v))
    }

    /// Entries with keys in `[lower, upper)`, in key order.
    pub fn range(
        &self,
        lower: &[u8],
        upper: Option<&[u8]>,
    ) -> impl Iterator<Item = (&Key, SeqNo, &Value)> {
        let lo = Bound::Included(Key::copy_from_slice(lower));
        let hi = match upper {
            Some(u) => Bound::Excluded(Key::copy_from_slice(u)),
            None => Bound::Unbounded,
        };
        self.entries.range((lo, hi)).map(|(k, (s, v))| (k, *s, v))
    }

    /// Seal the memtable; further puts are rejected.
    pub fn freeze(&mut self) {
        self.state = MemtableState::Immutable;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bytes::Bytes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn b(s: &str) -> Bytes {
        Bytes::copy_from_slice(s.as_bytes())
    }

    fn data(s: &str) -> Value {
        Value::Data(b(s))
    }

    #[test]
    fn single_insert_then_get() {
        let mut mt = Memtable::new(1 << 20);
        mt.put(b("a"), 1, data("x")).unwrap();
        let (seq, v) = mt.get(b"a").unwrap();
        assert_eq!(seq, 1);
        assert_eq!(v, &data("x"));
    }

    #[test]
    fn latest_seq_wins() {
        let mut mt = Memtable::new(1 << 20);
        mt.put(b("a"), 1, data("x")).unwrap();
        mt.put(b("a"), 2, data("y")).unwrap();
        let (seq, v) = mt.get(b"a").unwrap();
        assert_eq!(seq, 2);
        assert_eq!(v, &data("y"));
        assert_eq!(mt.len(), 1);
    }

    #[test]
    fn seq_regression_rejected() {
        let mut mt = Memtable::new(1 << 20);
        mt.put(b("a"), 5, data("x")).unwrap();
        let err = mt.put(b("b"), 5, data("y")).unwrap_err();
        assert_eq!(err, MemtableError::SeqRegression { current: 5, attempted: 5 });
    }

    #[test]
    fn immutable_rejects_puts() {
        let mut mt = Memtable::new(1 << 20);
        mt.put(b("a"), 1, data("x")).unwrap();
        mt.freeze();
        assert_eq!(mt.put(b("b"), 2, data("y")).unwrap_err(), MemtableError::Immutable);
    }

    #[test]
    fn full_signals_rotation_before_threshold_exceeded() {
        let mut mt = Memtable::new(64);
        mt.put(b("a"), 1, Value::Data(Bytes::from(vec![0u8; 30]))).unwrap();
        assert!(mt.approx_bytes() <= 64);
        let err = mt.put(b("b"), 2, Value::Data(Bytes::from(vec![0u8; 30]))).unwrap_err();
        assert_eq!(err, MemtableError::Full);
        assert!(mt.approx_bytes() <= 64);
    }

    #[test]
    fn oversized_entry_fits_empty_memtable() {
        let mut mt = Memtable::new(16);
        mt.put(b("a"), 1, Value::Data(Bytes::from(vec![0u8; 100]))).unwrap();
        assert_eq!(mt.len(), 1);
    }

    #[test]
    fn tombstone_distinct_from_empty() {
        let mut mt = Memtable::new(1 << 20);
        mt.put(b("a"), 1, Value::Data(Bytes::new())).unwrap();
        mt.put(b("b"), 2, Value::Tombstone).unwrap();
        assert!(!mt.get(b"a").unwrap().1.is_tombstone());
        assert!(mt.get(b"b").unwrap().1.is_tombstone());
    }

    // 10k random puts compared against a plain sorted-map oracle.
    #[test]
    fn random_puts_match_sorted_map_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut mt = Memtable::new(usize::MAX);
        let mut oracle: std::collections::BTreeMap<Vec<u8>, (u64, Vec<u8>)> =
            Default::default();
        for seq in 1..=10_000u64 {
            let k = format!("key{:05}", rng.gen_range(0..4000u32)).into_bytes();
            let v = vec![rng.gen::<u8>(); rng.gen_range(0..32)];
            mt.put(Bytes::from(k.clone()), seq, Value::Data(Bytes::from(v.clone()))).unwrap();
            oracle.insert(k, (seq, v));
        }
        assert_eq!(mt.len(), oracle.len());
        for ((mk, ms, mv), (ok, (os, ov))) in mt.iter().zip(oracle.iter()) {
            assert_eq!(mk.as_ref(), ok.as_slice());
            assert_eq!(ms, *os);
            assert_eq!(mv.as_data().unwrap().as_ref(), ov.as_slice());
        }
    }
}
