//! Oracle-equivalence tests: a single-range LSM assembled from the crate's
//! pieces must behave exactly like an in-memory sorted map replaying the
//! same op log, across memtable rotations, flushes and compactions.

use bytes::Bytes;
use dlsm_core::levels::TableHandle;
use dlsm_core::sstable::memtable_flush;
use dlsm_core::{
    compact, CompactParams, CompactionPolicy, Key, LevelMetadata, Memtable, MemtableError,
    ObjectId, SsTable, TreeReader, Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::RwLock;

type MemSource = RwLock<HashMap<ObjectId, Bytes>>;

const BLOCK_SIZE: usize = 512;
const BITS_PER_KEY: usize = 10;

/// Single-range LSM harness: everything the LTC does to one range, minus
/// networking and durability.
struct Lsm {
    reader: TreeReader<MemSource>,
    active: Memtable,
    immutables: Vec<Memtable>,
    levels: LevelMetadata,
    policy: CompactionPolicy,
    next_file_no: u64,
    next_seq: u64,
    flush_threshold: usize,
}

impl Lsm {
    fn new(flush_threshold: usize) -> Self {
        Lsm {
            reader: TreeReader::new(MemSource::default()),
            active: Memtable::new(flush_threshold),
            immutables: Vec::new(),
            levels: LevelMetadata::default(),
            policy: CompactionPolicy {
                l0_trigger: 4,
                size_ratio: 10,
                level_base_bytes: 8 * 1024,
                max_levels: 7,
                max_output_bytes: 4 * 1024,
            },
            next_file_no: 1,
            next_seq: 1,
            flush_threshold,
        }
    }

    fn write(&mut self, key: &[u8], value: Value) {
        let seq = self.next_seq;
        self.next_seq += 1;
        loop {
            match self.active.put(Key::copy_from_slice(key), seq, value.clone()) {
                Ok(()) => return,
                Err(MemtableError::Full) => self.rotate(),
                Err(e) => panic!("unexpected memtable error: {e}"),
            }
        }
    }

    fn rotate(&mut self) {
        let mut full = std::mem::replace(&mut self.active, Memtable::new(self.flush_threshold));
        full.freeze();
        self.immutables.push(full);
    }

    fn memtables(&self) -> Vec<&Memtable> {
        // Active first, then immutables newest first.
        let mut v = vec![&self.active];
        v.extend(self.immutables.iter().rev());
        v
    }

    fn get(&self, key: &[u8]) -> Option<Vec<u8>> {
        self.reader
            .get(&self.memtables(), &self.levels, key)
            .unwrap()
            .map(|v| v.as_data().unwrap().to_vec())
    }

    fn scan(&self, lower: &[u8], upper: Option<&[u8]>, limit: usize) -> Vec<(Vec<u8>, Vec<u8>)> {
        self.reader
            .scan(&self.memtables(), &self.levels, lower, upper, limit)
            .unwrap()
            .into_iter()
            .map(|(k, v)| (k.to_vec(), v.as_data().unwrap().to_vec()))
            .collect()
    }

    fn flush_oldest(&mut self) {
        if self.immutables.is_empty() {
            return;
        }
        let mt = self.immutables.remove(0);
        let bytes = memtable_flush(&mt, BLOCK_SIZE, BITS_PER_KEY).unwrap();
        let sst = SsTable::decode(bytes.clone()).unwrap();
        let id = ObjectId::new(1, self.next_file_no);
        self.next_file_no += 1;
        self.reader.source().write().unwrap().insert(id, bytes);
        self.levels.push_l0(TableHandle { id, summary: sst.summary() });
    }

    fn flush_all(&mut self) {
        if !self.active.is_empty() {
            self.rotate();
        }
        while !self.immutables.is_empty() {
            self.flush_oldest();
        }
    }

    fn run_compactions(&mut self) {
        while let Some(task) = self.policy.plan(&self.levels, &HashSet::new()) {
            let inputs: Vec<SsTable> = task
                .inputs
                .iter()
                .map(|h| {
                    let bytes =
                        self.reader.source().read().unwrap().get(&h.id).unwrap().clone();
                    SsTable::decode(bytes).unwrap()
                })
                .collect();
            let params = CompactParams {
                purge_tombstones: task.purge_tombstones,
                max_output_bytes: task.max_output_bytes,
                block_size: BLOCK_SIZE,
                bits_per_key: BITS_PER_KEY,
            };
            let outputs = compact(&inputs, &params).unwrap();
            let mut handles = Vec::new();
            for bytes in outputs {
                let sst = SsTable::decode(bytes.clone()).unwrap();
                let id = ObjectId::new(1, self.next_file_no);
                self.next_file_no += 1;
                self.reader.source().write().unwrap().insert(id, bytes);
                handles.push(TableHandle { id, summary: sst.summary() });
            }
            let input_ids = task.input_ids();
            self.levels.apply_swap(&input_ids, &handles, task.target_level);
            self.levels.validate().unwrap();
            let mut src = self.reader.source().write().unwrap();
            for id in &input_ids {
                src.remove(id);
            }
            drop(src);
            self.reader.evict(&input_ids);
        }
    }
}

fn key_of(i: u32) -> Vec<u8> {
    format!("key{i:06}").into_bytes()
}

#[test]
fn op_log_oracle_equivalence_100k_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    // Small flush threshold so rotations, flushes and compactions all
    // happen many times within the run.
    let mut lsm = Lsm::new(2 * 1024);
    let mut oracle: BTreeMap<Vec<u8>, Vec<u8>> = BTreeMap::new();
    let key_space = 3_000u32;

    for op in 0..100_000u32 {
        let k = key_of(rng.gen_range(0..key_space));
        match rng.gen_range(0..100) {
            0..=44 => {
                let v = vec![rng.gen::<u8>(); rng.gen_range(1..48)];
                lsm.write(&k, Value::Data(Bytes::from(v.clone())));
                oracle.insert(k, v);
            }
            45..=59 => {
                lsm.write(&k, Value::Tombstone);
                oracle.remove(&k);
            }
            60..=94 => {
                assert_eq!(lsm.get(&k), oracle.get(&k).cloned(), "get mismatch at op {op}");
            }
            _ => {
                let hi = key_of(rng.gen_range(0..key_space));
                let (lo, hi) = if k <= hi { (k, hi) } else { (hi, k) };
                let got = lsm.scan(&lo, Some(&hi), 20);
                let want: Vec<(Vec<u8>, Vec<u8>)> = oracle
                    .range(lo.clone()..hi.clone())
                    .take(20)
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                assert_eq!(got, want, "scan mismatch at op {op}");
            }
        }
        // Flush and compact at irregular intervals to shuffle data through
        // every layer of the tree.
        if op % 977 == 0 {
            lsm.flush_all();
        } else if op % 211 == 0 {
            lsm.flush_oldest();
        }
        if op % 1531 == 0 {
            lsm.run_compactions();
        }
    }

    lsm.flush_all();
    lsm.run_compactions();
    for i in 0..key_space {
        let k = key_of(i);
        assert_eq!(lsm.get(&k), oracle.get(&k).cloned(), "final state mismatch for {i}");
    }
    let got_all = lsm.scan(b"", None, usize::MAX);
    let want_all: Vec<(Vec<u8>, Vec<u8>)> =
        oracle.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    assert_eq!(got_all, want_all);
    assert!(lsm.levels.depth() >= 2, "compactions must have produced deeper levels");
}

// Deleted keys must stay dead across every flush/compaction schedule, even
// when tombstones are purged at the bottom level.
#[test]
fn deletes_never_resurrect() {
    let mut lsm = Lsm::new(512);
    for i in 0..500u32 {
        lsm.write(&key_of(i), Value::Data(Bytes::from(vec![1u8; 20])));
    }
    lsm.flush_all();
    lsm.run_compactions();
    for i in 0..500u32 {
        if i % 3 == 0 {
            lsm.write(&key_of(i), Value::Tombstone);
        }
    }
    lsm.flush_all();
    lsm.run_compactions();
    // overwrite some neighbors, more compactions
    for i in 0..500u32 {
        if i % 3 == 1 {
            lsm.write(&key_of(i), Value::Data(Bytes::from(vec![2u8; 20])));
        }
    }
    lsm.flush_all();
    lsm.run_compactions();
    for i in 0..500u32 {
        let got = lsm.get(&key_of(i));
        match i % 3 {
            0 => assert_eq!(got, None, "deleted key {i} resurrected"),
            1 => assert_eq!(got, Some(vec![2u8; 20])),
            _ => assert_eq!(got, Some(vec![1u8; 20])),
        }
    }
}

#[test]
fn round_trip_5k_entry_flush() {
    let mut mt = Memtable::new(usize::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seq in 1..=5_000u64 {
        let k = format!("k{:07}", rng.gen_range(0..100_000u32));
        let v = if rng.gen_bool(0.1) {
            Value::Tombstone
        } else {
            Value::Data(Bytes::from(vec![rng.gen::<u8>(); rng.gen_range(0..64)]))
        };
        mt.put(Key::from(k.into_bytes()), seq, v).unwrap();
    }
    mt.freeze();
    let bytes = memtable_flush(&mt, 4096, 10).unwrap();
    let sst = SsTable::decode(bytes.clone()).unwrap();
    let entries = sst.entries().unwrap();
    assert_eq!(entries.len(), mt.len());
    for ((k, s, v), (mk, ms, mv)) in entries.iter().zip(mt.iter()) {
        assert_eq!(k, mk);
        assert_eq!(*s, ms);
        assert_eq!(v, mv);
    }
    // Re-encoding the decoded entries reproduces the bytes exactly.
    let mut b = dlsm_core::SsTableBuilder::new(4096, 10);
    for (k, s, v) in entries {
        b.add(k, s, &v).unwrap();
    }
    assert_eq!(b.finish().unwrap(), bytes);
}
