//! Property tests for the codec and compaction invariants.

use bytes::Bytes;
use dlsm_core::{compact, CompactParams, Key, SsTable, SsTableBuilder, Value};
use proptest::collection::btree_map;
use proptest::prelude::*;
use std::collections::BTreeMap;

type EntryMap = BTreeMap<Vec<u8>, (u64, Option<Vec<u8>>)>;

fn entry_map(max_entries: usize) -> impl Strategy<Value = EntryMap> {
    btree_map(
        proptest::collection::vec(any::<u8>(), 1..24),
        (1u64..u64::MAX, proptest::option::of(proptest::collection::vec(any::<u8>(), 0..48))),
        1..max_entries,
    )
}

fn build(entries: &EntryMap, block_size: usize) -> Bytes {
    let mut seqs_seen = std::collections::HashSet::new();
    let mut b = SsTableBuilder::new(block_size, 10);
    for (k, (s, v)) in entries {
        // proptest may draw duplicate seqs for different keys; fine for the
        // codec, the builder only rejects duplicate (key, seq).
        seqs_seen.insert(*s);
        let val = match v {
            Some(v) => Value::Data(Bytes::from(v.clone())),
            None => Value::Tombstone,
        };
        b.add(Key::from(k.clone()), *s, &val).unwrap();
    }
    b.finish().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // decode(encode(s)) == s, across block boundaries and tombstones.
    #[test]
    fn encode_decode_round_trip(entries in entry_map(120), block_size in 64usize..1024) {
        let bytes = build(&entries, block_size);
        let sst = SsTable::decode(bytes.clone()).unwrap();
        prop_assert_eq!(sst.meta.footer.entry_count, entries.len() as u64);
        let got = sst.entries().unwrap();
        prop_assert_eq!(got.len(), entries.len());
        for ((k, s, v), (ek, (es, ev))) in got.iter().zip(entries.iter()) {
            prop_assert_eq!(k.as_ref(), ek.as_slice());
            prop_assert_eq!(s, es);
            match (v, ev) {
                (Value::Tombstone, None) => {},
                (Value::Data(d), Some(e)) => prop_assert_eq!(d.as_ref(), e.as_slice()),
                _ => prop_assert!(false, "value kind mismatch"),
            }
        }
        // Point lookups agree entry by entry.
        for (k, (s, _)) in entries.iter() {
            let hit = sst.get(k).unwrap();
            prop_assert_eq!(hit.map(|(seq, _)| seq), Some(*s));
        }
        // Immutability: reading never perturbs the encoded bytes.
        prop_assert_eq!(&sst.bytes, &bytes);
    }

    // Reading any key from compact(inputs) equals reading it from the
    // inputs (newest first), modulo purged tombstones at the bottom level.
    #[test]
    fn compaction_is_semantics_preserving(
        maps in proptest::collection::vec(entry_map(60), 1..4),
        purge in any::<bool>(),
    ) {
        // Rewrite seqs to be globally unique, newer tables higher.
        let mut seq = 1u64;
        let mut tables = Vec::new();
        let mut fold: EntryMap = BTreeMap::new();
        for m in &maps {
            let mut renumbered: EntryMap = BTreeMap::new();
            for (k, (_, v)) in m {
                renumbered.insert(k.clone(), (seq, v.clone()));
                seq += 1;
            }
            for (k, (s, v)) in &renumbered {
                let e = fold.entry(k.clone()).or_insert((*s, v.clone()));
                if *s > e.0 { *e = (*s, v.clone()); }
            }
            tables.push(SsTable::decode(build(&renumbered, 256)).unwrap());
        }
        let outs = compact(&tables, &CompactParams {
            purge_tombstones: purge,
            max_output_bytes: 4096,
            block_size: 256,
            bits_per_key: 10,
        }).unwrap();
        let out_tables: Vec<SsTable> =
            outs.iter().map(|b| SsTable::decode(b.clone()).unwrap()).collect();
        for (k, (s, v)) in &fold {
            let got = out_tables.iter().find_map(|t| t.get(k).unwrap());
            match (v, purge) {
                (None, true) => prop_assert_eq!(got, None),
                (None, false) => prop_assert_eq!(got, Some((*s, Value::Tombstone))),
                (Some(v), _) => {
                    prop_assert_eq!(got, Some((*s, Value::Data(Bytes::from(v.clone())))));
                }
            }
        }
    }
}
