//! Merged reads across memtables and levels.
//!
//! The newest version of a key wins: active memtable, then immutable
//! memtables (newest first), then L0 (newest first), then deeper levels.
//! Block data is fetched through a [`TableSource`], so the same path reads
//! local bytes in tests and remote storage components in production.

use crate::levels::LevelMetadata;
use crate::memtable::Memtable;
use crate::sstable::{ObjectRead, SstError, SstMeta};
use crate::types::{Key, ObjectId, SeqNo, Value};
use bytes::Bytes;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// Resolves `(object, offset, len)` reads. Implementations: an in-memory
/// map for tests, a storage-component client in the LTC.
pub trait TableSource: Send + Sync {
    fn read(&self, id: ObjectId, offset: u64, len: u64) -> Result<Bytes, SstError>;
}

impl TableSource for RwLock<HashMap<ObjectId, Bytes>> {
    fn read(&self, id: ObjectId, offset: u64, len: u64) -> Result<Bytes, SstError> {
        let map = self.read().unwrap();
        let bytes = map
            .get(&id)
            .ok_or_else(|| SstError::Storage(format!("object {id} not found")))?;
        bytes.read(offset, len)
    }
}

struct BoundSource<'a, S: TableSource + ?Sized> {
    source: &'a S,
    id: ObjectId,
}

impl<S: TableSource + ?Sized> ObjectRead for BoundSource<'_, S> {
    fn read(&self, offset: u64, len: u64) -> Result<Bytes, SstError> {
        self.source.read(self.id, offset, len)
    }
}

/// Read-side state: a table source plus a cache of parsed SSTable
/// metadata (footer, index, bloom). Object ids are never reused, so cached
/// entries stay valid for the object's lifetime.
pub struct TreeReader<S: TableSource> {
    source: S,
    metas: RwLock<HashMap<ObjectId, Arc<SstMeta>>>,
}

impl<S: TableSource> TreeReader<S> {
    pub fn new(source: S) -> Self {
        TreeReader { source, metas: RwLock::new(HashMap::new()) }
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    /// Drop cached metadata for objects that no longer exist.
    pub fn evict(&self, ids: &[ObjectId]) {
        let mut metas = self.metas.write().unwrap();
        for id in ids {
            metas.remove(id);
        }
    }

    fn meta(&self, id: ObjectId, file_len: u64) -> Result<Arc<SstMeta>, SstError> {
        if let Some(m) = self.metas.read().unwrap().get(&id) {
            return Ok(m.clone());
        }
        let meta = Arc::new(SstMeta::load(&BoundSource { source: &self.source, id }, file_len)?);
        self.metas.write().unwrap().insert(id, meta.clone());
        Ok(meta)
    }

    fn table_get(
        &self,
        id: ObjectId,
        file_len: u64,
        key: &[u8],
    ) -> Result<Option<(SeqNo, Value)>, SstError> {
        let meta = self.meta(id, file_len)?;
        meta.get(&BoundSource { source: &self.source, id }, key)
    }

    /// Highest-SeqNo version of `key` across memtables and all levels.
    /// `memtables` are ordered newest first (active memtable first).
    pub fn get_versioned(
        &self,
        memtables: &[&Memtable],
        levels: &LevelMetadata,
        key: &[u8],
    ) -> Result<Option<(SeqNo, Value)>, SstError> {
        for mt in memtables {
            if let Some((seq, v)) = mt.get(key) {
                return Ok(Some((seq, v.clone())));
            }
        }
        // L0 may overlap; files are kept newest first, so the first hit is
        // the newest version.
        for h in levels.level(0) {
            if key < h.summary.min_key.as_slice() || key > h.summary.max_key.as_slice() {
                continue;
            }
            if let Some(hit) = self.table_get(h.id, h.summary.file_len, key)? {
                return Ok(Some(hit));
            }
        }
        // Deeper levels are disjoint: at most one candidate per level.
        for level in 1..levels.depth() {
            let tables = levels.level(level);
            let i = tables.partition_point(|h| h.summary.min_key.as_slice() <= key);
            let Some(h) = i.checked_sub(1).map(|i| &tables[i]) else { continue };
            if key > h.summary.max_key.as_slice() {
                continue;
            }
            if let Some(hit) = self.table_get(h.id, h.summary.file_len, key)? {
                return Ok(Some(hit));
            }
        }
        Ok(None)
    }

    /// Point read with tombstone semantics: a deletion marker reads as
    /// absent.
    pub fn get(
        &self,
        memtables: &[&Memtable],
        levels: &LevelMetadata,
        key: &[u8],
    ) -> Result<Option<Value>, SstError> {
        Ok(self.get_versioned(memtables, levels, key)?.and_then(|(_, v)| match v {
            Value::Tombstone => None,
            v => Some(v),
        }))
    }

    /// Sorted, tombstone-filtered merge of `[lower, upper)` across all
    /// sources, up to `limit` entries.
    pub fn scan(
        &self,
        memtables: &[&Memtable],
        levels: &LevelMetadata,
        lower: &[u8],
        upper: Option<&[u8]>,
        limit: usize,
    ) -> Result<Vec<(Key, Value)>, SstError> {
        let mut merged: Vec<(Key, SeqNo, Value)> = Vec::new();
        for mt in memtables {
            merged.extend(mt.range(lower, upper).map(|(k, s, v)| (k.clone(), s, v.clone())));
        }
        let upper_incl = |h: &crate::levels::TableHandle| match upper {
            Some(u) => h.summary.min_key.as_slice() < u,
            None => true,
        };
        for level in 0..levels.depth() {
            for h in levels.level(level) {
                if h.summary.max_key.as_slice() < lower || !upper_incl(h) {
                    continue;
                }
                let meta = self.meta(h.id, h.summary.file_len)?;
                merged.extend(meta.entries_in_range(
                    &BoundSource { source: &self.source, id: h.id },
                    lower,
                    upper,
                )?);
            }
        }
        merged.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut out = Vec::new();
        let mut last_key: Option<Key> = None;
        for (key, _, value) in merged {
            if last_key.as_ref() == Some(&key) {
                continue;
            }
            last_key = Some(key.clone());
            if value.is_tombstone() {
                continue;
            }
            out.push((key, value));
            if out.len() >= limit {
                break;
            }
        }
        Ok(out)
    }
}
