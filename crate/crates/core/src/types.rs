//! Domain types shared across the store.

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Keys compare bytewise lexicographically; ordering is total.
pub type Key = Bytes;

/// Sequence number, strictly increasing per range. Never reused.
pub type SeqNo = u64;

pub const MAX_KEY_LEN: usize = 4096;
pub const MAX_VALUE_LEN: usize = 1 << 20;

/// A stored value or a deletion marker. A tombstone is distinct from an
/// empty value.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Value {
    Data(Bytes),
    Tombstone,
}

impl Value {
    pub fn is_tombstone(&self) -> bool {
        matches!(self, Value::Tombstone)
    }

    /// Payload length; tombstones count as zero.
    pub fn len(&self) -> usize {
        match self {
            Value::Data(b) => b.len(),
            Value::Tombstone => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_data(&self) -> Option<&Bytes> {
        match self {
            Value::Data(b) => Some(b),
            Value::Tombstone => None,
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Data(b) => write!(f, "Data({} bytes)", b.len()),
            Value::Tombstone => write!(f, "Tombstone"),
        }
    }
}

impl From<&[u8]> for Value {
    fn from(b: &[u8]) -> Self {
        Value::Data(Bytes::copy_from_slice(b))
    }
}

impl From<Vec<u8>> for Value {
    fn from(b: Vec<u8>) -> Self {
        Value::Data(Bytes::from(b))
    }
}

/// Reject keys and values outside the documented bounds.
pub fn validate_key(key: &[u8]) -> Result<(), String> {
    if key.is_empty() {
        return Err("key must be non-empty".into());
    }
    if key.len() > MAX_KEY_LEN {
        return Err(format!("key exceeds {} bytes", MAX_KEY_LEN));
    }
    Ok(())
}

pub fn validate_value(value: &Value) -> Result<(), String> {
    if value.len() > MAX_VALUE_LEN {
        return Err(format!("value exceeds {} bytes", MAX_VALUE_LEN));
    }
    Ok(())
}

/// Identity of an immutable stored object. `file_no` is allocated
/// monotonically per range by the owning LTC and never reused.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId {
    pub range_id: u32,
    pub file_no: u64,
}

/// File numbers with this bit set name manifest versions rather than SSTs.
/// The two spaces never collide.
pub const MANIFEST_FILE_BIT: u64 = 1 << 63;

impl ObjectId {
    pub fn new(range_id: u32, file_no: u64) -> Self {
        ObjectId { range_id, file_no }
    }

    pub fn manifest(range_id: u32, version: u64) -> Self {
        ObjectId { range_id, file_no: MANIFEST_FILE_BIT | version }
    }

    pub fn is_manifest(&self) -> bool {
        self.file_no & MANIFEST_FILE_BIT != 0
    }

    /// Manifest version, if this id names a manifest object.
    pub fn manifest_version(&self) -> Option<u64> {
        self.is_manifest().then(|| self.file_no & !MANIFEST_FILE_BIT)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.range_id, self.file_no)
    }
}

impl fmt::Debug for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObjectId({}-{})", self.range_id, self.file_no)
    }
}

/// A contiguous key interval `[lower, upper)` owned by one LTC.
/// `upper = None` means unbounded above; an empty `lower` is the minimum key.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RangeDescriptor {
    pub range_id: u32,
    pub lower: Vec<u8>,
    pub upper: Option<Vec<u8>>,
    /// Bumped on every reassignment; strictly increases on ownership change.
    pub epoch: u64,
}

impl RangeDescriptor {
    pub fn contains(&self, key: &[u8]) -> bool {
        key >= self.lower.as_slice()
            && match &self.upper {
                Some(u) => key < u.as_slice(),
                None => true,
            }
    }
}

/// Durable record of one write, used for recovery.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LogRecord {
    pub range_id: u32,
    pub epoch: u64,
    pub seq: SeqNo,
    pub key: Vec<u8>,
    /// `None` encodes a tombstone.
    pub value: Option<Vec<u8>>,
}

impl LogRecord {
    pub fn value(&self) -> Value {
        match &self.value {
            Some(v) => Value::Data(Bytes::copy_from_slice(v)),
            None => Value::Tombstone,
        }
    }
}

/// Per-range LSM-tree metadata. Persisted whole to a StoC object on every
/// change; the version counter makes the latest copy discoverable.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RangeManifest {
    pub range_id: u32,
    pub epoch: u64,
    /// Monotonic manifest version; the persisted object id is
    /// `ObjectId::manifest(range_id, version)`.
    pub version: u64,
    /// Highest sequence number covered by the SSTs in `levels`. Log records
    /// with `seq <= last_flushed_seq` are redundant.
    pub last_flushed_seq: SeqNo,
    /// Next SST file number to allocate.
    pub next_file_no: u64,
    pub log_id: u64,
    /// StoC addresses holding this range's log replicas.
    pub log_stocs: Vec<String>,
    pub levels: crate::levels::LevelMetadata,
    /// Which StoC stores each live object. Elasticity must never change
    /// these placements.
    pub placements: std::collections::BTreeMap<ObjectId, String>,
}

impl RangeManifest {
    pub fn new(range_id: u32, epoch: u64, log_id: u64, log_stocs: Vec<String>) -> Self {
        RangeManifest {
            range_id,
            epoch,
            version: 0,
            last_flushed_seq: 0,
            next_file_no: 1,
            log_id,
            log_stocs,
            levels: crate::levels::LevelMetadata::default(),
            placements: Default::default(),
        }
    }

    pub fn object_id(&self) -> ObjectId {
        ObjectId::manifest(self.range_id, self.version)
    }

    /// Object ids referenced by the current levels.
    pub fn live_objects(&self) -> Vec<ObjectId> {
        self.levels.iter_handles().map(|h| h.id).collect()
    }
}
