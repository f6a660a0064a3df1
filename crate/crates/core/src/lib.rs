//! Single-range LSM-tree mechanics with no networking: memtable, SSTable
//! encoding/decoding, merged lookups across memtables and levels, and the
//! pure compaction function.
//!
//! Everything in this crate is a plain data structure or a pure function.
//! Values are immutable after construction except the active [`Memtable`],
//! which requires external mutual exclusion by the caller.

pub mod bloom;
pub mod block;
pub mod compact;
pub mod levels;
pub mod memtable;
pub mod policy;
pub mod sstable;
pub mod tree;
pub mod types;

pub use bloom::BloomFilter;
pub use compact::{compact, compact_with_stats, CompactError, CompactParams, CompactStats};
pub use levels::{LevelError, LevelMetadata, TableHandle, TableSummary};
pub use memtable::{Memtable, MemtableError, MemtableState};
pub use policy::{CompactionPolicy, CompactionTask};
pub use sstable::{memtable_flush, ObjectRead, SsTable, SsTableBuilder, SstError, SstMeta};
pub use tree::{TableSource, TreeReader};
pub use types::{Key, LogRecord, ObjectId, RangeDescriptor, RangeManifest, SeqNo, Value};
