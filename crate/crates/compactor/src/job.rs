//! Compaction job and result descriptors.

use dlsm_core::{CompactStats, ObjectId, TableSummary};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JobId {
    pub range_id: u32,
    pub seq: u64,
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}-j{}", self.range_id, self.seq)
    }
}

impl fmt::Debug for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JobId({self})")
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct JobInput {
    pub id: ObjectId,
    pub stoc: String,
    pub len: u64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum OutputPolicy {
    /// Sample d of the candidates per output and write to the least
    /// loaded.
    PowerOfD { d: usize, candidates: Vec<String> },
    Pinned(String),
}

/// Self-contained descriptor: executable by any worker with no other
/// state. Output ids are `(range_id, output_base + i)`, so a retried job
/// rewrites the same objects.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CompactionJob {
    pub job_id: JobId,
    pub range_id: u32,
    pub epoch: u64,
    pub inputs: Vec<JobInput>,
    pub target_level: usize,
    pub purge_tombstones: bool,
    pub max_output_bytes: usize,
    pub block_size: usize,
    pub bits_per_key: usize,
    pub output_base: u64,
    pub output_policy: OutputPolicy,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct OutputInfo {
    pub id: ObjectId,
    pub stoc: String,
    pub summary: TableSummary,
    pub checksum: u32,
    pub len: u64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CompactionResult {
    pub job_id: JobId,
    pub epoch: u64,
    pub outputs: Vec<OutputInfo>,
    pub stats: CompactStats,
    pub duration_us: u64,
}
