//! Level metadata: which SSTables make up each level of one range's tree.
//!
//! Level 0 holds whole memtable flushes, newest first, and may overlap.
//! Levels 1 and deeper hold disjoint key ranges sorted by min key.

use crate::types::{ObjectId, SeqNo};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LevelError {
    #[error("level {level} tables overlap at {key:?}")]
    Overlap { level: usize, key: Vec<u8> },
    #[error("level {level} tables not sorted by min_key")]
    Unsorted { level: usize },
    #[error("object {0} appears more than once")]
    Duplicate(ObjectId),
}

/// Footer summary carried in manifests so placement and planning never
/// re-read the stored object.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TableSummary {
    pub min_key: Vec<u8>,
    pub max_key: Vec<u8>,
    pub min_seq: SeqNo,
    pub max_seq: SeqNo,
    pub entry_count: u64,
    pub file_len: u64,
}

impl TableSummary {
    /// Key-interval overlap with `[lower, upper]` (both inclusive).
    pub fn overlaps(&self, lower: &[u8], upper: &[u8]) -> bool {
        self.min_key.as_slice() <= upper && self.max_key.as_slice() >= lower
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TableHandle {
    pub id: ObjectId,
    pub summary: TableSummary,
}

/// Per-level table lists. `levels[0]` is L0 (newest first); deeper levels
/// are sorted by min key with disjoint ranges.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct LevelMetadata {
    pub levels: Vec<Vec<TableHandle>>,
}

impl LevelMetadata {
    pub fn level(&self, n: usize) -> &[TableHandle] {
        self.levels.get(n).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Newest-first insert into L0.
    pub fn push_l0(&mut self, handle: TableHandle) {
        if self.levels.is_empty() {
            self.levels.push(Vec::new());
        }
        self.levels[0].insert(0, handle);
    }

    pub fn iter_handles(&self) -> impl Iterator<Item = &TableHandle> {
        self.levels.iter().flatten()
    }

    pub fn total_bytes_at(&self, level: usize) -> u64 {
        self.level(level).iter().map(|h| h.summary.file_len).sum()
    }

    /// Handles on `level` whose key ranges intersect `[lower, upper]`.
    pub fn overlapping(&self, level: usize, lower: &[u8], upper: &[u8]) -> Vec<TableHandle> {
        self.level(level)
            .iter()
            .filter(|h| h.summary.overlaps(lower, upper))
            .cloned()
            .collect()
    }

    /// Deepest level index with any table, or None if the tree is empty.
    pub fn bottom_nonempty_level(&self) -> Option<usize> {
        (0..self.levels.len()).rev().find(|&l| !self.levels[l].is_empty())
    }

    /// Remove `inputs` wherever they appear and insert `outputs` into
    /// `target_level` in min-key order.
    pub fn apply_swap(
        &mut self,
        inputs: &[ObjectId],
        outputs: &[TableHandle],
        target_level: usize,
    ) {
        for level in &mut self.levels {
            level.retain(|h| !inputs.contains(&h.id));
        }
        while self.levels.len() <= target_level {
            self.levels.push(Vec::new());
        }
        for out in outputs {
            let level = &mut self.levels[target_level];
            let pos = level
                .iter()
                .position(|h| h.summary.min_key > out.summary.min_key)
                .unwrap_or(level.len());
            level.insert(pos, out.clone());
        }
    }

    /// Check structural invariants: unique ids everywhere; levels >= 1
    /// sorted by min_key and non-overlapping.
    pub fn validate(&self) -> Result<(), LevelError> {
        let mut seen = std::collections::HashSet::new();
        for h in self.iter_handles() {
            if !seen.insert(h.id) {
                return Err(LevelError::Duplicate(h.id));
            }
        }
        for (n, level) in self.levels.iter().enumerate().skip(1) {
            for pair in level.windows(2) {
                if pair[0].summary.min_key > pair[1].summary.min_key {
                    return Err(LevelError::Unsorted { level: n });
                }
                if pair[1].summary.min_key.as_slice() <= pair[0].summary.max_key.as_slice() {
                    return Err(LevelError::Overlap {
                        level: n,
                        key: pair[1].summary.min_key.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}
