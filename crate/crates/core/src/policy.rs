//! Leveled compaction policy.
//!
//! Triggers: L0 reaches `l0_trigger` files, or a deeper level exceeds its
//! byte target. Targets grow by `size_ratio` per level starting from
//! `level_base_bytes` at L1. Tombstones are purged only when the output
//! lands on the bottom non-empty level, so deleted keys can never
//! resurrect.

use crate::levels::{LevelMetadata, TableHandle};
use crate::types::ObjectId;
use std::collections::HashSet;

#[derive(Clone, Debug)]
pub struct CompactionPolicy {
    /// L0 file count that triggers an L0 -> L1 compaction.
    pub l0_trigger: usize,
    /// Growth factor between consecutive level targets.
    pub size_ratio: u64,
    /// Byte target for level 1.
    pub level_base_bytes: u64,
    pub max_levels: usize,
    /// Per-output file cap handed to the compaction function.
    pub max_output_bytes: usize,
}

impl Default for CompactionPolicy {
    fn default() -> Self {
        CompactionPolicy {
            l0_trigger: 4,
            size_ratio: 10,
            level_base_bytes: 16 << 20,
            max_levels: 7,
            max_output_bytes: 8 << 20,
        }
    }
}

/// A planned compaction: which tables merge into which level.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CompactionTask {
    pub inputs: Vec<TableHandle>,
    pub target_level: usize,
    pub purge_tombstones: bool,
    pub max_output_bytes: usize,
}

impl CompactionTask {
    pub fn input_ids(&self) -> Vec<ObjectId> {
        self.inputs.iter().map(|h| h.id).collect()
    }
}

impl CompactionPolicy {
    pub fn target_bytes(&self, level: usize) -> u64 {
        if level == 0 {
            return u64::MAX;
        }
        self.level_base_bytes
            .saturating_mul(self.size_ratio.saturating_pow(level as u32 - 1))
    }

    fn key_span(tables: &[TableHandle]) -> Option<(Vec<u8>, Vec<u8>)> {
        let min = tables.iter().map(|h| h.summary.min_key.clone()).min()?;
        let max = tables.iter().map(|h| h.summary.max_key.clone()).max()?;
        Some((min, max))
    }

    /// Purge only when nothing lives below the target level, including the
    /// target's own overlap already in the inputs.
    fn purge_at(&self, levels: &LevelMetadata, target_level: usize) -> bool {
        match levels.bottom_nonempty_level() {
            None => true,
            Some(bottom) => target_level >= bottom,
        }
    }

    /// Pick the next compaction, skipping any table already claimed by a
    /// pending job. At most one trigger fires per call; L0 pressure wins
    /// over level-size pressure.
    pub fn plan(
        &self,
        levels: &LevelMetadata,
        pending: &HashSet<ObjectId>,
    ) -> Option<CompactionTask> {
        let busy = |tables: &[TableHandle]| tables.iter().any(|h| pending.contains(&h.id));

        // L0 trigger: merge all of L0 plus the overlapping span of L1.
        let l0 = levels.level(0);
        if l0.len() >= self.l0_trigger {
            let mut inputs = l0.to_vec();
            if let Some((lo, hi)) = Self::key_span(&inputs) {
                inputs.extend(levels.overlapping(1, &lo, &hi));
            }
            if !busy(&inputs) {
                return Some(CompactionTask {
                    target_level: 1,
                    purge_tombstones: self.purge_at(levels, 1),
                    max_output_bytes: self.max_output_bytes,
                    inputs,
                });
            }
        }

        // Size trigger on L1..: push the widest-overshoot level down one.
        for level in 1..levels.depth().min(self.max_levels - 1) {
            let size = levels.total_bytes_at(level);
            if size <= self.target_bytes(level) {
                continue;
            }
            // Oldest-min-key file first keeps the pick deterministic.
            let Some(seed) = levels.level(level).first().cloned() else { continue };
            let mut inputs = vec![seed.clone()];
            inputs.extend(levels.overlapping(
                level + 1,
                &seed.summary.min_key,
                &seed.summary.max_key,
            ));
            if busy(&inputs) {
                continue;
            }
            return Some(CompactionTask {
                target_level: level + 1,
                purge_tombstones: self.purge_at(levels, level + 1),
                max_output_bytes: self.max_output_bytes,
                inputs,
            });
        }
        None
    }
}
