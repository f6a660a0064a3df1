//! The published cluster view: membership, range descriptors, assignment,
//! and per-range log placement. Views are immutable snapshots; every
//! change publishes a new version.

use crate::CoordError;
use dlsm_core::RangeDescriptor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LtcInfo {
    pub id: String,
    pub addr: String,
    pub healthy: bool,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct StocInfo {
    pub id: String,
    pub addr: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ClusterView {
    pub version: u64,
    pub ltcs: Vec<LtcInfo>,
    pub stocs: Vec<StocInfo>,
    /// Sorted by range_id; descriptors carry the current epoch.
    pub ranges: Vec<RangeDescriptor>,
    /// range_id -> owning LTC id. Always a partition: every range has
    /// exactly one owner.
    pub assignment: BTreeMap<u32, String>,
    /// range_id -> StoC addresses holding its log replicas. Fixed at
    /// bootstrap; elasticity never moves logs.
    pub log_placements: BTreeMap<u32, Vec<String>>,
}

/// Uniform byte-prefix split of the keyspace into `n` contiguous ranges.
/// Boundary i is the big-endian 2-byte prefix floor(i * 65536 / n); range 0
/// is open below, the last range open above.
pub fn split_keyspace(n_ranges: u32) -> Vec<RangeDescriptor> {
    let boundary = |i: u32| -> Vec<u8> {
        let b = ((i as u64 * 65536) / n_ranges as u64) as u16;
        b.to_be_bytes().to_vec()
    };
    (0..n_ranges)
        .map(|i| RangeDescriptor {
            range_id: i,
            lower: if i == 0 { Vec::new() } else { boundary(i) },
            upper: if i + 1 == n_ranges { None } else { Some(boundary(i + 1)) },
            epoch: 1,
        })
        .collect()
}

impl ClusterView {
    /// Initial assignment: ranges round-robined over LTCs, log replicas
    /// round-robined over StoCs, all epochs 1.
    pub fn bootstrap(
        n_ranges: u32,
        ltcs: Vec<LtcInfo>,
        stocs: Vec<StocInfo>,
        log_replicas: usize,
    ) -> Result<ClusterView, CoordError> {
        if ltcs.is_empty() {
            return Err(CoordError::InvalidConfig("need at least one LTC".into()));
        }
        if n_ranges < ltcs.len() as u32 {
            return Err(CoordError::InvalidConfig(format!(
                "n_ranges {} < LTC count {}",
                n_ranges,
                ltcs.len()
            )));
        }
        if n_ranges == 0 || n_ranges >= crate::COORD_STATE_RANGE {
            return Err(CoordError::InvalidConfig("n_ranges out of bounds".into()));
        }
        if stocs.is_empty() {
            return Err(CoordError::InvalidConfig("need at least one StoC".into()));
        }
        if log_replicas == 0 || log_replicas > stocs.len() {
            return Err(CoordError::InvalidConfig(format!(
                "log_replicas {} must be in 1..={}",
                log_replicas,
                stocs.len()
            )));
        }
        let ranges = split_keyspace(n_ranges);
        let mut assignment = BTreeMap::new();
        let mut log_placements = BTreeMap::new();
        for r in 0..n_ranges {
            assignment.insert(r, ltcs[(r as usize) % ltcs.len()].id.clone());
            let placement: Vec<String> = (0..log_replicas)
                .map(|k| stocs[(r as usize + k) % stocs.len()].addr.clone())
                .collect();
            log_placements.insert(r, placement);
        }
        Ok(ClusterView { version: 1, ltcs, stocs, ranges, assignment, log_placements })
    }

    pub fn ltc(&self, id: &str) -> Option<&LtcInfo> {
        self.ltcs.iter().find(|l| l.id == id)
    }

    pub fn descriptor(&self, range_id: u32) -> Option<&RangeDescriptor> {
        self.ranges.get(range_id as usize).filter(|d| d.range_id == range_id)
    }

    /// The unique range containing `key`. Ranges partition the keyspace,
    /// so this always resolves.
    pub fn range_of(&self, key: &[u8]) -> &RangeDescriptor {
        let i = self.ranges.partition_point(|r| r.lower.as_slice() <= key);
        &self.ranges[i.saturating_sub(1)]
    }

    /// Owner address and epoch for the range containing `key`.
    pub fn route(&self, key: &[u8]) -> (u32, &LtcInfo, u64) {
        let desc = self.range_of(key);
        let owner = self.assignment.get(&desc.range_id).expect("assignment is a partition");
        let info = self.ltc(owner).expect("owner is a member");
        (desc.range_id, info, desc.epoch)
    }

    pub fn ranges_of(&self, ltc_id: &str) -> Vec<u32> {
        self.assignment
            .iter()
            .filter(|(_, o)| o.as_str() == ltc_id)
            .map(|(r, _)| *r)
            .collect()
    }

    /// Sanity: every range assigned to exactly one live member.
    pub fn check_partition(&self) -> Result<(), String> {
        if self.ranges.len() != self.assignment.len() {
            return Err("assignment does not cover all ranges".into());
        }
        for (r, owner) in &self.assignment {
            if self.ltc(owner).is_none() {
                return Err(format!("range {r} assigned to non-member {owner}"));
            }
        }
        Ok(())
    }
}
