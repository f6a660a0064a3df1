//! The pure compaction function: merge a set of SSTables into new ones
//! with overwritten keys purged and, at the bottom level, deleted keys
//! dropped.
//!
//! Deterministic by construction: the same inputs and parameters always
//! produce byte-identical outputs, which is what makes remote retry and
//! orphan cleanup safe.

use crate::sstable::{SsTable, SsTableBuilder, SstError};
use crate::types::{Key, SeqNo, Value};
use bytes::Bytes;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompactError {
    #[error("no input tables")]
    NoInputs,
    #[error("duplicate (key, seq) across inputs: {key:?} @ {seq} (corrupt inputs)")]
    DuplicateEntry { key: Vec<u8>, seq: SeqNo },
    #[error(transparent)]
    Sst(#[from] SstError),
}

#[derive(Clone, Copy, Debug)]
pub struct CompactParams {
    /// Drop surviving tombstones. Only valid when compacting into the
    /// bottom non-empty level, otherwise deleted keys could resurrect.
    pub purge_tombstones: bool,
    pub max_output_bytes: usize,
    pub block_size: usize,
    pub bits_per_key: usize,
}

/// Statistics of one compaction run.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct CompactStats {
    pub input_entries: u64,
    pub output_entries: u64,
    pub entries_dropped: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
}

pub fn compact(inputs: &[SsTable], params: &CompactParams) -> Result<Vec<Bytes>, CompactError> {
    Ok(compact_with_stats(inputs, params)?.0)
}

pub fn compact_with_stats(
    inputs: &[SsTable],
    params: &CompactParams,
) -> Result<(Vec<Bytes>, CompactStats), CompactError> {
    if inputs.is_empty() {
        return Err(CompactError::NoInputs);
    }
    let mut stats = CompactStats::default();
    let mut merged: Vec<(Key, SeqNo, Value)> = Vec::new();
    for sst in inputs {
        stats.bytes_read += sst.bytes.len() as u64;
        merged.extend(sst.entries()?);
    }
    stats.input_entries = merged.len() as u64;
    merged.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));

    let mut outputs = Vec::new();
    let mut builder = SsTableBuilder::new(params.block_size, params.bits_per_key);
    let mut prev: Option<(Key, SeqNo)> = None;
    for (key, seq, value) in merged {
        if let Some((pk, ps)) = &prev {
            if *pk == key {
                // Sorted (key asc, seq desc): after the first entry of a
                // key, the rest are shadowed. An exact (key, seq) repeat
                // means two inputs claim the same write; SeqNos are unique
                // per range, so that is corruption.
                if *ps == seq {
                    return Err(CompactError::DuplicateEntry { key: key.to_vec(), seq });
                }
                prev = Some((key, seq));
                continue;
            }
        }
        prev = Some((key.clone(), seq));
        if params.purge_tombstones && value.is_tombstone() {
            continue;
        }
        if !builder.is_empty() && builder.projected_len(&key, &value) > params.max_output_bytes {
            let bytes = builder.finish()?;
            stats.bytes_written += bytes.len() as u64;
            outputs.push(bytes);
            builder = SsTableBuilder::new(params.block_size, params.bits_per_key);
        }
        builder.add(key, seq, &value)?;
        stats.output_entries += 1;
    }
    if !builder.is_empty() {
        let bytes = builder.finish()?;
        stats.bytes_written += bytes.len() as u64;
        outputs.push(bytes);
    }
    stats.entries_dropped = stats.input_entries - stats.output_entries;
    Ok((outputs, stats))
}
