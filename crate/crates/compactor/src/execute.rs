//! Job execution: fetch inputs, run the pure merge, write outputs.
//!
//! The same function backs the remote worker and an in-process run on the
//! LTC, so the two routes can be compared byte for byte. Retries are safe:
//! outputs are deterministic and a put that collides with an identical
//! object counts as stored.

use crate::job::*;
use dlsm_core::{compact_with_stats, CompactError, CompactParams, ObjectId, SsTable, SstError};
use dlsm_stoc::{select_power_of_d, StatsBoard, StocClient};
use dlsm_transport::{RpcError, Transport};
use rand::Rng;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExecuteError {
    #[error("fetch of {id} from {stoc} failed: {source}")]
    FetchFailed { id: ObjectId, stoc: String, source: RpcError },
    #[error("input {id} is corrupt: {source}")]
    CorruptInput { id: ObjectId, source: SstError },
    #[error("merge failed: {0}")]
    Compact(#[from] CompactError),
    #[error("write of {id} to {stoc} failed: {detail}")]
    WriteFailed { id: ObjectId, stoc: String, detail: String },
    #[error("no output StoC candidates")]
    NoCandidates,
}

impl From<ExecuteError> for dlsm_transport::WireError {
    fn from(e: ExecuteError) -> Self {
        use dlsm_transport::WireError as W;
        match e {
            ExecuteError::FetchFailed { id, source, .. } => W::FetchFailed {
                range_id: id.range_id,
                file_no: id.file_no,
                detail: source.to_string(),
            },
            ExecuteError::CorruptInput { .. } => W::ChecksumMismatch,
            ExecuteError::Compact(e) => W::Internal(e.to_string()),
            ExecuteError::WriteFailed { detail, .. } => W::StorageWrite(detail),
            ExecuteError::NoCandidates => W::BadRequest("no output candidates".into()),
        }
    }
}

pub struct ExecuteOutcome {
    pub result: CompactionResult,
    /// Encoded output files, index-aligned with `result.outputs`.
    pub output_bytes: Vec<bytes::Bytes>,
}

/// Run one job: fetch every input whole, merge, and (when `store` is set)
/// write each output to a StoC chosen by the job's placement policy.
pub fn execute_job<R: Rng>(
    transport: &Arc<dyn Transport>,
    job: &CompactionJob,
    store: bool,
    board: &StatsBoard,
    rng: &mut R,
) -> Result<ExecuteOutcome, ExecuteError> {
    let started = Instant::now();
    let mut inputs = Vec::with_capacity(job.inputs.len());
    for input in &job.inputs {
        let client = StocClient::new(transport.clone(), &input.stoc).with_board(board.clone());
        let bytes = client.get_object(input.id, 0, input.len).map_err(|source| {
            ExecuteError::FetchFailed { id: input.id, stoc: input.stoc.clone(), source }
        })?;
        let table = SsTable::decode(bytes)
            .map_err(|source| ExecuteError::CorruptInput { id: input.id, source })?;
        inputs.push(table);
    }

    let params = CompactParams {
        purge_tombstones: job.purge_tombstones,
        max_output_bytes: job.max_output_bytes,
        block_size: job.block_size,
        bits_per_key: job.bits_per_key,
    };
    let (output_bytes, stats) = compact_with_stats(&inputs, &params)?;

    let mut outputs = Vec::with_capacity(output_bytes.len());
    for (i, bytes) in output_bytes.iter().enumerate() {
        let id = ObjectId::new(job.range_id, job.output_base + i as u64);
        let summary = SsTable::decode(bytes.clone())
            .expect("freshly encoded output decodes")
            .summary();
        let checksum = crc32fast::hash(bytes);
        let stoc = pick_output_stoc(&job.output_policy, board, rng)?;
        if store {
            store_output(transport, &stoc, id, bytes.clone(), checksum, board)?;
        }
        outputs.push(OutputInfo { id, stoc, summary, checksum, len: bytes.len() as u64 });
    }

    Ok(ExecuteOutcome {
        result: CompactionResult {
            job_id: job.job_id,
            epoch: job.epoch,
            outputs,
            stats,
            duration_us: started.elapsed().as_micros() as u64,
        },
        output_bytes,
    })
}

fn pick_output_stoc<R: Rng>(
    policy: &OutputPolicy,
    board: &StatsBoard,
    rng: &mut R,
) -> Result<String, ExecuteError> {
    match policy {
        OutputPolicy::Pinned(addr) => Ok(addr.clone()),
        OutputPolicy::PowerOfD { d, candidates } => {
            let snapshot = board.snapshot(candidates);
            let i = select_power_of_d(&snapshot, *d, rng).ok_or(ExecuteError::NoCandidates)?;
            Ok(snapshot[i].0.clone())
        }
    }
}

fn store_output(
    transport: &Arc<dyn Transport>,
    stoc: &str,
    id: ObjectId,
    bytes: bytes::Bytes,
    checksum: u32,
    board: &StatsBoard,
) -> Result<(), ExecuteError> {
    let client = StocClient::new(transport.clone(), stoc).with_board(board.clone());
    match client.put_object(id, bytes.clone()) {
        Ok(receipt) => {
            if receipt.checksum != checksum {
                return Err(ExecuteError::WriteFailed {
                    id,
                    stoc: stoc.to_string(),
                    detail: "stored checksum disagrees".into(),
                });
            }
            Ok(())
        }
        // A retried job rewrites the same id with the same bytes. Verify
        // the existing object matches and count it as stored.
        Err(RpcError::Remote(dlsm_transport::WireError::AlreadyExists)) => {
            let existing = client.get_object(id, 0, bytes.len() as u64).map_err(|e| {
                ExecuteError::WriteFailed { id, stoc: stoc.to_string(), detail: e.to_string() }
            })?;
            if crc32fast::hash(&existing) == checksum && existing == bytes {
                Ok(())
            } else {
                Err(ExecuteError::WriteFailed {
                    id,
                    stoc: stoc.to_string(),
                    detail: "id collision with different contents".into(),
                })
            }
        }
        Err(e) => Err(ExecuteError::WriteFailed {
            id,
            stoc: stoc.to_string(),
            detail: e.to_string(),
        }),
    }
}
