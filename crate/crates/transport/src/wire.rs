//! The error half of every response. One shared enum keeps the protocol to
//! a single codec; each service maps these onto its own error types.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WireError {
    #[error("not found")]
    NotFound,
    #[error("already exists")]
    AlreadyExists,
    #[error("read out of range: offset {offset} + len {len} > {object_len}")]
    OutOfRange { offset: u64, len: u64, object_len: u64 },
    #[error("out of space")]
    OutOfSpace,
    #[error("not the owner of this range")]
    NotOwner { hint: Option<String> },
    #[error("stale epoch {got}, current is {current}")]
    StaleEpoch { got: u64, current: u64 },
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("unknown compaction job")]
    UnknownJob,
    #[error("memtable empty")]
    EmptyMemtable,
    #[error("sequence number regression")]
    SeqRegression,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown LTC")]
    UnknownLtc,
    #[error("cannot remove the last LTC")]
    LastLtc,
    #[error("LTC already a member")]
    AlreadyMember,
    #[error("storage read failed: {0}")]
    StorageRead(String),
    #[error("storage write failed: {0}")]
    StorageWrite(String),
    #[error("recovery failed: {0}")]
    RecoveryFailed(String),
    #[error("fetch of object {range_id}-{file_no} failed: {detail}")]
    FetchFailed { range_id: u32, file_no: u64, detail: String },
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("worker queue full")]
    Busy,
    #[error("unknown opcode {0:#06x}")]
    UnknownOpcode(u16),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}
