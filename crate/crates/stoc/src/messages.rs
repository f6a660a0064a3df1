//! Wire payloads for storage component requests. Every successful
//! response piggybacks a stats snapshot so callers keep a fresh load
//! signal without separate polling.

use crate::stats::StoCStats;
use bytes::Bytes;
use dlsm_core::ObjectId;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WithStats<T> {
    pub stats: StoCStats,
    pub body: T,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PutObjectReq {
    pub id: ObjectId,
    pub bytes: Bytes,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Receipt {
    pub id: ObjectId,
    pub checksum: u32,
    pub len: u64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GetObjectReq {
    pub id: ObjectId,
    pub offset: u64,
    pub len: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GetObjectResp {
    pub bytes: Bytes,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeleteObjectReq {
    pub id: ObjectId,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AppendLogReq {
    pub log_id: u64,
    /// Range epoch for fencing; appends below the log's fence are rejected.
    pub epoch: u64,
    pub record: Bytes,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AppendLogResp {
    pub lsn: u64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReadLogReq {
    pub log_id: u64,
    pub from_lsn: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReadLogResp {
    pub records: Vec<(u64, Bytes)>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TruncateLogReq {
    pub log_id: u64,
    pub upto_lsn: u64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FenceLogReq {
    pub log_id: u64,
    pub epoch: u64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ListObjectsReq {
    /// Restrict to one range, or list everything.
    pub range_id: Option<u32>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ListedObject {
    pub id: ObjectId,
    pub len: u64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StatsReq;
