//! Typed client for storage components, plus the shared stats board that
//! collects piggybacked load snapshots from every response.

use crate::messages::*;
use crate::stats::StoCStats;
use bytes::Bytes;
use dlsm_core::ObjectId;
use dlsm_transport::rpc::RpcError;
use dlsm_transport::{opcode, rpc, Transport};
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Freshest known stats per StoC address, fed by response piggybacks.
#[derive(Clone, Default)]
pub struct StatsBoard {
    inner: Arc<Mutex<HashMap<String, (StoCStats, Instant)>>>,
}

impl StatsBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, addr: &str, stats: StoCStats) {
        self.inner.lock().insert(addr.to_string(), (stats, Instant::now()));
    }

    pub fn get(&self, addr: &str) -> Option<StoCStats> {
        self.inner.lock().get(addr).map(|(s, _)| *s)
    }

    pub fn age(&self, addr: &str) -> Option<Duration> {
        self.inner.lock().get(addr).map(|(_, t)| t.elapsed())
    }

    /// Stats for each address, defaulting to zeros for never-seen StoCs so
    /// selection still works before any traffic.
    pub fn snapshot(&self, addrs: &[String]) -> Vec<(String, StoCStats)> {
        let inner = self.inner.lock();
        addrs
            .iter()
            .map(|a| (a.clone(), inner.get(a).map(|(s, _)| *s).unwrap_or_default()))
            .collect()
    }
}

#[derive(Clone)]
pub struct StocClient {
    transport: Arc<dyn Transport>,
    pub addr: String,
    board: Option<StatsBoard>,
    timeout: Duration,
}

impl StocClient {
    pub fn new(transport: Arc<dyn Transport>, addr: &str) -> Self {
        StocClient {
            transport,
            addr: addr.to_string(),
            board: None,
            timeout: Duration::from_secs(10),
        }
    }

    pub fn with_board(mut self, board: StatsBoard) -> Self {
        self.board = Some(board);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        kind: u16,
        req: &Req,
    ) -> Result<Resp, RpcError> {
        let out: WithStats<Resp> =
            rpc::call(self.transport.as_ref(), &self.addr, kind, 0, req, self.timeout)?;
        if let Some(board) = &self.board {
            board.record(&self.addr, out.stats);
        }
        Ok(out.body)
    }

    pub fn put_object(&self, id: ObjectId, bytes: Bytes) -> Result<Receipt, RpcError> {
        self.call(opcode::STOC_PUT_OBJECT, &PutObjectReq { id, bytes })
    }

    pub fn get_object(&self, id: ObjectId, offset: u64, len: u64) -> Result<Bytes, RpcError> {
        let resp: GetObjectResp =
            self.call(opcode::STOC_GET_OBJECT, &GetObjectReq { id, offset, len })?;
        Ok(resp.bytes)
    }

    pub fn delete_object(&self, id: ObjectId) -> Result<(), RpcError> {
        self.call(opcode::STOC_DELETE_OBJECT, &DeleteObjectReq { id })
    }

    pub fn append_log(&self, log_id: u64, epoch: u64, record: Bytes) -> Result<u64, RpcError> {
        let resp: AppendLogResp =
            self.call(opcode::STOC_APPEND_LOG, &AppendLogReq { log_id, epoch, record })?;
        Ok(resp.lsn)
    }

    pub fn read_log(&self, log_id: u64, from_lsn: u64) -> Result<Vec<(u64, Bytes)>, RpcError> {
        let resp: ReadLogResp =
            self.call(opcode::STOC_READ_LOG, &ReadLogReq { log_id, from_lsn })?;
        Ok(resp.records)
    }

    pub fn truncate_log(&self, log_id: u64, upto_lsn: u64) -> Result<(), RpcError> {
        self.call(opcode::STOC_TRUNCATE_LOG, &TruncateLogReq { log_id, upto_lsn })
    }

    pub fn fence_log(&self, log_id: u64, epoch: u64) -> Result<u64, RpcError> {
        self.call(opcode::STOC_FENCE_LOG, &FenceLogReq { log_id, epoch })
    }

    pub fn stats(&self) -> Result<StoCStats, RpcError> {
        let out: WithStats<()> = rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::STOC_STATS,
            0,
            &StatsReq,
            self.timeout,
        )?;
        if let Some(board) = &self.board {
            board.record(&self.addr, out.stats);
        }
        Ok(out.stats)
    }

    pub fn list_objects(&self, range_id: Option<u32>) -> Result<Vec<ListedObject>, RpcError> {
        self.call(opcode::STOC_LIST_OBJECTS, &ListObjectsReq { range_id })
    }
}
