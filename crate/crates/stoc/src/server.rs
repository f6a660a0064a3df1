//! Request handling for one storage component.
//!
//! Each request updates the stats tracker (outstanding count on entry,
//! latency EWMA on completion) and every successful response carries a
//! stats snapshot piggybacked for the caller's placement decisions.
//!
//! In simulation mode a per-request latency injection (fixed + jitter)
//! stands in for fabric distance.

use crate::log_store::LogStore;
use crate::messages::*;
use crate::object_store::{BackingTier, ObjectStore};
use crate::stats::{StatsTracker, StoCStats};
use crate::StocError;
use dlsm_transport::frame::Frame;
use dlsm_transport::rpc::{decode_request, err_response, ok_response, Handler};
use dlsm_transport::{opcode, WireError};
use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Duration;

#[derive(Clone, Debug)]
pub struct StocConfig {
    pub tier: BackingTier,
    /// Fixed injected latency per request, microseconds.
    pub inject_latency_us: u64,
    /// Uniform jitter bound added on top, microseconds.
    pub inject_jitter_us: u64,
    pub seed: u64,
}

impl Default for StocConfig {
    fn default() -> Self {
        StocConfig {
            tier: BackingTier::MemoryOnly,
            inject_latency_us: 0,
            inject_jitter_us: 0,
            seed: 0,
        }
    }
}

pub struct StocServer {
    objects: ObjectStore,
    logs: LogStore,
    stats: StatsTracker,
    cfg: StocConfig,
    rng: Mutex<ChaCha8Rng>,
}

impl StocServer {
    pub fn open(cfg: StocConfig) -> Result<Self, StocError> {
        let objects = ObjectStore::open(cfg.tier.clone())?;
        let logs = LogStore::open(cfg.tier.clone())?;
        let stats = StatsTracker::default();
        let (bytes, count) = objects.totals();
        stats.set_storage(bytes, count);
        Ok(StocServer { objects, logs, stats, rng: Mutex::new(ChaCha8Rng::seed_from_u64(cfg.seed)), cfg })
    }

    pub fn stats(&self) -> StoCStats {
        self.stats.snapshot()
    }

    pub fn objects(&self) -> &ObjectStore {
        &self.objects
    }

    pub fn logs(&self) -> &LogStore {
        &self.logs
    }

    fn inject(&self) {
        let base = self.cfg.inject_latency_us;
        let jitter = self.cfg.inject_jitter_us;
        if base == 0 && jitter == 0 {
            return;
        }
        let extra = if jitter > 0 { self.rng.lock().gen_range(0..=jitter) } else { 0 };
        std::thread::sleep(Duration::from_micros(base + extra));
    }

    fn respond<T: Serialize>(&self, req: &Frame, body: T) -> Frame {
        ok_response(req, &WithStats { stats: self.stats.snapshot(), body })
    }

    fn dispatch(&self, req: &Frame) -> Result<Frame, WireError> {
        match req.kind {
            opcode::STOC_PUT_OBJECT => {
                let r: PutObjectReq = decode_request(req)?;
                let delta = r.bytes.len() as i64;
                let receipt = self.objects.put(r.id, r.bytes)?;
                self.stats.add_bytes(delta);
                self.stats.add_objects(1);
                Ok(self.respond(req, receipt))
            }
            opcode::STOC_GET_OBJECT => {
                let r: GetObjectReq = decode_request(req)?;
                let bytes = self.objects.get(r.id, r.offset, r.len)?;
                Ok(self.respond(req, GetObjectResp { bytes }))
            }
            opcode::STOC_DELETE_OBJECT => {
                let r: DeleteObjectReq = decode_request(req)?;
                let freed = self.objects.delete(r.id)?;
                self.stats.add_bytes(-(freed as i64));
                self.stats.add_objects(-1);
                Ok(self.respond(req, ()))
            }
            opcode::STOC_APPEND_LOG => {
                let r: AppendLogReq = decode_request(req)?;
                let lsn = self.logs.append(r.log_id, r.epoch, r.record)?;
                Ok(self.respond(req, AppendLogResp { lsn }))
            }
            opcode::STOC_READ_LOG => {
                let r: ReadLogReq = decode_request(req)?;
                let records = self.logs.read(r.log_id, r.from_lsn)?;
                Ok(self.respond(req, ReadLogResp { records }))
            }
            opcode::STOC_TRUNCATE_LOG => {
                let r: TruncateLogReq = decode_request(req)?;
                self.logs.truncate(r.log_id, r.upto_lsn)?;
                Ok(self.respond(req, ()))
            }
            opcode::STOC_FENCE_LOG => {
                let r: FenceLogReq = decode_request(req)?;
                let fence = self.logs.fence(r.log_id, r.epoch)?;
                Ok(self.respond(req, fence))
            }
            opcode::STOC_STATS => {
                let _: StatsReq = decode_request(req)?;
                Ok(self.respond(req, ()))
            }
            opcode::STOC_LIST_OBJECTS => {
                let r: ListObjectsReq = decode_request(req)?;
                Ok(self.respond(req, self.objects.list(r.range_id)))
            }
            opcode::ECHO => Ok(Frame {
                request_id: req.request_id,
                kind: req.response_kind(),
                epoch: req.epoch,
                payload: req.payload.clone(),
            }),
            other => Err(WireError::UnknownOpcode(other)),
        }
    }
}

impl Handler for StocServer {
    fn handle(&self, frame: Frame) -> Frame {
        let guard = self.stats.begin_request();
        self.inject();
        let resp = match self.dispatch(&frame) {
            Ok(resp) => resp,
            Err(e) => err_response(&frame, &e),
        };
        drop(guard);
        resp
    }
}
