//! The worker service loop: pull jobs off the endpoint, execute up to
//! `max_concurrent` at a time behind a bounded queue, reply with the
//! result. Workers share nothing and keep no job state after completion.

use crate::execute::execute_job;
use crate::job::CompactionJob;
use dlsm_stoc::StatsBoard;
use dlsm_transport::frame::Frame;
use dlsm_transport::rpc::{decode_request, err_response, ok_response, Handler};
use dlsm_transport::sync::Semaphore;
use dlsm_transport::{opcode, Transport, WireError};
use parking_lot::Mutex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

#[derive(Clone, Debug)]
pub struct CompactorConfig {
    pub max_concurrent: usize,
    /// Jobs allowed to wait for a slot before the worker answers Busy.
    pub queue_cap: usize,
    /// Simulation knob: fixed extra cost per job, standing in for heavier
    /// merges than the desk-scale corpus produces.
    pub simulated_job_cost_ms: u64,
    pub seed: u64,
}

impl Default for CompactorConfig {
    fn default() -> Self {
        let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4);
        CompactorConfig {
            max_concurrent: cores,
            queue_cap: 2 * cores,
            simulated_job_cost_ms: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WorkerStatus {
    pub active: u64,
    pub completed: u64,
    pub failed: u64,
}

pub struct CompactorServer {
    cfg: CompactorConfig,
    transport: Arc<dyn Transport>,
    slots: Semaphore,
    board: StatsBoard,
    rng: Mutex<ChaCha8Rng>,
    active: AtomicU64,
    completed: AtomicU64,
    failed: AtomicU64,
}

impl CompactorServer {
    pub fn new(cfg: CompactorConfig, transport: Arc<dyn Transport>) -> Self {
        CompactorServer {
            slots: Semaphore::new(cfg.max_concurrent.max(1)),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(cfg.seed)),
            cfg,
            transport,
            board: StatsBoard::new(),
            active: AtomicU64::new(0),
            completed: AtomicU64::new(0),
            failed: AtomicU64::new(0),
        }
    }

    pub fn status(&self) -> WorkerStatus {
        WorkerStatus {
            active: self.active.load(Ordering::SeqCst),
            completed: self.completed.load(Ordering::SeqCst),
            failed: self.failed.load(Ordering::SeqCst),
        }
    }

    fn run_job(&self, frame: &Frame) -> Result<Frame, WireError> {
        let job: CompactionJob = decode_request(frame)?;
        let Some(_slot) = self.slots.acquire_bounded(self.cfg.queue_cap) else {
            return Err(WireError::Busy);
        };
        self.active.fetch_add(1, Ordering::SeqCst);
        if self.cfg.simulated_job_cost_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.cfg.simulated_job_cost_ms));
        }
        // Per-job RNG keyed by job id keeps placement deterministic under
        // retry, regardless of what other jobs this worker has seen.
        let mut rng = {
            let mut base = self.rng.lock();
            let _ = base.get_mut(); // keep shared stream untouched
            ChaCha8Rng::seed_from_u64(
                self.cfg.seed ^ (job.job_id.range_id as u64) << 32 ^ job.job_id.seq,
            )
        };
        let outcome = execute_job(&self.transport, &job, true, &self.board, &mut rng);
        self.active.fetch_sub(1, Ordering::SeqCst);
        match outcome {
            Ok(out) => {
                self.completed.fetch_add(1, Ordering::SeqCst);
                Ok(ok_response(frame, &out.result))
            }
            Err(e) => {
                self.failed.fetch_add(1, Ordering::SeqCst);
                log::warn!("job {} failed: {e}", job.job_id);
                Err(e.into())
            }
        }
    }
}

impl Handler for CompactorServer {
    fn handle(&self, frame: Frame) -> Frame {
        let result = match frame.kind {
            opcode::WORKER_EXECUTE => self.run_job(&frame),
            opcode::WORKER_STATUS => Ok(ok_response(&frame, &self.status())),
            other => Err(WireError::UnknownOpcode(other)),
        };
        result.unwrap_or_else(|e| err_response(&frame, &e))
    }
}
