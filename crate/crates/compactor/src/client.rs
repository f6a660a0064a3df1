//! Dispatch-side client: LTC -> worker direct request/response.

use crate::job::{CompactionJob, CompactionResult};
use crate::server::WorkerStatus;
use dlsm_transport::rpc::{self, RpcError};
use dlsm_transport::{opcode, Transport};
use std::sync::Arc;
use std::time::Duration;

#[derive(Clone)]
pub struct WorkerClient {
    transport: Arc<dyn Transport>,
    pub addr: String,
    timeout: Duration,
}

impl WorkerClient {
    pub fn new(transport: Arc<dyn Transport>, addr: &str) -> Self {
        WorkerClient { transport, addr: addr.to_string(), timeout: Duration::from_secs(120) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn execute(&self, job: &CompactionJob) -> Result<CompactionResult, RpcError> {
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::WORKER_EXECUTE,
            job.epoch,
            job,
            self.timeout,
        )
    }

    pub fn status(&self) -> Result<WorkerStatus, RpcError> {
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::WORKER_STATUS,
            0,
            &(),
            Duration::from_secs(5),
        )
    }
}
