//! Clients for coordinator traffic (LTCs heartbeat, applications fetch
//! views) and for the admin protocol the coordinator speaks to LTCs.

use crate::messages::*;
use crate::view::ClusterView;
use dlsm_core::{RangeDescriptor, RangeManifest};
use dlsm_transport::rpc::{self, RpcError};
use dlsm_transport::{opcode, Transport};
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

#[derive(Clone)]
pub struct CoordClient {
    transport: Arc<dyn Transport>,
    pub addr: String,
    timeout: Duration,
}

impl CoordClient {
    pub fn new(transport: Arc<dyn Transport>, addr: &str) -> Self {
        CoordClient { transport, addr: addr.to_string(), timeout: Duration::from_secs(5) }
    }

    pub fn get_view(&self) -> Result<ClusterView, RpcError> {
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::COORD_GET_VIEW,
            0,
            &GetViewReq,
            self.timeout,
        )
    }

    pub fn heartbeat(
        &self,
        ltc_id: &str,
        loads: BTreeMap<u32, f64>,
    ) -> Result<HeartbeatResp, RpcError> {
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::COORD_HEARTBEAT,
            0,
            &HeartbeatReq { ltc_id: ltc_id.to_string(), loads },
            self.timeout,
        )
    }

    pub fn report_load(
        &self,
        ltc_id: &str,
        loads: BTreeMap<u32, f64>,
    ) -> Result<(), RpcError> {
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::COORD_REPORT_LOAD,
            0,
            &ReportLoadReq { ltc_id: ltc_id.to_string(), loads },
            self.timeout,
        )
    }

    pub fn add_ltc(&self, id: &str, addr: &str) -> Result<MembershipResp, RpcError> {
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::COORD_ADD_LTC,
            0,
            &AddLtcReq { id: id.to_string(), addr: addr.to_string() },
            Duration::from_secs(60),
        )
    }

    pub fn remove_ltc(&self, id: &str) -> Result<MembershipResp, RpcError> {
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::COORD_REMOVE_LTC,
            0,
            &RemoveLtcReq { id: id.to_string() },
            Duration::from_secs(60),
        )
    }

    pub fn route(&self, key: &[u8]) -> Result<RouteResp, RpcError> {
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::COORD_ROUTE,
            0,
            &RouteReq { key: key.to_vec() },
            self.timeout,
        )
    }
}

/// Coordinator-side client for the adopt/release protocol.
pub struct LtcAdminClient {
    transport: Arc<dyn Transport>,
    pub addr: String,
    timeout: Duration,
}

impl LtcAdminClient {
    pub fn new(transport: Arc<dyn Transport>, addr: &str, timeout: Duration) -> Self {
        LtcAdminClient { transport, addr: addr.to_string(), timeout }
    }

    pub fn adopt(
        &self,
        desc: RangeDescriptor,
        manifest: Option<RangeManifest>,
        log_stocs: Vec<String>,
    ) -> Result<(), RpcError> {
        let epoch = desc.epoch;
        rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::LTC_ADOPT_RANGE,
            epoch,
            &AdoptRangeReq { desc, manifest, log_stocs },
            self.timeout,
        )
    }

    pub fn release(&self, range_id: u32, epoch: u64) -> Result<RangeManifest, RpcError> {
        let resp: ReleaseRangeResp = rpc::call(
            self.transport.as_ref(),
            &self.addr,
            opcode::LTC_RELEASE_RANGE,
            epoch,
            &ReleaseRangeReq { range_id, epoch },
            self.timeout,
        )?;
        Ok(resp.manifest)
    }
}
