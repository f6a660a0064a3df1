//! Wire payloads for coordinator traffic and for the range-ownership
//! protocol the coordinator drives against LTCs (adopt/release).

use crate::view::ClusterView;
use dlsm_core::{RangeDescriptor, RangeManifest};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GetViewReq;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeartbeatReq {
    pub ltc_id: String,
    /// Piggybacked per-range ops/sec EWMA.
    pub loads: BTreeMap<u32, f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HeartbeatResp {
    pub view_version: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportLoadReq {
    pub ltc_id: String,
    pub loads: BTreeMap<u32, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AddLtcReq {
    pub id: String,
    pub addr: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemoveLtcReq {
    pub id: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipResp {
    pub view: ClusterView,
    /// Ranges that changed owner.
    pub moved: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RouteReq {
    pub key: Vec<u8>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RouteResp {
    pub range_id: u32,
    pub addr: String,
    pub epoch: u64,
}

/// Coordinator -> LTC: take ownership of a range. When `manifest` is
/// absent the adopter searches the StoCs for the latest persisted one
/// (fresh range or failover from a dead owner).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdoptRangeReq {
    pub desc: RangeDescriptor,
    pub manifest: Option<RangeManifest>,
    pub log_stocs: Vec<String>,
}

/// Coordinator -> LTC: stop serving a range and hand back its manifest.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReleaseRangeReq {
    pub range_id: u32,
    pub epoch: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReleaseRangeResp {
    pub manifest: RangeManifest,
}
