//! Coordinator flow tests against stub LTCs over the simulated transport:
//! bootstrap handoffs, migrations, routing, load reports, and
//! heartbeat-driven failover.

use dlsm_coordinator::{
    AdoptRangeReq, CoordClient, Coordinator, CoordinatorConfig, LtcInfo, ReleaseRangeReq,
    ReleaseRangeResp, StocInfo,
};
use dlsm_core::{RangeDescriptor, RangeManifest};
use dlsm_transport::frame::Frame;
use dlsm_transport::rpc::{decode_request, err_response, ok_response, Handler};
use dlsm_transport::{opcode, SimNet, SimNetConfig, Transport, WireError};
use parking_lot::Mutex;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Duration;

/// Minimal LTC: tracks owned ranges and answers adopt/release.
struct StubLtc {
    ranges: Mutex<HashMap<u32, (RangeDescriptor, RangeManifest)>>,
}

impl StubLtc {
    fn new() -> Arc<Self> {
        Arc::new(StubLtc { ranges: Mutex::new(HashMap::new()) })
    }

    fn owned(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.ranges.lock().keys().copied().collect();
        v.sort_unstable();
        v
    }

    fn epoch_of(&self, range_id: u32) -> Option<u64> {
        self.ranges.lock().get(&range_id).map(|(d, _)| d.epoch)
    }
}

impl Handler for StubLtc {
    fn handle(&self, frame: Frame) -> Frame {
        match frame.kind {
            opcode::LTC_ADOPT_RANGE => {
                let r: AdoptRangeReq = decode_request(&frame).unwrap();
                let manifest = r.manifest.unwrap_or_else(|| {
                    RangeManifest::new(r.desc.range_id, r.desc.epoch, r.desc.range_id as u64, r.log_stocs.clone())
                });
                self.ranges.lock().insert(r.desc.range_id, (r.desc, manifest));
                ok_response(&frame, &())
            }
            opcode::LTC_RELEASE_RANGE => {
                let r: ReleaseRangeReq = decode_request(&frame).unwrap();
                match self.ranges.lock().remove(&r.range_id) {
                    Some((_, mut manifest)) => {
                        manifest.epoch = r.epoch;
                        ok_response(&frame, &ReleaseRangeResp { manifest })
                    }
                    None => err_response(&frame, &WireError::NotOwner { hint: None }),
                }
            }
            other => err_response(&frame, &WireError::UnknownOpcode(other)),
        }
    }
}

struct Harness {
    net: SimNet,
    coordinator: Arc<Coordinator>,
    ltcs: HashMap<String, Arc<StubLtc>>,
}

impl Harness {
    fn boot(n_ranges: u32, n_ltcs: usize, heartbeat: Duration) -> Harness {
        let net = SimNet::new(SimNetConfig::default());
        let cfg = CoordinatorConfig {
            n_ranges,
            heartbeat_interval: heartbeat,
            missed_heartbeats: 3,
            admin_timeout: Duration::from_secs(5),
            ..Default::default()
        };
        let transport: Arc<dyn Transport> = Arc::new(net.endpoint("coord"));
        let coordinator = Arc::new(Coordinator::new(cfg, transport));
        net.register("coord", coordinator.clone());

        let mut ltcs = HashMap::new();
        let mut infos = Vec::new();
        for i in 0..n_ltcs {
            let id = format!("ltc-{i}");
            let stub = StubLtc::new();
            net.register(&id, stub.clone());
            ltcs.insert(id.clone(), stub);
            infos.push(LtcInfo { id: id.clone(), addr: id, healthy: true });
        }
        let stocs = vec![StocInfo { id: "stoc-0".into(), addr: "stoc-0".into() }];
        coordinator.bootstrap(infos, stocs).unwrap();
        Harness { net, coordinator, ltcs }
    }

    fn add_stub(&mut self, id: &str) -> Arc<StubLtc> {
        let stub = StubLtc::new();
        self.net.register(id, stub.clone());
        self.ltcs.insert(id.to_string(), stub.clone());
        stub
    }

    fn client(&self) -> CoordClient {
        let t: Arc<dyn Transport> = Arc::new(self.net.endpoint("app"));
        CoordClient::new(t, "coord")
    }
}

#[test]
fn bootstrap_hands_ranges_round_robin() {
    let h = Harness::boot(4, 2, Duration::from_secs(60));
    assert_eq!(h.ltcs["ltc-0"].owned(), vec![0, 2]);
    assert_eq!(h.ltcs["ltc-1"].owned(), vec![1, 3]);
    let view = h.coordinator.view().unwrap();
    view.check_partition().unwrap();
    assert!(view.ranges.iter().all(|r| r.epoch == 1));
}

#[test]
fn add_ltc_moves_balanced_subset_with_bumped_epochs() {
    let mut h = Harness::boot(4, 1, Duration::from_secs(60));
    h.add_stub("ltc-new");
    let (view, moved) = h.coordinator.add_ltc("ltc-new", "ltc-new").unwrap();
    assert_eq!(moved.len(), 2);
    assert_eq!(h.ltcs["ltc-new"].owned(), moved);
    for r in &moved {
        assert_eq!(h.ltcs["ltc-new"].epoch_of(*r), Some(2), "epoch bumped on move");
        assert_eq!(view.descriptor(*r).unwrap().epoch, 2);
    }
    // unmoved ranges keep epoch 1
    for r in 0..4u32 {
        if !moved.contains(&r) {
            assert_eq!(view.descriptor(r).unwrap().epoch, 1);
        }
    }
    view.check_partition().unwrap();
}

#[test]
fn duplicate_add_rejected() {
    let h = Harness::boot(2, 2, Duration::from_secs(60));
    let err = h.coordinator.add_ltc("ltc-1", "ltc-1").unwrap_err();
    assert_eq!(err, dlsm_coordinator::CoordError::AlreadyMember);
}

#[test]
fn remove_moves_everything_to_survivor_and_remove_last_fails() {
    let h = Harness::boot(4, 2, Duration::from_secs(60));
    let (view, moved) = h.coordinator.remove_ltc("ltc-1").unwrap();
    assert_eq!(moved.len(), 2);
    assert_eq!(h.ltcs["ltc-0"].owned(), vec![0, 1, 2, 3]);
    assert_eq!(view.ltcs.len(), 1);
    assert_eq!(
        h.coordinator.remove_ltc("ltc-0").unwrap_err(),
        dlsm_coordinator::CoordError::LastLtc
    );
    assert_eq!(
        h.coordinator.remove_ltc("ltc-9").unwrap_err(),
        dlsm_coordinator::CoordError::UnknownLtc
    );
}

#[test]
fn remove_then_readd_rebalances() {
    let mut h = Harness::boot(6, 2, Duration::from_secs(60));
    h.coordinator.remove_ltc("ltc-1").unwrap();
    assert_eq!(h.ltcs["ltc-0"].owned().len(), 6);
    h.add_stub("ltc-1b");
    let (view, moved) = h.coordinator.add_ltc("ltc-1b", "ltc-1b").unwrap();
    assert_eq!(moved.len(), 3);
    assert_eq!(h.ltcs["ltc-1b"].owned().len(), 3);
    assert_eq!(h.ltcs["ltc-0"].owned().len(), 3);
    view.check_partition().unwrap();
}

#[test]
fn route_reflects_migrations() {
    let mut h = Harness::boot(4, 1, Duration::from_secs(60));
    let client = h.client();
    let before = client.route(b"\x00\x01after-range-0-start").unwrap();
    assert_eq!(before.addr, "ltc-0");
    h.add_stub("ltc-new");
    let (view, moved) = h.coordinator.add_ltc("ltc-new", "ltc-new").unwrap();
    // some key in a moved range routes to the new owner at the new epoch
    let moved_range = moved[0];
    let lower = view.descriptor(moved_range).unwrap().lower.clone();
    let probe = if lower.is_empty() { vec![0u8] } else { lower };
    let after = client.route(&probe).unwrap();
    assert_eq!(after.addr, "ltc-new");
    assert_eq!(after.epoch, 2);
}

#[test]
fn load_reports_from_unknown_ltc_rejected() {
    let h = Harness::boot(2, 1, Duration::from_secs(60));
    let client = h.client();
    let err = client.report_load("ltc-ghost", BTreeMap::new()).unwrap_err();
    assert!(matches!(
        err,
        dlsm_transport::RpcError::Remote(WireError::UnknownLtc)
    ));
    client.report_load("ltc-0", BTreeMap::from([(0u32, 5.0)])).unwrap();
}

#[test]
fn skewed_load_report_shifts_the_plan() {
    let mut h = Harness::boot(8, 2, Duration::from_secs(60));
    // ltc-0 owns even ranges; make range 6 hot
    let mut loads = BTreeMap::new();
    for r in [0u32, 2, 4, 6] {
        loads.insert(r, if r == 6 { 900.0 } else { 1.0 });
    }
    h.coordinator.report_load("ltc-0", loads).unwrap();
    h.add_stub("ltc-new");
    let (_, moved) = h.coordinator.add_ltc("ltc-new", "ltc-new").unwrap();
    assert!(moved.contains(&6), "hottest reported range must move: {moved:?}");
}

#[test]
fn missed_heartbeats_trigger_failover_with_fenced_epoch() {
    let h = Harness::boot(4, 2, Duration::from_millis(50));
    let client = h.client();
    // ltc-1 goes silent and unreachable; ltc-0 keeps beating
    h.net.unregister("ltc-1");
    for _ in 0..5 {
        client.heartbeat("ltc-0", BTreeMap::new()).unwrap();
        std::thread::sleep(Duration::from_millis(40));
    }
    h.coordinator.check_health();
    let view = h.coordinator.view().unwrap();
    assert!(view.ltc("ltc-1").is_none(), "dead member dropped from view");
    assert_eq!(h.ltcs["ltc-0"].owned(), vec![0, 1, 2, 3]);
    // moved ranges carry a bumped epoch to fence the dead owner
    assert_eq!(view.descriptor(1).unwrap().epoch, 2);
    assert_eq!(view.descriptor(3).unwrap().epoch, 2);
    view.check_partition().unwrap();
}

#[test]
fn wire_membership_ops_work() {
    let mut h = Harness::boot(4, 1, Duration::from_secs(60));
    h.add_stub("ltc-w");
    let client = h.client();
    let resp = client.add_ltc("ltc-w", "ltc-w").unwrap();
    assert_eq!(resp.moved.len(), 2);
    assert_eq!(resp.view.ltcs.len(), 2);
    let view = client.get_view().unwrap();
    assert_eq!(view.version, resp.view.version);
}
