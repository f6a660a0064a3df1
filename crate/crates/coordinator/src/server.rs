//! The coordinator process: serialized view changes, concurrent reads
//! against the latest published view, heartbeat-driven failure detection,
//! and the migration executor.
//!
//! Elasticity moves metadata only. A migration is release (or the owner is
//! declared dead and its epoch fenced), then adopt at a bumped epoch; the
//! manifest travels through the coordinator while every stored object
//! stays exactly where it is.

use crate::client::LtcAdminClient;
use crate::messages::*;
use crate::plan::{plan_add, plan_remove, LoadMap, Move};
use crate::view::{ClusterView, LtcInfo, StocInfo};
use crate::{CoordError, COORD_STATE_RANGE};
use dlsm_core::ObjectId;
use dlsm_stoc::StocClient;
use dlsm_transport::frame::Frame;
use dlsm_transport::rpc::{decode_request, err_response, ok_response, Handler};
use dlsm_transport::{opcode, Transport, WireError};
use parking_lot::Mutex;
use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Reports older than this are ignored when planning migrations.
const LOAD_REPORT_TTL: Duration = Duration::from_secs(10);

#[derive(Clone, Debug)]
pub struct CoordinatorConfig {
    pub n_ranges: u32,
    pub log_replicas: usize,
    pub heartbeat_interval: Duration,
    pub missed_heartbeats: u32,
    /// RPC budget for adopt/release during migrations.
    pub admin_timeout: Duration,
    /// StoC address to persist coordinator state to, if any.
    pub persist_stoc: Option<String>,
}

impl Default for CoordinatorConfig {
    fn default() -> Self {
        CoordinatorConfig {
            n_ranges: 64,
            log_replicas: 1,
            heartbeat_interval: Duration::from_millis(500),
            missed_heartbeats: 3,
            admin_timeout: Duration::from_secs(30),
            persist_stoc: None,
        }
    }
}

struct Runtime {
    /// Latest per-LTC load report and when it arrived.
    loads: HashMap<String, (LoadMap, Instant)>,
    last_heartbeat: HashMap<String, Instant>,
}

pub struct Coordinator {
    cfg: CoordinatorConfig,
    transport: Arc<dyn Transport>,
    view: Mutex<Option<Arc<ClusterView>>>,
    runtime: Mutex<Runtime>,
    /// Serializes view changes: one migration plan in flight at a time.
    migration: Mutex<()>,
    stop: AtomicBool,
}

impl Coordinator {
    pub fn new(cfg: CoordinatorConfig, transport: Arc<dyn Transport>) -> Self {
        Coordinator {
            cfg,
            transport,
            view: Mutex::new(None),
            runtime: Mutex::new(Runtime {
                loads: HashMap::new(),
                last_heartbeat: HashMap::new(),
            }),
            migration: Mutex::new(()),
            stop: AtomicBool::new(false),
        }
    }

    pub fn config(&self) -> &CoordinatorConfig {
        &self.cfg
    }

    pub fn view(&self) -> Option<Arc<ClusterView>> {
        self.view.lock().clone()
    }

    fn must_view(&self) -> Result<Arc<ClusterView>, WireError> {
        self.view().ok_or_else(|| WireError::Unavailable("not bootstrapped".into()))
    }

    fn publish(&self, mut next: ClusterView) -> Arc<ClusterView> {
        next.version += 1;
        debug_assert!(next.check_partition().is_ok());
        let arc = Arc::new(next);
        *self.view.lock() = Some(arc.clone());
        self.persist(&arc);
        arc
    }

    fn admin(&self, addr: &str) -> LtcAdminClient {
        LtcAdminClient::new(self.transport.clone(), addr, self.cfg.admin_timeout)
    }

    /// Merged fresh load map across reporting LTCs.
    fn fresh_loads(&self) -> LoadMap {
        let runtime = self.runtime.lock();
        let mut merged = LoadMap::new();
        for (loads, at) in runtime.loads.values() {
            if at.elapsed() <= LOAD_REPORT_TTL {
                for (r, v) in loads {
                    merged.insert(*r, *v);
                }
            }
        }
        merged
    }

    /// Split the keyspace, round-robin ranges over the LTCs, and hand each
    /// owner its ranges. All epochs start at 1.
    pub fn bootstrap(
        &self,
        ltcs: Vec<LtcInfo>,
        stocs: Vec<StocInfo>,
    ) -> Result<Arc<ClusterView>, CoordError> {
        let _mig = self.migration.lock();
        let view =
            ClusterView::bootstrap(self.cfg.n_ranges, ltcs, stocs, self.cfg.log_replicas)?;
        for desc in &view.ranges {
            let owner = view.assignment.get(&desc.range_id).unwrap();
            let addr = &view.ltc(owner).unwrap().addr;
            let log_stocs = view.log_placements.get(&desc.range_id).unwrap().clone();
            self.admin(addr)
                .adopt(desc.clone(), None, log_stocs)
                .map_err(|e| CoordError::MigrationFailed(format!("bootstrap adopt: {e}")))?;
        }
        {
            let mut runtime = self.runtime.lock();
            let now = Instant::now();
            for l in &view.ltcs {
                runtime.last_heartbeat.insert(l.id.clone(), now);
            }
        }
        let mut view = view;
        view.version = 0; // publish() bumps to 1
        Ok(self.publish(view))
    }

    pub fn heartbeat(&self, ltc_id: &str, loads: LoadMap) -> Result<u64, WireError> {
        let view = self.must_view()?;
        if view.ltc(ltc_id).is_none() {
            return Err(WireError::UnknownLtc);
        }
        let mut runtime = self.runtime.lock();
        runtime.last_heartbeat.insert(ltc_id.to_string(), Instant::now());
        if !loads.is_empty() {
            runtime.loads.insert(ltc_id.to_string(), (loads, Instant::now()));
        }
        Ok(view.version)
    }

    pub fn report_load(&self, ltc_id: &str, loads: LoadMap) -> Result<(), WireError> {
        let view = self.must_view()?;
        if view.ltc(ltc_id).is_none() {
            return Err(WireError::UnknownLtc);
        }
        self.runtime
            .lock()
            .loads
            .insert(ltc_id.to_string(), (loads, Instant::now()));
        Ok(())
    }

    /// Execute one ownership move: release from the current owner (falling
    /// back to fenced failover semantics if it is unreachable), bump the
    /// epoch, adopt on the target, publish.
    fn execute_move(&self, m: &Move) -> Result<(), CoordError> {
        let view = self.view().expect("bootstrapped");
        let desc = view
            .descriptor(m.range_id)
            .ok_or_else(|| CoordError::MigrationFailed(format!("no range {}", m.range_id)))?
            .clone();
        let from_addr = view
            .ltc(&m.from)
            .map(|l| l.addr.clone())
            .ok_or(CoordError::UnknownLtc)?;
        let to_addr = view.ltc(&m.to).map(|l| l.addr.clone()).ok_or(CoordError::UnknownLtc)?;
        let log_stocs = view.log_placements.get(&m.range_id).cloned().unwrap_or_default();

        // Release completes before adopt is issued; a dead owner is fenced
        // by the epoch bump instead.
        let manifest = match self.admin(&from_addr).release(m.range_id, desc.epoch) {
            Ok(manifest) => Some(manifest),
            Err(e) => {
                log::warn!(
                    "release of range {} from {} failed ({e}); adopting from persisted state",
                    m.range_id,
                    m.from
                );
                None
            }
        };
        let mut new_desc = desc;
        new_desc.epoch += 1;
        self.admin(&to_addr)
            .adopt(new_desc.clone(), manifest, log_stocs)
            .map_err(|e| CoordError::MigrationFailed(format!("adopt on {}: {e}", m.to)))?;

        let mut next = (*self.view().unwrap()).clone();
        next.ranges[m.range_id as usize].epoch = new_desc.epoch;
        next.assignment.insert(m.range_id, m.to.clone());
        self.publish(next);
        Ok(())
    }

    /// Add a member and move a balanced, hottest-first subset of ranges
    /// onto it. No stored object moves.
    pub fn add_ltc(&self, id: &str, addr: &str) -> Result<(Arc<ClusterView>, Vec<u32>), CoordError> {
        let _mig = self.migration.lock();
        let view = self.view().ok_or_else(|| {
            CoordError::InvalidConfig("not bootstrapped".into())
        })?;
        if view.ltc(id).is_some() {
            return Err(CoordError::AlreadyMember);
        }
        let moves = plan_add(&view, &self.fresh_loads(), id);
        let mut next = (*view).clone();
        next.ltcs.push(LtcInfo { id: id.to_string(), addr: addr.to_string(), healthy: true });
        self.publish(next);
        self.runtime.lock().last_heartbeat.insert(id.to_string(), Instant::now());

        let mut moved = Vec::new();
        for m in &moves {
            self.execute_move(m)?;
            moved.push(m.range_id);
        }
        Ok((self.view().unwrap(), moved))
    }

    /// Drain a member and spread its ranges over the survivors,
    /// least-loaded first. The victim is dropped from the view only after
    /// every range has a new owner.
    pub fn remove_ltc(&self, id: &str) -> Result<(Arc<ClusterView>, Vec<u32>), CoordError> {
        let _mig = self.migration.lock();
        let view = self.view().ok_or_else(|| {
            CoordError::InvalidConfig("not bootstrapped".into())
        })?;
        if view.ltc(id).is_none() {
            return Err(CoordError::UnknownLtc);
        }
        if view.ltcs.len() < 2 {
            return Err(CoordError::LastLtc);
        }
        let moves = plan_remove(&view, &self.fresh_loads(), id);
        let mut moved = Vec::new();
        for m in &moves {
            self.execute_move(m)?;
            moved.push(m.range_id);
        }
        let mut next = (*self.view().unwrap()).clone();
        next.ltcs.retain(|l| l.id != id);
        let published = self.publish(next);
        let mut runtime = self.runtime.lock();
        runtime.last_heartbeat.remove(id);
        runtime.loads.remove(id);
        Ok((published, moved))
    }

    pub fn route(&self, key: &[u8]) -> Result<RouteResp, WireError> {
        let view = self.must_view()?;
        let (range_id, ltc, epoch) = view.route(key);
        Ok(RouteResp { range_id, addr: ltc.addr.clone(), epoch })
    }

    /// Reassign every range owned by a dead LTC. Adopters recover from
    /// persisted manifests and logs; the epoch bump fences the old owner.
    fn failover(&self, dead_id: &str) {
        let _mig = self.migration.lock();
        let Some(view) = self.view() else { return };
        if view.ltc(dead_id).is_none() {
            return;
        }
        log::warn!("LTC {dead_id} declared dead; reassigning its ranges");
        {
            let mut next = (*view).clone();
            if let Some(l) = next.ltcs.iter_mut().find(|l| l.id == dead_id) {
                l.healthy = false;
            }
            self.publish(next);
        }
        let ranges = view.ranges_of(dead_id);
        for range_id in ranges {
            let view = self.view().unwrap();
            let survivors: Vec<&LtcInfo> = view
                .ltcs
                .iter()
                .filter(|l| l.healthy && l.id != dead_id)
                .collect();
            if survivors.is_empty() {
                log::error!("no healthy LTC left to adopt range {range_id}");
                return;
            }
            // fewest-ranges-first keeps the emergency spread balanced
            let target = survivors
                .into_iter()
                .min_by_key(|l| view.ranges_of(&l.id).len())
                .unwrap()
                .clone();
            let mut desc = view.descriptor(range_id).unwrap().clone();
            desc.epoch += 1;
            let log_stocs = view.log_placements.get(&range_id).cloned().unwrap_or_default();
            match self.admin(&target.addr).adopt(desc.clone(), None, log_stocs) {
                Ok(()) => {
                    let mut next = (*self.view().unwrap()).clone();
                    next.ranges[range_id as usize].epoch = desc.epoch;
                    next.assignment.insert(range_id, target.id.clone());
                    self.publish(next);
                }
                Err(e) => {
                    log::error!("failover adopt of range {range_id} on {} failed: {e}", target.id);
                }
            }
        }
        let mut next = (*self.view().unwrap()).clone();
        next.ltcs.retain(|l| l.id != dead_id);
        self.publish(next);
        self.runtime.lock().last_heartbeat.remove(dead_id);
    }

    /// One failure-detection sweep: any member silent for
    /// `missed_heartbeats * heartbeat_interval` is declared dead.
    pub fn check_health(&self) {
        let Some(view) = self.view() else { return };
        let deadline = self.cfg.heartbeat_interval * self.cfg.missed_heartbeats;
        let dead: Vec<String> = {
            let runtime = self.runtime.lock();
            view.ltcs
                .iter()
                .filter(|l| {
                    runtime
                        .last_heartbeat
                        .get(&l.id)
                        .map_or(true, |t| t.elapsed() > deadline)
                })
                .map(|l| l.id.clone())
                .collect()
        };
        for id in dead {
            self.failover(&id);
        }
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    fn persist(&self, view: &ClusterView) {
        let Some(addr) = &self.cfg.persist_stoc else { return };
        let client = StocClient::new(self.transport.clone(), addr);
        let bytes = bincode::serialize(view).expect("view serializes");
        let id = ObjectId::manifest(COORD_STATE_RANGE, view.version);
        if let Err(e) = client.put_object(id, bytes.into()) {
            log::warn!("failed to persist coordinator state: {e}");
        }
    }

    /// Load the newest persisted view, if the configured StoC has one.
    pub fn try_restore(&self) -> Option<Arc<ClusterView>> {
        let addr = self.cfg.persist_stoc.as_ref()?;
        let client = StocClient::new(self.transport.clone(), addr);
        let objects = client.list_objects(Some(COORD_STATE_RANGE)).ok()?;
        let latest = objects
            .iter()
            .filter(|o| o.id.is_manifest())
            .max_by_key(|o| o.id.manifest_version())?;
        let bytes = client.get_object(latest.id, 0, latest.len).ok()?;
        let view: ClusterView = bincode::deserialize(&bytes).ok()?;
        let arc = Arc::new(view);
        *self.view.lock() = Some(arc.clone());
        let mut runtime = self.runtime.lock();
        let now = Instant::now();
        for l in &arc.ltcs {
            runtime.last_heartbeat.insert(l.id.clone(), now);
        }
        Some(arc)
    }
}

/// Background failure detector. Runs until `coordinator.stop()`.
pub fn spawn_health_monitor(coordinator: Arc<Coordinator>) -> std::thread::JoinHandle<()> {
    std::thread::Builder::new()
        .name("coord-health".into())
        .spawn(move || loop {
            std::thread::sleep(coordinator.cfg.heartbeat_interval);
            if coordinator.stop.load(Ordering::SeqCst) {
                return;
            }
            coordinator.check_health();
        })
        .expect("spawn health monitor")
}

impl Handler for Coordinator {
    fn handle(&self, frame: Frame) -> Frame {
        let result: Result<Frame, WireError> = (|| match frame.kind {
            opcode::COORD_GET_VIEW => {
                let _: GetViewReq = decode_request(&frame)?;
                Ok(ok_response(&frame, &*self.must_view()?))
            }
            opcode::COORD_HEARTBEAT => {
                let r: HeartbeatReq = decode_request(&frame)?;
                let view_version = self.heartbeat(&r.ltc_id, r.loads)?;
                Ok(ok_response(&frame, &HeartbeatResp { view_version }))
            }
            opcode::COORD_REPORT_LOAD => {
                let r: ReportLoadReq = decode_request(&frame)?;
                self.report_load(&r.ltc_id, r.loads)?;
                Ok(ok_response(&frame, &()))
            }
            opcode::COORD_ADD_LTC => {
                let r: AddLtcReq = decode_request(&frame)?;
                let (view, moved) = self.add_ltc(&r.id, &r.addr).map_err(WireError::from)?;
                Ok(ok_response(&frame, &MembershipResp { view: (*view).clone(), moved }))
            }
            opcode::COORD_REMOVE_LTC => {
                let r: RemoveLtcReq = decode_request(&frame)?;
                let (view, moved) = self.remove_ltc(&r.id).map_err(WireError::from)?;
                Ok(ok_response(&frame, &MembershipResp { view: (*view).clone(), moved }))
            }
            opcode::COORD_ROUTE => {
                let r: RouteReq = decode_request(&frame)?;
                Ok(ok_response(&frame, &self.route(&r.key)?))
            }
            other => Err(WireError::UnknownOpcode(other)),
        })();
        result.unwrap_or_else(|e| err_response(&frame, &e))
    }
}
