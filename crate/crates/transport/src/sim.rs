//! Deterministic in-process network.
//!
//! Every component registers a handler under its endpoint name; calls run
//! the handler on the caller's thread after sleeping a per-edge injected
//! latency. Latency is base + exponential jitter drawn from a ChaCha
//! stream seeded per directed edge, so a fixed seed reproduces the same
//! draw sequence regardless of what other edges are doing.

use crate::frame::Frame;
use crate::rpc::Handler;
use crate::{Transport, TransportError};
use parking_lot::{Mutex, RwLock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug)]
pub struct SimNetConfig {
    pub seed: u64,
    /// Default one-way latency per edge, microseconds.
    pub base_latency_us: u64,
    /// Mean of the exponential jitter added per leg, microseconds.
    pub jitter_mean_us: u64,
}

impl Default for SimNetConfig {
    fn default() -> Self {
        SimNetConfig { seed: 0, base_latency_us: 0, jitter_mean_us: 0 }
    }
}

#[derive(Clone, Copy)]
struct LatencyParams {
    base_us: u64,
    jitter_mean_us: u64,
}

struct EdgeState {
    params: LatencyParams,
    rng: ChaCha8Rng,
}

struct Partition {
    a: String,
    b: String,
    until: Instant,
}

struct SimInner {
    cfg: SimNetConfig,
    services: RwLock<HashMap<String, Arc<dyn Handler>>>,
    edges: Mutex<HashMap<(String, String), EdgeState>>,
    overrides: Mutex<HashMap<(String, String), LatencyParams>>,
    partitions: Mutex<Vec<Partition>>,
    next_request_id: AtomicU64,
}

/// Handle to the simulated fabric. Clone freely; all clones share state.
#[derive(Clone)]
pub struct SimNet {
    inner: Arc<SimInner>,
}

impl SimNet {
    pub fn new(cfg: SimNetConfig) -> Self {
        SimNet {
            inner: Arc::new(SimInner {
                cfg,
                services: RwLock::new(HashMap::new()),
                edges: Mutex::new(HashMap::new()),
                overrides: Mutex::new(HashMap::new()),
                partitions: Mutex::new(Vec::new()),
                next_request_id: AtomicU64::new(1),
            }),
        }
    }

    pub fn register(&self, name: &str, handler: Arc<dyn Handler>) {
        self.inner.services.write().insert(name.to_string(), handler);
    }

    /// Remove an endpoint; subsequent calls to it fail with
    /// ConnectionFailed. This is how component kills are simulated.
    pub fn unregister(&self, name: &str) {
        self.inner.services.write().remove(name);
    }

    pub fn is_registered(&self, name: &str) -> bool {
        self.inner.services.read().contains_key(name)
    }

    /// Override latency for one directed edge.
    pub fn set_edge_latency(&self, from: &str, to: &str, base_us: u64, jitter_mean_us: u64) {
        let key = (from.to_string(), to.to_string());
        let params = LatencyParams { base_us, jitter_mean_us };
        self.inner.overrides.lock().insert(key.clone(), params);
        // Re-seed keeps the edge deterministic under reconfiguration.
        self.inner.edges.lock().remove(&key);
    }

    /// Drop traffic between `a` and `b` (both directions) for `duration`.
    /// A zero duration is a no-op.
    pub fn partition(&self, a: &str, b: &str, duration: Duration) {
        if duration.is_zero() {
            return;
        }
        self.inner.partitions.lock().push(Partition {
            a: a.to_string(),
            b: b.to_string(),
            until: Instant::now() + duration,
        });
    }

    pub fn heal_all_partitions(&self) {
        self.inner.partitions.lock().clear();
    }

    /// A transport bound to a source endpoint name, so partitions know who
    /// is calling.
    pub fn endpoint(&self, from: &str) -> SimTransport {
        SimTransport { inner: self.inner.clone(), from: from.to_string() }
    }

    fn partitioned(&self, x: &str, y: &str) -> bool {
        let now = Instant::now();
        let mut parts = self.inner.partitions.lock();
        parts.retain(|p| p.until > now);
        parts
            .iter()
            .any(|p| (p.a == x && p.b == y) || (p.a == y && p.b == x))
    }

    /// Draw the next one-way latency for a directed edge. Exposed so tests
    /// can assert seeded determinism directly.
    pub fn next_latency_us(&self, from: &str, to: &str) -> u64 {
        let key = (from.to_string(), to.to_string());
        let mut edges = self.inner.edges.lock();
        let edge = edges.entry(key.clone()).or_insert_with(|| {
            let params = self
                .inner
                .overrides
                .lock()
                .get(&key)
                .copied()
                .unwrap_or(LatencyParams {
                    base_us: self.inner.cfg.base_latency_us,
                    jitter_mean_us: self.inner.cfg.jitter_mean_us,
                });
            let seed = self
                .inner
                .cfg
                .seed
                .wrapping_add(edge_hash(from))
                .wrapping_add(edge_hash(to).rotate_left(17));
            EdgeState { params, rng: ChaCha8Rng::seed_from_u64(seed) }
        });
        let jitter = if edge.params.jitter_mean_us == 0 {
            0
        } else {
            let u: f64 = edge.rng.gen_range(f64::EPSILON..1.0);
            (-(edge.params.jitter_mean_us as f64) * u.ln()) as u64
        };
        edge.params.base_us + jitter
    }
}

fn edge_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub struct SimTransport {
    inner: Arc<SimInner>,
    from: String,
}

impl SimTransport {
    fn net(&self) -> SimNet {
        SimNet { inner: self.inner.clone() }
    }
}

impl Transport for SimTransport {
    fn call(
        &self,
        endpoint: &str,
        mut frame: Frame,
        timeout: Duration,
    ) -> Result<Frame, TransportError> {
        if frame.oversize() {
            return Err(TransportError::Oversize);
        }
        let net = self.net();
        if net.partitioned(&self.from, endpoint) {
            return Err(TransportError::ConnectionFailed(format!(
                "partitioned from {endpoint}"
            )));
        }
        frame.request_id = self.inner.next_request_id.fetch_add(1, Ordering::Relaxed);
        let started = Instant::now();

        let request_leg = Duration::from_micros(net.next_latency_us(&self.from, endpoint));
        if request_leg > timeout {
            std::thread::sleep(timeout);
            return Err(TransportError::Timeout);
        }
        sleep(request_leg);

        let handler = self
            .inner
            .services
            .read()
            .get(endpoint)
            .cloned()
            .ok_or_else(|| {
                TransportError::ConnectionFailed(format!("{endpoint} not reachable"))
            })?;
        let request_id = frame.request_id;
        let response = handler.handle(frame);
        debug_assert_eq!(response.request_id, request_id, "handler must echo request id");

        if net.partitioned(&self.from, endpoint) {
            return Err(TransportError::ConnectionFailed(format!(
                "partitioned from {endpoint} (response lost)"
            )));
        }
        sleep(Duration::from_micros(net.next_latency_us(endpoint, &self.from)));
        if response.oversize() {
            return Err(TransportError::Oversize);
        }
        if started.elapsed() > timeout {
            return Err(TransportError::Timeout);
        }
        Ok(response)
    }
}

fn sleep(d: Duration) {
    if !d.is_zero() {
        std::thread::sleep(d);
    }
}
