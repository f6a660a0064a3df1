//! Per-StoC load signal: outstanding requests and an EWMA of request
//! service latency. This is the "fastest StoC" signal that power-of-d
//! selection minimizes.

use parking_lot::Mutex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::time::Instant;

const EWMA_ALPHA: f64 = 0.2;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct StoCStats {
    pub outstanding_requests: u32,
    pub ewma_latency_us: u64,
    pub bytes_stored: u64,
    pub object_count: u64,
}

impl StoCStats {
    /// Load ordering used by power-of-d: queue depth first, then latency.
    pub fn load_key(&self) -> (u32, u64) {
        (self.outstanding_requests, self.ewma_latency_us)
    }
}

#[derive(Default)]
pub struct StatsTracker {
    outstanding: AtomicI64,
    ewma_us: Mutex<f64>,
    bytes_stored: AtomicU64,
    object_count: AtomicU64,
}

impl StatsTracker {
    pub fn begin_request(&self) -> RequestGuard<'_> {
        self.outstanding.fetch_add(1, Ordering::SeqCst);
        RequestGuard { tracker: self, started: Instant::now() }
    }

    pub fn add_bytes(&self, delta: i64) {
        if delta >= 0 {
            self.bytes_stored.fetch_add(delta as u64, Ordering::SeqCst);
        } else {
            self.bytes_stored.fetch_sub((-delta) as u64, Ordering::SeqCst);
        }
    }

    pub fn add_objects(&self, delta: i64) {
        if delta >= 0 {
            self.object_count.fetch_add(delta as u64, Ordering::SeqCst);
        } else {
            self.object_count.fetch_sub((-delta) as u64, Ordering::SeqCst);
        }
    }

    pub fn set_storage(&self, bytes: u64, objects: u64) {
        self.bytes_stored.store(bytes, Ordering::SeqCst);
        self.object_count.store(objects, Ordering::SeqCst);
    }

    pub fn snapshot(&self) -> StoCStats {
        StoCStats {
            outstanding_requests: self.outstanding.load(Ordering::SeqCst).max(0) as u32,
            ewma_latency_us: *self.ewma_us.lock() as u64,
            bytes_stored: self.bytes_stored.load(Ordering::SeqCst),
            object_count: self.object_count.load(Ordering::SeqCst),
        }
    }
}

/// Power-of-d choice: sample `d` distinct candidates uniformly and return
/// the index of the one with the smallest `(outstanding, ewma_latency)`
/// load key. Deterministic given the RNG state; ties break toward the
/// lower candidate index.
pub fn select_power_of_d<R: Rng>(
    candidates: &[(String, StoCStats)],
    d: usize,
    rng: &mut R,
) -> Option<usize> {
    if candidates.is_empty() || d == 0 {
        return None;
    }
    let d = d.min(candidates.len());
    // partial Fisher-Yates over an index vector draws d distinct samples
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    for i in 0..d {
        let j = rng.gen_range(i..idx.len());
        idx.swap(i, j);
    }
    idx[..d]
        .iter()
        .copied()
        .min_by_key(|&i| (candidates[i].1.load_key(), i))
}

/// Decrements `outstanding` and folds the request's service time into the
/// EWMA when dropped, so every completed request updates the signal.
pub struct RequestGuard<'a> {
    tracker: &'a StatsTracker,
    started: Instant,
}

impl Drop for RequestGuard<'_> {
    fn drop(&mut self) {
        let us = self.started.elapsed().as_micros() as f64;
        let mut ewma = self.tracker.ewma_us.lock();
        *ewma = if *ewma == 0.0 { us } else { EWMA_ALPHA * us + (1.0 - EWMA_ALPHA) * *ewma };
        self.tracker.outstanding.fetch_sub(1, Ordering::SeqCst);
    }
}
