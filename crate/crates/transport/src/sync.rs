//! Small concurrency helpers shared by the services.

use parking_lot::{Condvar, Mutex};

/// Counting semaphore with an observable wait queue, used to cap
/// concurrent request handling.
pub struct Semaphore {
    state: Mutex<SemState>,
    cv: Condvar,
}

struct SemState {
    available: usize,
    waiting: usize,
}

pub struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore {
            state: Mutex::new(SemState { available: permits, waiting: 0 }),
            cv: Condvar::new(),
        }
    }

    /// Block until a permit is free.
    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut state = self.state.lock();
        while state.available == 0 {
            state.waiting += 1;
            self.cv.wait(&mut state);
            state.waiting -= 1;
        }
        state.available -= 1;
        SemaphoreGuard { sem: self }
    }

    /// Like [`acquire`](Self::acquire) but refuses to queue more than
    /// `max_waiting` callers; returns None when the queue is full.
    pub fn acquire_bounded(&self, max_waiting: usize) -> Option<SemaphoreGuard<'_>> {
        let mut state = self.state.lock();
        if state.available == 0 && state.waiting >= max_waiting {
            return None;
        }
        while state.available == 0 {
            state.waiting += 1;
            self.cv.wait(&mut state);
            state.waiting -= 1;
        }
        state.available -= 1;
        Some(SemaphoreGuard { sem: self })
    }

    pub fn waiting(&self) -> usize {
        self.state.lock().waiting
    }

    pub fn available(&self) -> usize {
        self.state.lock().available
    }
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut state = self.sem.state.lock();
        state.available += 1;
        self.sem.cv.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn caps_concurrency() {
        let sem = Arc::new(Semaphore::new(2));
        let peak = Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let current = Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let mut joins = Vec::new();
        for _ in 0..8 {
            let sem = sem.clone();
            let peak = peak.clone();
            let current = current.clone();
            joins.push(std::thread::spawn(move || {
                let _g = sem.acquire();
                let now = current.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
                peak.fetch_max(now, std::sync::atomic::Ordering::SeqCst);
                std::thread::sleep(std::time::Duration::from_millis(5));
                current.fetch_sub(1, std::sync::atomic::Ordering::SeqCst);
            }));
        }
        for j in joins {
            j.join().unwrap();
        }
        assert!(peak.load(std::sync::atomic::Ordering::SeqCst) <= 2);
        assert_eq!(sem.available(), 2);
    }

    #[test]
    fn bounded_queue_rejects_overflow() {
        let sem = Arc::new(Semaphore::new(1));
        let g = sem.acquire();
        assert!(sem.acquire_bounded(0).is_none());
        drop(g);
        assert!(sem.acquire_bounded(0).is_some());
    }
}
