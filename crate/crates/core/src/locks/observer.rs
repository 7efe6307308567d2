//! Ordering and affinity observation for lock implementations.

use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;

use crate::platform::{self, CoreClass};

/// One completed acquisition, as seen by an attached [`LockObserver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcquisitionEvent {
    pub worker: u64,
    pub class: CoreClass,
    /// Position in enqueue order. Meaningful when enqueues are serialized
    /// by the caller (the counter and the actual queue append are separate
    /// instructions, so concurrent enqueues may register out of order).
    pub enqueue_seq: u64,
    /// Position in acquisition order; assigned while the lock is held, so
    /// the sequence is strictly increasing and gap-free.
    pub acquire_seq: u64,
    pub enqueued_at_ns: u64,
    pub acquired_at_ns: u64,
    /// Lock-specific extra (the proportional lock stores the number of
    /// waiting little-class threads at grant time).
    pub detail: u64,
}

/// Sequence stamp handed out at enqueue time, consumed at acquire time.
#[derive(Debug, Clone, Copy)]
pub struct EnqueueStamp {
    seq: u64,
    at_ns: u64,
}

/// Collects per-acquisition records from instrumented locks.
///
/// Designed for ordering tests, not hot-path measurement: events go into a
/// mutex-protected log. `enqueue_count` is updated atomically at append time
/// so tests can serialize enqueues by watching it.
#[derive(Debug, Default)]
pub struct LockObserver {
    enqueue_seq: AtomicU64,
    acquire_seq: AtomicU64,
    events: Mutex<Vec<AcquisitionEvent>>,
}

impl LockObserver {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn note_enqueue(&self) -> EnqueueStamp {
        EnqueueStamp {
            seq: self.enqueue_seq.fetch_add(1, Ordering::AcqRel),
            at_ns: platform::now_ns(),
        }
    }

    /// Record an acquisition. Call while holding the lock.
    pub fn note_acquire(&self, stamp: EnqueueStamp, class: CoreClass, detail: u64) {
        let seq = self.acquire_seq.fetch_add(1, Ordering::AcqRel);
        self.events.lock().push(AcquisitionEvent {
            worker: platform::worker_id(),
            class,
            enqueue_seq: stamp.seq,
            acquire_seq: seq,
            enqueued_at_ns: stamp.at_ns,
            acquired_at_ns: platform::now_ns(),
            detail,
        });
    }

    /// Number of enqueues registered so far.
    pub fn enqueue_count(&self) -> u64 {
        self.enqueue_seq.load(Ordering::Acquire)
    }

    pub fn acquire_count(&self) -> u64 {
        self.acquire_seq.load(Ordering::Acquire)
    }

    /// Drain all recorded events, sorted by acquisition order.
    pub fn take_events(&self) -> Vec<AcquisitionEvent> {
        let mut events = std::mem::take(&mut *self.events.lock());
        events.sort_by_key(|e| e.acquire_seq);
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequences_start_at_zero_and_are_gap_free() {
        let obs = LockObserver::new();
        for _ in 0..5 {
            let stamp = obs.note_enqueue();
            obs.note_acquire(stamp, CoreClass::Big, 0);
        }
        let events = obs.take_events();
        assert_eq!(events.len(), 5);
        for (i, e) in events.iter().enumerate() {
            assert_eq!(e.acquire_seq, i as u64);
            assert!(e.acquired_at_ns >= e.enqueued_at_ns);
        }
    }
}
