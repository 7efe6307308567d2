//! MCS-style FIFO queue lock with caller-provided waiting records.

use std::ptr;
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicU8, Ordering};
use std::sync::Arc;

use crate::platform::{self, CoreClass};
use crate::spin::SpinWait;

use super::observer::LockObserver;

const STATE_IDLE: u8 = 0;
const STATE_QUEUED: u8 = 1;
const STATE_HELD: u8 = 2;

/// Per-acquisition queue node. Create one per thread and reuse it; a record
/// must never serve two acquisitions at once.
///
/// While a record is queued or held, the lock's internal queue refers to it
/// by address, so it must not be moved or dropped until released (violations
/// are caught by debug assertions on the state flag).
#[derive(Debug)]
pub struct WaitingRecord {
    locked: AtomicBool,
    next: AtomicPtr<WaitingRecord>,
    state: AtomicU8,
}

impl WaitingRecord {
    pub const fn new() -> Self {
        WaitingRecord {
            locked: AtomicBool::new(false),
            next: AtomicPtr::new(ptr::null_mut()),
            state: AtomicU8::new(STATE_IDLE),
        }
    }

    #[inline]
    fn debug_transition(&self, from: u8, to: u8, what: &str) {
        if cfg!(debug_assertions) {
            let prev = self.state.swap(to, Ordering::Relaxed);
            assert_eq!(prev, from, "waiting record misuse: {what}");
        }
    }
}

impl Default for WaitingRecord {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for WaitingRecord {
    fn drop(&mut self) {
        debug_assert_eq!(
            self.state.load(Ordering::Relaxed),
            STATE_IDLE,
            "waiting record dropped while queued or held"
        );
    }
}

/// FIFO queue spinlock: `tail` points at the most recent waiting record,
/// each record hands the lock to its successor. Waiters spin on their own
/// record only. Free iff `tail` is null.
#[derive(Debug, Default)]
pub struct FifoQueueLock {
    tail: AtomicPtr<WaitingRecord>,
    observer: Option<Arc<LockObserver>>,
}

impl FifoQueueLock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_observer(observer: Arc<LockObserver>) -> Self {
        FifoQueueLock {
            tail: AtomicPtr::new(ptr::null_mut()),
            observer: Some(observer),
        }
    }

    /// Append `record` to the queue and block until it reaches the head.
    /// Acquisition order is exactly append order.
    pub fn acquire(&self, record: &WaitingRecord) {
        record.debug_transition(STATE_IDLE, STATE_QUEUED, "acquire with busy record");
        record.next.store(ptr::null_mut(), Ordering::Relaxed);
        record.locked.store(true, Ordering::Relaxed);
        let me = record as *const WaitingRecord as *mut WaitingRecord;
        let prev = self.tail.swap(me, Ordering::AcqRel);
        let stamp = self.observer.as_ref().map(|o| o.note_enqueue());
        if !prev.is_null() {
            // The predecessor record outlives this store: its owner cannot
            // release (and thus reuse it) before observing `next`.
            unsafe { (*prev).next.store(me, Ordering::Release) };
            let mut spin = SpinWait::new();
            while record.locked.load(Ordering::Acquire) {
                spin.step();
            }
        }
        record.debug_transition(STATE_QUEUED, STATE_HELD, "handoff to non-queued record");
        if let (Some(obs), Some(stamp)) = (&self.observer, stamp) {
            let class = platform::declared_thread_class().unwrap_or(CoreClass::Big);
            obs.note_acquire(stamp, class, 0);
        }
    }

    /// Acquire only if the queue is empty, without waiting.
    pub fn try_acquire(&self, record: &WaitingRecord) -> bool {
        record.next.store(ptr::null_mut(), Ordering::Relaxed);
        record.locked.store(true, Ordering::Relaxed);
        let me = record as *const WaitingRecord as *mut WaitingRecord;
        let ok = self
            .tail
            .compare_exchange(ptr::null_mut(), me, Ordering::AcqRel, Ordering::Relaxed)
            .is_ok();
        if ok {
            record.debug_transition(STATE_IDLE, STATE_HELD, "try_acquire with busy record");
            if let Some(obs) = &self.observer {
                let stamp = obs.note_enqueue();
                let class = platform::declared_thread_class().unwrap_or(CoreClass::Big);
                obs.note_acquire(stamp, class, 0);
            }
        }
        ok
    }

    /// Hand the lock to the successor, or mark it free if none is queued.
    /// Caller must hold the lock through `record`.
    pub fn release(&self, record: &WaitingRecord) {
        record.debug_transition(STATE_HELD, STATE_IDLE, "release without holding");
        let me = record as *const WaitingRecord as *mut WaitingRecord;
        let mut next = record.next.load(Ordering::Acquire);
        if next.is_null() {
            if self
                .tail
                .compare_exchange(me, ptr::null_mut(), Ordering::Release, Ordering::Relaxed)
                .is_ok()
            {
                return;
            }
            // A successor swapped itself in but has not linked yet.
            let mut spin = SpinWait::new();
            loop {
                next = record.next.load(Ordering::Acquire);
                if !next.is_null() {
                    break;
                }
                spin.step();
            }
        }
        unsafe { (*next).locked.store(false, Ordering::Release) };
    }

    /// True iff the queue was observed empty (no holder, no waiters) at some
    /// instant during the call. May be stale immediately afterwards.
    #[inline]
    pub fn is_free(&self) -> bool {
        self.tail.load(Ordering::Relaxed).is_null()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU64;
    use std::sync::Barrier;

    #[test]
    fn uncontended_acquire_release() {
        let lock = FifoQueueLock::new();
        let record = WaitingRecord::new();
        assert!(lock.is_free());
        lock.acquire(&record);
        assert!(!lock.is_free());
        lock.release(&record);
        assert!(lock.is_free());
    }

    #[test]
    fn try_acquire_fails_while_held() {
        let lock = FifoQueueLock::new();
        let (a, b) = (WaitingRecord::new(), WaitingRecord::new());
        assert!(lock.try_acquire(&a));
        assert!(!lock.try_acquire(&b));
        lock.release(&a);
        assert!(lock.try_acquire(&b));
        lock.release(&b);
    }

    #[test]
    fn record_is_reusable_across_acquisitions() {
        let lock = FifoQueueLock::new();
        let record = WaitingRecord::new();
        for _ in 0..100 {
            lock.acquire(&record);
            lock.release(&record);
        }
        assert!(lock.is_free());
    }

    #[test]
    fn counter_stress_is_exact() {
        let _guard = crate::serial_test_guard();
        const THREADS: usize = 4;
        const ITERS: u64 = 20_000;
        let lock = Arc::new(FifoQueueLock::new());
        let counter = Arc::new(AtomicU64::new(0));
        let barrier = Arc::new(Barrier::new(THREADS));
        let handles: Vec<_> = (0..THREADS)
            .map(|_| {
                let (lock, counter, barrier) = (lock.clone(), counter.clone(), barrier.clone());
                std::thread::spawn(move || {
                    let record = WaitingRecord::new();
                    barrier.wait();
                    for _ in 0..ITERS {
                        lock.acquire(&record);
                        let v = counter.load(Ordering::Relaxed);
                        counter.store(v + 1, Ordering::Relaxed);
                        lock.release(&record);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(counter.load(Ordering::Relaxed), THREADS as u64 * ITERS);
    }

    #[test]
    #[should_panic(expected = "release without holding")]
    #[cfg(debug_assertions)]
    fn release_without_holding_asserts() {
        let lock = FifoQueueLock::new();
        let record = WaitingRecord::new();
        lock.release(&record);
    }
}
