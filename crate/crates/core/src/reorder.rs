//! Reorderable lock: exposes bounded reordering atop an unmodified FIFO
//! lock as a per-acquisition time window.
//!
//! Competitors using [`ReorderableLock::lock_immediately`] append to the
//! FIFO queue at once. Competitors using [`ReorderableLock::lock_reorder`]
//! become *standby competitors*: they stay out of the queue while other
//! competitors overtake them, and enqueue at the earliest of (a) a poll
//! observing the lock free, (b) expiry of their window. After enqueueing,
//! plain FIFO semantics apply, so every acquisition path reaches the queue
//! within a bounded time and the lock is starvation-free.
//!
//! There is deliberately no secondary queue for standby competitors: each
//! has its own window and enqueues at its own expiry instant.

use std::time::Duration;

use parking_lot::lock_api::RawMutex as _;

use crate::locks::{FifoQueueLock, WaitingRecord};
use crate::platform::now_ns;
use crate::spin::SpinWait;

/// Smallest window worth standing by for; anything shorter enqueues
/// immediately (about two monotonic-clock reads).
pub const DEFAULT_THRESHOLD_NS: u64 = 200;

/// Default cap used by [`ReorderableLock::lock_eventually`]: 100ms.
pub const DEFAULT_MAX_WINDOW_NS: u64 = 100_000_000;

/// Default wake interval for [`StandbyMode::Sleep`].
pub const DEFAULT_SLEEP_GRANULARITY: Duration = Duration::from_micros(50);

/// The FIFO lock underneath a [`ReorderableLock`]. The reorder layer never
/// modifies it: unlocking goes straight to the inner unlock procedure.
pub trait InnerLock: Send + Sync {
    fn lock(&self, record: &WaitingRecord);
    fn try_lock(&self, record: &WaitingRecord) -> bool;
    fn unlock(&self, record: &WaitingRecord);
    fn is_free(&self) -> bool;
}

impl InnerLock for FifoQueueLock {
    #[inline]
    fn lock(&self, record: &WaitingRecord) {
        self.acquire(record);
    }

    #[inline]
    fn try_lock(&self, record: &WaitingRecord) -> bool {
        self.try_acquire(record)
    }

    #[inline]
    fn unlock(&self, record: &WaitingRecord) {
        self.release(record);
    }

    #[inline]
    fn is_free(&self) -> bool {
        self.is_free()
    }
}

/// OS-blocking mutex for oversubscribed runs, where handing a spin lock to
/// a descheduled thread would stall the whole queue. Waiting records are
/// accepted and ignored.
pub struct BlockingMutex {
    raw: parking_lot::RawMutex,
}

impl std::fmt::Debug for BlockingMutex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockingMutex")
            .field("locked", &self.raw.is_locked())
            .finish()
    }
}

impl Default for BlockingMutex {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockingMutex {
    pub fn new() -> Self {
        BlockingMutex {
            raw: parking_lot::RawMutex::INIT,
        }
    }
}

impl InnerLock for BlockingMutex {
    fn lock(&self, _record: &WaitingRecord) {
        self.raw.lock();
    }

    fn try_lock(&self, _record: &WaitingRecord) -> bool {
        self.raw.try_lock()
    }

    fn unlock(&self, _record: &WaitingRecord) {
        // Contract mirrors the queue lock: callers release only what they hold.
        unsafe { self.raw.unlock() }
    }

    fn is_free(&self) -> bool {
        !self.raw.is_locked()
    }
}

/// How a standby competitor waits out its reorder window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandbyMode {
    /// Busy-poll with a doubling check schedule (default).
    Spin,
    /// Sleep between polls; for oversubscribed runs.
    Sleep { granularity: Duration },
}

/// Why a standby wait ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandbyOutcome {
    ObservedFree,
    Expired,
}

/// One lock-status poll during a standby wait.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PollSample {
    /// Value of the iteration counter when the poll fired (1, 2, 4, ... in
    /// spin mode).
    pub counter: u64,
    pub at_ns: u64,
    pub observed_free: bool,
}

/// Instrumented record of a standby wait.
#[derive(Debug, Clone)]
pub struct StandbyWaitTrace {
    pub polls: Vec<PollSample>,
    pub outcome: StandbyOutcome,
    pub started_ns: u64,
    pub finished_ns: u64,
}

#[derive(Debug)]
pub struct ReorderableLock<L = FifoQueueLock> {
    inner: L,
    threshold_ns: u64,
    max_window_ns: u64,
    standby: StandbyMode,
}

impl Default for ReorderableLock<FifoQueueLock> {
    fn default() -> Self {
        Self::new(FifoQueueLock::new())
    }
}

impl<L: InnerLock> ReorderableLock<L> {
    pub fn new(inner: L) -> Self {
        ReorderableLock {
            inner,
            threshold_ns: DEFAULT_THRESHOLD_NS,
            max_window_ns: DEFAULT_MAX_WINDOW_NS,
            standby: StandbyMode::Spin,
        }
    }

    /// `threshold_ns` must be positive and `max_window_ns >= threshold_ns`.
    pub fn with_windows(mut self, threshold_ns: u64, max_window_ns: u64) -> Self {
        assert!(threshold_ns > 0, "threshold must be positive");
        assert!(max_window_ns >= threshold_ns, "max window below threshold");
        self.threshold_ns = threshold_ns;
        self.max_window_ns = max_window_ns;
        self
    }

    pub fn with_standby(mut self, standby: StandbyMode) -> Self {
        self.standby = standby;
        self
    }

    pub fn threshold_ns(&self) -> u64 {
        self.threshold_ns
    }

    pub fn max_window_ns(&self) -> u64 {
        self.max_window_ns
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    /// Enqueue at once: identical contract to the inner FIFO lock.
    #[inline]
    pub fn lock_immediately(&self, record: &WaitingRecord) {
        self.inner.lock(record);
    }

    /// Stand by for up to `window_ns` before enqueueing. Windows below the
    /// threshold, or a lock observed free on entry, enqueue immediately.
    pub fn lock_reorder(&self, record: &WaitingRecord, window_ns: u64) {
        if window_ns < self.threshold_ns || self.inner.is_free() {
            self.inner.lock(record);
            return;
        }
        let window_end = now_ns().saturating_add(window_ns);
        self.standby_loop(window_end, |_, _| {});
        self.inner.lock(record);
    }

    /// [`Self::lock_reorder`] with the maximum window.
    #[inline]
    pub fn lock_eventually(&self, record: &WaitingRecord) {
        self.lock_reorder(record, self.max_window_ns);
    }

    /// Acquire only if the inner lock is free right now; never waits and
    /// never stands by.
    #[inline]
    pub fn try_lock(&self, record: &WaitingRecord) -> bool {
        self.inner.try_lock(record)
    }

    /// Unmodified unlock procedure of the inner lock.
    #[inline]
    pub fn unlock(&self, record: &WaitingRecord) {
        self.inner.unlock(record);
    }

    #[inline]
    pub fn is_free(&self) -> bool {
        self.inner.is_free()
    }

    /// Run a standby wait with full instrumentation, without acquiring.
    pub fn standby_wait_traced(&self, window_ns: u64) -> StandbyWaitTrace {
        let started_ns = now_ns();
        let window_end = started_ns.saturating_add(window_ns);
        let mut polls = Vec::new();
        let outcome = self.standby_loop(window_end, |counter, observed_free| {
            polls.push(PollSample {
                counter,
                at_ns: now_ns(),
                observed_free,
            });
        });
        StandbyWaitTrace {
            polls,
            outcome,
            started_ns,
            finished_ns: now_ns(),
        }
    }

    /// Wait until the lock is observed free or the window expires, polling
    /// when the iteration counter reaches 1, 2, 4, 8, ... (binary
    /// exponential backoff over checks). Expiry is tested against the clock
    /// on every iteration.
    fn standby_loop(&self, window_end: u64, mut on_poll: impl FnMut(u64, bool)) -> StandbyOutcome {
        match self.standby {
            StandbyMode::Spin => {
                let mut cnt: u64 = 0;
                let mut next_check: u64 = 1;
                let mut spin = SpinWait::new();
                while now_ns() < window_end {
                    let current = cnt;
                    cnt = cnt.wrapping_add(1);
                    if current == next_check {
                        let free = self.inner.is_free();
                        on_poll(current, free);
                        if free {
                            return StandbyOutcome::ObservedFree;
                        }
                        next_check = next_check.wrapping_shl(1);
                    }
                    spin.step();
                }
                StandbyOutcome::Expired
            }
            StandbyMode::Sleep { granularity } => {
                let mut polls: u64 = 0;
                loop {
                    let now = now_ns();
                    if now >= window_end {
                        return StandbyOutcome::Expired;
                    }
                    polls += 1;
                    let free = self.inner.is_free();
                    on_poll(polls, free);
                    if free {
                        return StandbyOutcome::ObservedFree;
                    }
                    let remaining = Duration::from_nanos(window_end - now);
                    std::thread::sleep(remaining.min(granularity));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::time::Instant;

    fn hold_for(lock: &Arc<ReorderableLock>, ms: u64) -> std::thread::JoinHandle<()> {
        let lock = lock.clone();
        let (tx, rx) = std::sync::mpsc::channel();
        let handle = std::thread::spawn(move || {
            let record = WaitingRecord::new();
            lock.lock_immediately(&record);
            tx.send(()).unwrap();
            std::thread::sleep(Duration::from_millis(ms));
            lock.unlock(&record);
        });
        rx.recv().unwrap();
        handle
    }

    #[test]
    fn free_lock_acquires_immediately() {
        let lock = ReorderableLock::default();
        let record = WaitingRecord::new();
        let t = Instant::now();
        lock.lock_reorder(&record, 50_000_000);
        assert!(t.elapsed() < Duration::from_millis(20));
        lock.unlock(&record);
        lock.lock_eventually(&record);
        lock.unlock(&record);
        assert!(lock.is_free());
    }

    #[test]
    fn try_lock_never_stands_by() {
        let lock = Arc::new(ReorderableLock::default());
        let record = WaitingRecord::new();
        assert!(lock.try_lock(&record));
        lock.unlock(&record);
        let holder = hold_for(&lock, 20);
        let t = Instant::now();
        assert!(!lock.try_lock(&record));
        assert!(t.elapsed() < Duration::from_millis(10));
        holder.join().unwrap();
        // A failed try leaves the queue untouched.
        lock.lock_immediately(&record);
        lock.unlock(&record);
    }

    #[test]
    fn expired_window_bounds_the_standby_delay() {
        let _guard = crate::serial_test_guard();
        let lock = Arc::new(ReorderableLock::default());
        let holder = hold_for(&lock, 30);
        let trace = lock.standby_wait_traced(5_000_000);
        assert_eq!(trace.outcome, StandbyOutcome::Expired);
        let waited = trace.finished_ns - trace.started_ns;
        assert!(
            (5_000_000..15_000_000).contains(&waited),
            "stood by for {waited}ns"
        );
        holder.join().unwrap();
    }

    #[test]
    fn free_lock_observed_at_first_poll() {
        let lock = ReorderableLock::default();
        let trace = lock.standby_wait_traced(10_000_000);
        assert_eq!(trace.outcome, StandbyOutcome::ObservedFree);
        assert_eq!(trace.polls.len(), 1);
        assert_eq!(trace.polls[0].counter, 1);
    }

    #[test]
    fn degenerate_window_expires_with_at_most_one_poll() {
        let lock = Arc::new(ReorderableLock::default());
        let holder = hold_for(&lock, 10);
        let trace = lock.standby_wait_traced(1);
        assert_eq!(trace.outcome, StandbyOutcome::Expired);
        assert!(trace.polls.len() <= 1);
        holder.join().unwrap();
    }

    #[test]
    fn poll_counters_follow_doubling_schedule() {
        let _guard = crate::serial_test_guard();
        let lock = Arc::new(ReorderableLock::default());
        let holder = hold_for(&lock, 30);
        let trace = lock.standby_wait_traced(8_000_000);
        assert_eq!(trace.outcome, StandbyOutcome::Expired);
        assert!(!trace.polls.is_empty());
        for (i, poll) in trace.polls.iter().enumerate() {
            assert_eq!(poll.counter, 1u64 << i);
            assert!(!poll.observed_free);
        }
        holder.join().unwrap();
    }

    #[test]
    fn sleep_standby_also_honors_the_window() {
        let _guard = crate::serial_test_guard();
        let lock = Arc::new(ReorderableLock::new(BlockingMutex::new()).with_standby(
            StandbyMode::Sleep {
                granularity: Duration::from_micros(200),
            },
        ));
        let lk = lock.clone();
        let (tx, rx) = std::sync::mpsc::channel();
        let holder = std::thread::spawn(move || {
            let record = WaitingRecord::new();
            lk.lock_immediately(&record);
            tx.send(()).unwrap();
            std::thread::sleep(Duration::from_millis(30));
            lk.unlock(&record);
        });
        rx.recv().unwrap();
        let trace = lock.standby_wait_traced(4_000_000);
        assert_eq!(trace.outcome, StandbyOutcome::Expired);
        let waited = trace.finished_ns - trace.started_ns;
        assert!(
            (4_000_000..20_000_000).contains(&waited),
            "slept for {waited}ns"
        );
        holder.join().unwrap();
    }

    #[test]
    fn below_threshold_window_enqueues_ahead_of_later_immediate() {
        // A below-threshold window must enqueue NOW: a lock_immediately
        // competitor arriving later lands behind it in the queue.
        use crate::locks::LockObserver;
        let obs = Arc::new(LockObserver::new());
        let lock = Arc::new(ReorderableLock::new(FifoQueueLock::with_observer(
            obs.clone(),
        )));
        let holder_record = WaitingRecord::new();
        lock.lock_immediately(&holder_record);

        let l1 = lock.clone();
        let a = std::thread::spawn(move || {
            crate::platform::set_worker_id(1);
            let record = WaitingRecord::new();
            l1.lock_reorder(&record, DEFAULT_THRESHOLD_NS - 1);
            l1.unlock(&record);
        });
        while obs.enqueue_count() < 2 {
            std::thread::yield_now();
        }
        let l2 = lock.clone();
        let b = std::thread::spawn(move || {
            crate::platform::set_worker_id(2);
            let record = WaitingRecord::new();
            l2.lock_immediately(&record);
            l2.unlock(&record);
        });
        while obs.enqueue_count() < 3 {
            std::thread::yield_now();
        }
        lock.unlock(&holder_record);
        a.join().unwrap();
        b.join().unwrap();
        let events = obs.take_events();
        let order: Vec<u64> = events.iter().map(|e| e.worker).collect();
        assert_eq!(order[1..], [1, 2]);
    }
}
