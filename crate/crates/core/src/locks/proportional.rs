//! Batching-proportional lock: two FIFO sub-queues (one per core class)
//! plus a grant counter. While both classes are waiting, at most `batch`
//! big-class grants happen between two little-class grants, so the big
//! class gets a fixed `batch`-to-1 higher chance to lock without starving
//! the little class.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::platform::CoreClass;
use crate::spin::SpinWait;

use super::observer::LockObserver;

pub const DEFAULT_BATCH_RATIO: u32 = 10;

// Control-word layout: [63] locked | [62:48] streak | [47:24] big | [23:0] little.
const LOCKED: u64 = 1 << 63;
const STREAK_SHIFT: u32 = 48;
const STREAK_MAX: u64 = (1 << 15) - 1;
const BIG_SHIFT: u32 = 24;
const COUNT_MASK: u64 = (1 << 24) - 1;

#[inline]
fn streak(ctl: u64) -> u64 {
    (ctl >> STREAK_SHIFT) & STREAK_MAX
}

#[inline]
fn waiting(ctl: u64, class: CoreClass) -> u64 {
    match class {
        CoreClass::Big => (ctl >> BIG_SHIFT) & COUNT_MASK,
        CoreClass::Little => ctl & COUNT_MASK,
    }
}

#[inline]
fn count_unit(class: CoreClass) -> u64 {
    match class {
        CoreClass::Big => 1 << BIG_SHIFT,
        CoreClass::Little => 1,
    }
}

#[derive(Debug)]
pub struct BatchingProportionalLock {
    ctl: AtomicU64,
    big_next: AtomicU64,
    big_serving: AtomicU64,
    little_next: AtomicU64,
    little_serving: AtomicU64,
    batch: u64,
    observer: Option<Arc<LockObserver>>,
}

impl BatchingProportionalLock {
    /// `batch` = maximum consecutive big-class grants while little-class
    /// competitors wait (`B`); 1 means strict alternation.
    pub fn new(batch: u32) -> Self {
        assert!(
            (1..=STREAK_MAX as u32).contains(&batch),
            "batch ratio out of range"
        );
        BatchingProportionalLock {
            ctl: AtomicU64::new(0),
            big_next: AtomicU64::new(0),
            big_serving: AtomicU64::new(0),
            little_next: AtomicU64::new(0),
            little_serving: AtomicU64::new(0),
            batch: batch as u64,
            observer: None,
        }
    }

    pub fn with_observer(batch: u32, observer: Arc<LockObserver>) -> Self {
        BatchingProportionalLock {
            observer: Some(observer),
            ..Self::new(batch)
        }
    }

    pub fn batch_ratio(&self) -> u32 {
        self.batch as u32
    }

    #[inline]
    fn entitled(&self, class: CoreClass, ctl: u64) -> bool {
        match class {
            CoreClass::Big => waiting(ctl, CoreClass::Little) == 0 || streak(ctl) < self.batch,
            CoreClass::Little => waiting(ctl, CoreClass::Big) == 0 || streak(ctl) >= self.batch,
        }
    }

    fn queues(&self, class: CoreClass) -> (&AtomicU64, &AtomicU64) {
        match class {
            CoreClass::Big => (&self.big_next, &self.big_serving),
            CoreClass::Little => (&self.little_next, &self.little_serving),
        }
    }

    pub fn acquire(&self, class: CoreClass) {
        self.ctl.fetch_add(count_unit(class), Ordering::AcqRel);
        let (next, serving) = self.queues(class);
        let ticket = next.fetch_add(1, Ordering::Relaxed);
        let stamp = self.observer.as_ref().map(|o| o.note_enqueue());

        // FIFO within the class: only the class head competes.
        let mut spin = SpinWait::new();
        while serving.load(Ordering::Acquire) != ticket {
            spin.step();
        }

        // Inter-class arbitration on the control word. The grant-counter
        // rules make exactly one present class entitled at any instant.
        let mut spin = SpinWait::new();
        let granted_ctl = loop {
            let cur = self.ctl.load(Ordering::Relaxed);
            if cur & LOCKED == 0 && self.entitled(class, cur) {
                let new_streak = match class {
                    CoreClass::Big => (streak(cur) + 1).min(STREAK_MAX),
                    CoreClass::Little => 0,
                };
                let new = (cur & !(STREAK_MAX << STREAK_SHIFT))
                    | LOCKED
                    | (new_streak << STREAK_SHIFT);
                if self
                    .ctl
                    .compare_exchange_weak(cur, new, Ordering::Acquire, Ordering::Relaxed)
                    .is_ok()
                {
                    break cur;
                }
            } else {
                spin.step();
            }
        };
        serving.fetch_add(1, Ordering::Release);

        if let (Some(obs), Some(stamp)) = (&self.observer, stamp) {
            let opposite = match class {
                CoreClass::Big => waiting(granted_ctl, CoreClass::Little),
                CoreClass::Little => waiting(granted_ctl, CoreClass::Big),
            };
            obs.note_acquire(stamp, class, opposite);
        }
    }

    /// Caller must hold the lock, acquired with the same `class`.
    pub fn release(&self, class: CoreClass) {
        let prev = self
            .ctl
            .fetch_sub(LOCKED + count_unit(class), Ordering::Release);
        debug_assert!(prev & LOCKED != 0, "release without holding");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU64;

    #[test]
    fn single_class_behaves_as_fifo() {
        let obs = Arc::new(LockObserver::new());
        let lock = BatchingProportionalLock::with_observer(10, obs.clone());
        for _ in 0..5 {
            lock.acquire(CoreClass::Big);
            lock.release(CoreClass::Big);
        }
        let events = obs.take_events();
        assert_eq!(events.len(), 5);
        for e in &events {
            assert_eq!(e.enqueue_seq, e.acquire_seq);
        }
    }

    #[test]
    fn counter_stress_is_exact() {
        let _guard = crate::serial_test_guard();
        const PER_CLASS: usize = 2;
        const ITERS: u64 = 20_000;
        let lock = Arc::new(BatchingProportionalLock::new(10));
        let counter = Arc::new(AtomicU64::new(0));
        let handles: Vec<_> = (0..2 * PER_CLASS)
            .map(|i| {
                let (lock, counter) = (lock.clone(), counter.clone());
                let class = if i < PER_CLASS {
                    CoreClass::Big
                } else {
                    CoreClass::Little
                };
                std::thread::spawn(move || {
                    for _ in 0..ITERS {
                        lock.acquire(class);
                        let v = counter.load(Ordering::Relaxed);
                        counter.store(v + 1, Ordering::Relaxed);
                        lock.release(class);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(
            counter.load(Ordering::Relaxed),
            2 * PER_CLASS as u64 * ITERS
        );
    }

    #[test]
    fn batch_bound_never_exceeded_while_littles_wait() {
        let _guard = crate::serial_test_guard();
        const BATCH: u32 = 3;
        let obs = Arc::new(LockObserver::new());
        let lock = Arc::new(BatchingProportionalLock::with_observer(BATCH, obs.clone()));
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let lock = lock.clone();
                let class = if i < 2 {
                    CoreClass::Big
                } else {
                    CoreClass::Little
                };
                std::thread::spawn(move || {
                    for _ in 0..5_000 {
                        lock.acquire(class);
                        lock.release(class);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        // A run of more than BATCH consecutive big grants is legal only if
        // no little-class competitor was waiting when it continued.
        let events = obs.take_events();
        let mut run = 0u32;
        for e in &events {
            match e.class {
                CoreClass::Big => {
                    run += 1;
                    assert!(
                        run <= BATCH || e.detail == 0,
                        "big run {run} with {} littles waiting",
                        e.detail
                    );
                }
                CoreClass::Little => run = 0,
            }
        }
    }
}
