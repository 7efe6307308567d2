//! Test-and-set spinlock. No ordering or starvation guarantee: the holder
//! is whoever wins the atomic swap, so under sustained contention the
//! acquisition counts per core class may be arbitrarily skewed.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::platform::{self, CoreClass};
use crate::spin::SpinWait;

use super::observer::LockObserver;

#[derive(Debug, Default)]
pub struct TestAndSetLock {
    state: AtomicBool,
    observer: Option<Arc<LockObserver>>,
}

impl TestAndSetLock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_observer(observer: Arc<LockObserver>) -> Self {
        TestAndSetLock {
            state: AtomicBool::new(false),
            observer: Some(observer),
        }
    }

    pub fn acquire(&self) {
        let stamp = self.observer.as_ref().map(|o| o.note_enqueue());
        let mut spin = SpinWait::new();
        loop {
            if !self.state.swap(true, Ordering::Acquire) {
                break;
            }
            // Test-and-test-and-set: spin on a plain load between swaps.
            while self.state.load(Ordering::Relaxed) {
                spin.step();
            }
        }
        if let (Some(obs), Some(stamp)) = (&self.observer, stamp) {
            let class = platform::declared_thread_class().unwrap_or(CoreClass::Big);
            obs.note_acquire(stamp, class, 0);
        }
    }

    pub fn try_acquire(&self) -> bool {
        !self.state.swap(true, Ordering::Acquire)
    }

    pub fn release(&self) {
        debug_assert!(
            self.state.load(Ordering::Relaxed),
            "release without holding"
        );
        self.state.store(false, Ordering::Release);
    }

    #[inline]
    pub fn is_free(&self) -> bool {
        !self.state.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU64;

    #[test]
    fn uncontended_single_swap() {
        let lock = TestAndSetLock::new();
        assert!(lock.is_free());
        assert!(lock.try_acquire());
        assert!(!lock.is_free());
        assert!(!lock.try_acquire());
        lock.release();
        assert!(lock.is_free());
    }

    #[test]
    fn counter_stress_is_exact() {
        let _guard = crate::serial_test_guard();
        const THREADS: usize = 4;
        const ITERS: u64 = 20_000;
        let lock = Arc::new(TestAndSetLock::new());
        let counter = Arc::new(AtomicU64::new(0));
        let handles: Vec<_> = (0..THREADS)
            .map(|_| {
                let (lock, counter) = (lock.clone(), counter.clone());
                std::thread::spawn(move || {
                    for _ in 0..ITERS {
                        lock.acquire();
                        let v = counter.load(Ordering::Relaxed);
                        counter.store(v + 1, Ordering::Relaxed);
                        lock.release();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(counter.load(Ordering::Relaxed), THREADS as u64 * ITERS);
    }
}
