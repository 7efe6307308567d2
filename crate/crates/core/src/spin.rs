//! Spin-wait helper shared by all lock implementations.

use std::hint::spin_loop;
use std::thread;

/// Exponential relax-then-yield backoff.
///
/// The first few steps stay on-core with a doubling number of CPU relax
/// hints. After that every step yields to the OS scheduler, so that waiters
/// make progress even when there are more runnable threads than cores
/// (descheduled-successor handoff would otherwise stall for a full
/// scheduling quantum).
pub struct SpinWait {
    step: u32,
}

const SPIN_STEPS: u32 = 6;

impl SpinWait {
    #[inline]
    pub fn new() -> Self {
        SpinWait { step: 0 }
    }

    #[inline]
    pub fn step(&mut self) {
        if self.step < SPIN_STEPS {
            for _ in 0..(1u32 << self.step) {
                spin_loop();
            }
            self.step += 1;
        } else {
            thread::yield_now();
        }
    }
}

impl Default for SpinWait {
    fn default() -> Self {
        Self::new()
    }
}
