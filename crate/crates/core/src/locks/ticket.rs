//! Ticket lock: FIFO by ticket order.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::platform::{self, CoreClass};
use crate::spin::SpinWait;

use super::observer::LockObserver;

#[derive(Debug, Default)]
pub struct TicketLock {
    next_ticket: AtomicU64,
    now_serving: AtomicU64,
    observer: Option<Arc<LockObserver>>,
}

impl TicketLock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_observer(observer: Arc<LockObserver>) -> Self {
        TicketLock {
            observer: Some(observer),
            ..Self::default()
        }
    }

    /// Draw a ticket and wait until it is served. Returns the ticket.
    pub fn acquire(&self) -> u64 {
        let ticket = self.next_ticket.fetch_add(1, Ordering::Relaxed);
        let stamp = self.observer.as_ref().map(|o| o.note_enqueue());
        let mut spin = SpinWait::new();
        while self.now_serving.load(Ordering::Acquire) != ticket {
            spin.step();
        }
        if let (Some(obs), Some(stamp)) = (&self.observer, stamp) {
            let class = platform::declared_thread_class().unwrap_or(CoreClass::Big);
            obs.note_acquire(stamp, class, ticket);
        }
        ticket
    }

    /// Take a ticket only if it would be served immediately.
    pub fn try_acquire(&self) -> bool {
        let serving = self.now_serving.load(Ordering::Acquire);
        self.next_ticket
            .compare_exchange(serving, serving + 1, Ordering::AcqRel, Ordering::Relaxed)
            .is_ok()
    }

    pub fn release(&self) {
        debug_assert!(!self.is_free(), "release without holding");
        self.now_serving.fetch_add(1, Ordering::Release);
    }

    #[inline]
    pub fn is_free(&self) -> bool {
        self.next_ticket.load(Ordering::Relaxed) == self.now_serving.load(Ordering::Relaxed)
    }
}
