//! Baseline lock implementations sharing one acquisition discipline, each
//! instrumentable for ordering and affinity observation.
//!
//! All locks are safe for concurrent use from any number of threads; a
//! [`WaitingRecord`] must not serve two simultaneous acquisitions, and lock
//! and unlock must happen on the same thread. Holder tracking is a debug
//! assertion; release-mode paths are unchecked.

mod mcs;
mod observer;
mod proportional;
mod tas;
mod ticket;

pub use mcs::{FifoQueueLock, WaitingRecord};
pub use observer::{AcquisitionEvent, EnqueueStamp, LockObserver};
pub use proportional::{BatchingProportionalLock, DEFAULT_BATCH_RATIO};
pub use tas::TestAndSetLock;
pub use ticket::TicketLock;
