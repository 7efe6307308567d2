//! SLO-guided locking for asymmetric multicore processors.
//!
//! Processors that mix fast "big" and slow "little" cores break the implicit
//! symmetry assumption of classic scalable locks: FIFO queue locks expose the
//! little cores' longer critical sections on the critical path (throughput
//! collapse), while unfair test-and-set locks develop a hardware-dependent
//! affinity toward one core class (latency collapse, even starvation).
//!
//! This crate implements an alternative ordering: a [`ReorderableLock`] that
//! exposes bounded reordering atop an unmodified FIFO queue lock as a
//! per-acquisition time window, and an [`EpochRuntime`] that picks that window
//! automatically from an application-level latency SLO ("pct% of epochs must
//! complete within N ns") via linear-growth / exponential-reduction feedback.
//!
//! The crate also carries everything needed to evaluate the claim on ordinary
//! symmetric hardware:
//!
//! * [`locks`] — baseline lock implementations (MCS-style queue lock,
//!   test-and-set, ticket, batching-proportional) with ordering observation.
//! * [`platform`] — monotonic clock, core classification, thread pinning and
//!   calibrated big/little asymmetry emulation.
//! * [`harness`] — a benchmark suite with per-class latency percentiles,
//!   CDFs and throughput reports across all lock kinds.
//! * [`model`] — closed-form throughput formulas and a deterministic
//!   discrete-event simulator used as ground truth for property tests.

pub mod error;
pub mod harness;
pub mod locks;
pub mod metrics;
pub mod model;
pub mod platform;
pub mod reorder;
pub mod runtime;
mod spin;

pub use error::{CalibrationError, ConfigError, EpochError, HarnessError};

/// Serializes timing- and CPU-sensitive unit tests; on small hosts they
/// destroy each other's measurements when run in parallel.
#[cfg(test)]
pub(crate) fn serial_test_guard() -> parking_lot::MutexGuard<'static, ()> {
    static SERIAL: parking_lot::Mutex<()> = parking_lot::Mutex::new(());
    SERIAL.lock()
}
pub use locks::{
    BatchingProportionalLock, FifoQueueLock, LockObserver, TestAndSetLock, TicketLock,
    WaitingRecord,
};
pub use metrics::LatencyRecorder;
pub use platform::{CoreClass, CoreTypeMap, EmulationProfile, PlatformSettings};
pub use reorder::{ReorderableLock, StandbyMode, StandbyOutcome, StandbyWaitTrace};
pub use runtime::{adjust_window, EpochRuntime, EpochState, SloConfig, ThreadEpochs};
