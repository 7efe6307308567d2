//! SLO feedback layer: epoch bookkeeping, reorder-window adaptation and
//! class-based lock dispatch.
//!
//! Applications delimit latency-critical regions with [`EpochRuntime::epoch_start`]
//! / [`EpochRuntime::epoch_end`], passing the epoch's latency SLO in
//! nanoseconds. Inside an epoch, little-core lock acquisitions stand by for
//! the epoch's current reorder window; the window is adapted at every epoch
//! end by [`adjust_window`] — linear growth while the SLO is met,
//! exponential reduction when it is violated, the same conservative shape
//! as TCP congestion control. Big-core acquisitions always enqueue
//! immediately and never adapt anything.

use std::sync::atomic::{AtomicU32, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::EpochError;
use crate::locks::WaitingRecord;
use crate::platform::{classify_current_core, declared_thread_class, now_ns, CoreClass, CoreTypeMap};
use crate::reorder::{InnerLock, ReorderableLock};

pub use crate::reorder::DEFAULT_MAX_WINDOW_NS;

/// Default SLO percentile: the feedback targets P99.
pub const DEFAULT_PCT: u8 = 99;
/// Default floor for the linear growth step.
pub const DEFAULT_MIN_UNIT_NS: u64 = 100;
/// Default number of distinct epoch ids per process.
pub const DEFAULT_MAX_EPOCHS: usize = 64;

/// Feedback tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SloConfig {
    pct: u8,
    min_unit_ns: u64,
    max_window_ns: u64,
    max_epochs: usize,
}

impl Default for SloConfig {
    fn default() -> Self {
        SloConfig {
            pct: DEFAULT_PCT,
            min_unit_ns: DEFAULT_MIN_UNIT_NS,
            max_window_ns: DEFAULT_MAX_WINDOW_NS,
            max_epochs: DEFAULT_MAX_EPOCHS,
        }
    }
}

impl SloConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Percentile the SLO speaks about (`99` = "pct 99% of epochs in time").
    pub fn pct(mut self, pct: u8) -> Self {
        assert!((1..=99).contains(&pct), "pct must be in 1..=99");
        self.pct = pct;
        self
    }

    pub fn min_unit_ns(mut self, min_unit_ns: u64) -> Self {
        assert!(min_unit_ns > 0, "min unit must be positive");
        self.min_unit_ns = min_unit_ns;
        self
    }

    pub fn max_window_ns(mut self, max_window_ns: u64) -> Self {
        self.max_window_ns = max_window_ns;
        self
    }

    pub fn max_epochs(mut self, max_epochs: usize) -> Self {
        assert!(max_epochs >= 1, "need at least one epoch slot");
        self.max_epochs = max_epochs;
        self
    }

    pub fn get_pct(&self) -> u8 {
        self.pct
    }

    pub fn get_min_unit_ns(&self) -> u64 {
        self.min_unit_ns
    }

    pub fn get_max_window_ns(&self) -> u64 {
        self.max_window_ns
    }

    pub fn get_max_epochs(&self) -> usize {
        self.max_epochs
    }
}

/// Per-thread, per-epoch-id feedback state: 24 bytes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpochState {
    /// Current reorder window.
    pub window_ns: u64,
    /// Epoch begin timestamp; 0 iff the epoch is closed.
    pub start_ns: u64,
    /// Linear growth step.
    pub unit_ns: u64,
}

/// Pure window-adaptation step.
///
/// On violation (`latency > slo`) the window halves and the growth unit is
/// recomputed as `(100-pct)%` of the reduced window (clamped up to
/// `min_unit_ns`), so roughly `100/(100-pct)` compliant epochs rebuild the
/// window that barely violated. Otherwise the window grows by `unit`,
/// capped at `max_window_ns`. Returns `(window, unit)`.
///
/// The unit is recomputed only on violation; after many growth steps it
/// drifts below `(100-pct)%` of the current window. That asymmetry is kept
/// as is.
pub fn adjust_window(
    window_ns: u64,
    unit_ns: u64,
    latency_ns: u64,
    slo_ns: u64,
    cfg: &SloConfig,
) -> (u64, u64) {
    if latency_ns > slo_ns {
        let window = window_ns >> 1;
        let grown = (window as u128 * (100 - cfg.pct as u128) / 100) as u64;
        (window, grown.max(cfg.min_unit_ns))
    } else {
        (
            window_ns.saturating_add(unit_ns).min(cfg.max_window_ns),
            unit_ns,
        )
    }
}

fn seed_unit(slo_ns: u64, cfg: &SloConfig) -> u64 {
    let seeded = (slo_ns as u128 * (100 - cfg.pct as u128) / 100) as u64;
    seeded.max(cfg.min_unit_ns)
}

/// Per-thread epoch table. Create one per worker thread via
/// [`EpochRuntime::thread_epochs`]; epochs opened on a thread must be closed
/// on the same thread, and tables are never shared.
#[derive(Debug)]
pub struct ThreadEpochs {
    states: Box<[EpochState]>,
    current: Option<u32>,
}

impl ThreadEpochs {
    fn new(max_epochs: usize) -> Self {
        ThreadEpochs {
            states: vec![EpochState::default(); max_epochs].into_boxed_slice(),
            current: None,
        }
    }

    /// Id of the open epoch, if any.
    pub fn current_epoch(&self) -> Option<u32> {
        self.current
    }

    /// Feedback state of one epoch id (a copy).
    pub fn state(&self, id: u32) -> Option<EpochState> {
        self.states.get(id as usize).copied()
    }

    /// Current reorder window of one epoch id.
    pub fn window_ns(&self, id: u32) -> u64 {
        self.states
            .get(id as usize)
            .map(|s| s.window_ns)
            .unwrap_or(0)
    }
}

/// How threads are mapped to core classes.
#[derive(Debug, Clone)]
pub enum Classifier {
    /// Per-thread declarations only (emulation mode); undeclared threads
    /// count as big.
    Declared,
    /// Core-id lookup; a per-thread declaration still overrides.
    Map(CoreTypeMap),
}

/// Shared handle for the feedback runtime: configuration, core
/// classification and the global epoch-id counter.
#[derive(Debug)]
pub struct EpochRuntime {
    cfg: SloConfig,
    classifier: Classifier,
    next_epoch: AtomicU32,
}

impl EpochRuntime {
    pub fn new(cfg: SloConfig) -> Self {
        EpochRuntime {
            cfg,
            classifier: Classifier::Declared,
            next_epoch: AtomicU32::new(0),
        }
    }

    pub fn with_core_map(cfg: SloConfig, map: CoreTypeMap) -> Self {
        EpochRuntime {
            cfg,
            classifier: Classifier::Map(map),
            next_epoch: AtomicU32::new(0),
        }
    }

    pub fn config(&self) -> &SloConfig {
        &self.cfg
    }

    /// Fresh process-global epoch id, monotonically increasing.
    pub fn next_epoch_id(&self) -> Result<u32, EpochError> {
        let max = self.cfg.max_epochs;
        self.next_epoch
            .fetch_update(Ordering::AcqRel, Ordering::Acquire, |id| {
                ((id as usize) < max).then_some(id + 1)
            })
            .map_err(|_| EpochError::Exhausted { max_epochs: max })
    }

    /// Table for the calling worker thread.
    pub fn thread_epochs(&self) -> ThreadEpochs {
        ThreadEpochs::new(self.cfg.max_epochs)
    }

    /// Core class of the calling thread, read fresh on every call so
    /// migrations are picked up immediately.
    #[inline]
    pub fn classify(&self) -> CoreClass {
        match &self.classifier {
            Classifier::Declared => declared_thread_class().unwrap_or(CoreClass::Big),
            Classifier::Map(map) => classify_current_core(map),
        }
    }

    #[inline]
    pub fn is_big_core(&self) -> bool {
        self.classify().is_big()
    }

    /// Open epoch `id`: records the start timestamp. Nested epochs are
    /// rejected.
    pub fn epoch_start(&self, epochs: &mut ThreadEpochs, id: u32) -> Result<(), EpochError> {
        if id as usize >= epochs.states.len() {
            return Err(EpochError::IdOutOfRange {
                id,
                max_epochs: epochs.states.len(),
            });
        }
        if let Some(open) = epochs.current {
            return Err(EpochError::AlreadyOpen { open });
        }
        epochs.current = Some(id);
        epochs.states[id as usize].start_ns = now_ns();
        Ok(())
    }

    /// Close epoch `id` and, on little cores, adapt its reorder window
    /// against `slo_ns`. Big cores never change the window.
    pub fn epoch_end(
        &self,
        epochs: &mut ThreadEpochs,
        id: u32,
        slo_ns: u64,
    ) -> Result<(), EpochError> {
        if epochs.current != Some(id) {
            return Err(EpochError::NotOpen { id });
        }
        let state = &mut epochs.states[id as usize];
        if !self.is_big_core() {
            let latency = now_ns().saturating_sub(state.start_ns);
            if state.unit_ns == 0 {
                // First close of this epoch: scale the growth step to the
                // SLO so convergence takes about 100/(100-pct) epochs.
                state.unit_ns = seed_unit(slo_ns, &self.cfg);
            }
            let (window, unit) =
                adjust_window(state.window_ns, state.unit_ns, latency, slo_ns, &self.cfg);
            state.window_ns = window;
            state.unit_ns = unit;
        }
        state.start_ns = 0;
        epochs.current = None;
        Ok(())
    }

    /// Class-dispatched acquisition: big cores enqueue immediately, little
    /// cores stand by for the open epoch's window (or the maximum window
    /// outside any epoch). Never mutates epoch state.
    pub fn lock<L: InnerLock>(
        &self,
        mutex: &ReorderableLock<L>,
        record: &WaitingRecord,
        epochs: &ThreadEpochs,
    ) {
        if self.is_big_core() {
            mutex.lock_immediately(record);
            return;
        }
        match epochs.current {
            None => mutex.lock_eventually(record),
            Some(id) => mutex.lock_reorder(record, epochs.states[id as usize].window_ns),
        }
    }

    /// Acquire iff the inner lock is free at the attempt.
    #[inline]
    pub fn try_lock<L: InnerLock>(&self, mutex: &ReorderableLock<L>, record: &WaitingRecord) -> bool {
        mutex.try_lock(record)
    }

    #[inline]
    pub fn unlock<L: InnerLock>(&self, mutex: &ReorderableLock<L>, record: &WaitingRecord) {
        mutex.unlock(record);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::declare_thread_class;

    fn cfg() -> SloConfig {
        SloConfig::new()
    }

    #[test]
    fn epoch_state_is_24_bytes() {
        assert_eq!(std::mem::size_of::<EpochState>(), 24);
    }

    #[test]
    fn adjust_hand_traces() {
        let c = cfg(); // pct 99, min unit 100
        assert_eq!(adjust_window(1000, 500, 2000, 1000, &c), (500, 100));
        assert_eq!(adjust_window(0, 0, 10, 5, &c), (0, 100));
        assert_eq!(adjust_window(500, 100, 900, 1000, &c), (600, 100));
    }

    #[test]
    fn growth_caps_at_max_window() {
        let c = SloConfig::new().max_window_ns(1_000);
        assert_eq!(adjust_window(900, 500, 10, 100, &c).0, 1_000);
    }

    #[test]
    fn violation_unit_clamps_to_min() {
        let c = SloConfig::new().min_unit_ns(50);
        // window 100 -> 50; 1% of 50 = 0 -> clamped to 50.
        assert_eq!(adjust_window(100, 10, 200, 100, &c), (50, 50));
    }

    #[test]
    fn epoch_lifecycle_errors() {
        let rt = EpochRuntime::new(cfg().max_epochs(8));
        let mut th = rt.thread_epochs();
        assert_eq!(
            rt.epoch_start(&mut th, 8),
            Err(EpochError::IdOutOfRange {
                id: 8,
                max_epochs: 8
            })
        );
        rt.epoch_start(&mut th, 3).unwrap();
        assert_eq!(
            rt.epoch_start(&mut th, 3),
            Err(EpochError::AlreadyOpen { open: 3 })
        );
        assert_eq!(rt.epoch_end(&mut th, 4, 1000), Err(EpochError::NotOpen { id: 4 }));
        rt.epoch_end(&mut th, 3, 1000).unwrap();
        assert_eq!(th.current_epoch(), None);
        assert_eq!(rt.epoch_end(&mut th, 3, 1000), Err(EpochError::NotOpen { id: 3 }));
    }

    #[test]
    fn big_core_never_adapts() {
        declare_thread_class(Some(CoreClass::Big));
        let rt = EpochRuntime::new(cfg());
        let mut th = rt.thread_epochs();
        rt.epoch_start(&mut th, 0).unwrap();
        std::thread::sleep(std::time::Duration::from_millis(1));
        rt.epoch_end(&mut th, 0, 1).unwrap(); // latency violates a 1ns SLO
        assert_eq!(th.state(0).unwrap(), EpochState::default());
        declare_thread_class(None);
    }

    #[test]
    fn little_core_grows_and_shrinks() {
        declare_thread_class(Some(CoreClass::Little));
        let rt = EpochRuntime::new(cfg());
        let mut th = rt.thread_epochs();

        // Generous SLO: first close seeds the unit and grows 0 -> unit.
        let slo = 600_000_000; // 600ms, never violated by a closed-back epoch
        rt.epoch_start(&mut th, 2).unwrap();
        rt.epoch_end(&mut th, 2, slo).unwrap();
        let seeded = seed_unit(slo, rt.config());
        assert_eq!(th.window_ns(2), seeded);
        rt.epoch_start(&mut th, 2).unwrap();
        rt.epoch_end(&mut th, 2, slo).unwrap();
        assert_eq!(th.window_ns(2), 2 * seeded);

        // Impossible SLO: window halves.
        rt.epoch_start(&mut th, 2).unwrap();
        rt.epoch_end(&mut th, 2, 0).unwrap();
        assert_eq!(th.window_ns(2), seeded);
        declare_thread_class(None);
    }

    #[test]
    fn epoch_ids_are_unique_and_bounded() {
        let rt = EpochRuntime::new(cfg().max_epochs(4));
        assert_eq!(rt.next_epoch_id().unwrap(), 0);
        assert_eq!(rt.next_epoch_id().unwrap(), 1);
        let rt = std::sync::Arc::new(rt);
        let ids: Vec<u32> = {
            let handles: Vec<_> = (0..2)
                .map(|_| {
                    let rt = rt.clone();
                    std::thread::spawn(move || rt.next_epoch_id().unwrap())
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        };
        assert_ne!(ids[0], ids[1]);
        assert_eq!(
            rt.next_epoch_id(),
            Err(EpochError::Exhausted { max_epochs: 4 })
        );
    }

    #[test]
    fn dispatch_uses_epoch_window() {
        use crate::reorder::ReorderableLock;
        // Little-core thread inside an epoch with a zero window behaves as
        // FIFO: the acquisition must not stand by.
        declare_thread_class(Some(CoreClass::Little));
        let rt = EpochRuntime::new(cfg());
        let mut th = rt.thread_epochs();
        let mutex = ReorderableLock::default();
        let record = WaitingRecord::new();
        rt.epoch_start(&mut th, 0).unwrap();
        assert_eq!(th.window_ns(0), 0);
        let t = std::time::Instant::now();
        rt.lock(&mutex, &record, &th);
        rt.unlock(&mutex, &record);
        assert!(t.elapsed() < std::time::Duration::from_millis(20));
        rt.epoch_end(&mut th, 0, 1_000_000).unwrap();
        declare_thread_class(None);
    }

    #[test]
    fn trylock_is_class_blind_and_state_free() {
        declare_thread_class(Some(CoreClass::Little));
        let rt = EpochRuntime::new(cfg());
        let mutex = ReorderableLock::default();
        let (a, b) = (WaitingRecord::new(), WaitingRecord::new());
        assert!(rt.try_lock(&mutex, &a));
        assert!(!rt.try_lock(&mutex, &b));
        rt.unlock(&mutex, &a);
        // After a failed try, normal locking still works.
        let th = rt.thread_epochs();
        rt.lock(&mutex, &b, &th);
        rt.unlock(&mutex, &b);
        declare_thread_class(None);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn violation_strictly_shrinks_nonzero_windows(
                window in 1u64..=DEFAULT_MAX_WINDOW_NS,
                unit in 1u64..100_000,
                excess in 1u64..1_000_000,
                slo in 0u64..10_000_000,
            ) {
                let c = SloConfig::new();
                let (w, _) = adjust_window(window, unit, slo + excess, slo, &c);
                prop_assert!(w < window);
            }

            #[test]
            fn compliance_never_shrinks(
                window in 0u64..=DEFAULT_MAX_WINDOW_NS,
                unit in 1u64..100_000,
                slo in 1u64..10_000_000,
            ) {
                let c = SloConfig::new();
                let (w, u) = adjust_window(window, unit, slo / 2, slo, &c);
                prop_assert!(w >= window);
                prop_assert_eq!(u, unit);
                prop_assert!(w <= DEFAULT_MAX_WINDOW_NS);
            }

            // Recovery count: after a violation halves W to W/2 (with the
            // unit at its exact (100-pct)% fraction), ceil(100/(100-pct))
            // growth steps rebuild at least W.
            #[test]
            fn recovery_step_count(
                half in 1u64..=1_000_000,
                pct_idx in 0usize..3,
            ) {
                let pct = [50u8, 90, 99][pct_idx];
                let c = SloConfig::new().pct(pct).min_unit_ns(1).max_window_ns(u64::MAX);
                // Choose W/2 divisible by 100 so the unit fraction is exact.
                let half = half * 100;
                let w_before = 2 * half;
                let (mut w, unit) = adjust_window(w_before, 1, 2, 1, &c);
                prop_assert_eq!(w, half);
                prop_assert_eq!(unit, half * (100 - pct as u64) / 100);
                let steps = (100 + (100 - pct as u64) - 1) / (100 - pct as u64);
                for _ in 0..steps {
                    let (nw, nu) = adjust_window(w, unit, 0, 1, &c);
                    w = nw;
                    prop_assert_eq!(nu, unit);
                }
                prop_assert!(w >= w_before);
            }
        }
    }
}
