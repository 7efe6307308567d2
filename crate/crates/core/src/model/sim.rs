//! Deterministic discrete-event simulation of lock ordering policies.
//!
//! Each simulated thread cycles `wait for the lock -> critical section ->
//! non-critical section`. Big cores execute a CS in `cs_big` time units,
//! little cores in `round(a * cs_big)`. All state transitions happen at
//! integer instants; simultaneous events are processed releases-first, then
//! joiners in thread-id order, so every run is exactly reproducible.
//!
//! Standby semantics mirror the reorderable lock: under a window policy a
//! little thread stays out of the queue until the earliest of a poll
//! observing the lock free (here: the lock staying free across an instant)
//! or its window expiry, then enqueues FIFO.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::metrics::nearest_rank;
use crate::platform::CoreClass;
use crate::runtime::SloConfig;

use super::FeedbackState;

/// Lock ordering policy under simulation. Window policies apply to little
/// threads; big threads always enqueue immediately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// FIFO queue: everyone enqueues on arrival.
    Fifo,
    /// Unfair lock with a hardware-style class affinity: on every grant the
    /// favored class wins with probability `stickiness` when both classes
    /// are waiting (1.0 = deterministic priority).
    TasAffinity { favored: CoreClass, stickiness: f64 },
    /// Two FIFO class queues; at most `batch` consecutive big grants while
    /// littles wait.
    Proportional { batch: u32 },
    /// Fixed reorder window (time units) for little threads; 0 = FIFO.
    Window { window: u64 },
    /// Feedback-adapted window per little thread, driven by epoch latency
    /// against `slo_ns` with the given feedback tuning.
    SloFeedback {
        slo: u64,
        pct: u8,
        min_unit: u64,
        max_window: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_big: usize,
    pub n_little: usize,
    /// Little/big CS cost ratio (>= 1).
    pub a: f64,
    /// Big-core critical-section cost in time units (>= 1).
    pub cs_big: u64,
    /// Non-critical-section cost in time units.
    pub non_cs: u64,
    pub policy: Policy,
    /// Total critical sections to execute before stopping.
    pub horizon_epochs: u64,
    /// Seed for the affinity-mixing generator.
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_big + self.n_little == 0 {
            return Err("need at least one thread".into());
        }
        if self.a < 1.0 {
            return Err("cost ratio a must be >= 1".into());
        }
        if self.cs_big == 0 {
            return Err("cs_big must be >= 1 time unit".into());
        }
        if self.horizon_epochs == 0 {
            return Err("horizon must be >= 1".into());
        }
        if let Policy::TasAffinity { stickiness, .. } = self.policy {
            if !(0.0..=1.0).contains(&stickiness) {
                return Err("stickiness must be in [0, 1]".into());
            }
        }
        Ok(())
    }

    fn cs_for(&self, class: CoreClass) -> u64 {
        match class {
            CoreClass::Big => self.cs_big,
            CoreClass::Little => ((self.a * self.cs_big as f64).round() as u64).max(1),
        }
    }
}

/// A value per core class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassPair<T> {
    pub big: T,
    pub little: T,
}

impl<T> ClassPair<T> {
    pub fn get(&self, class: CoreClass) -> &T {
        match class {
            CoreClass::Big => &self.big,
            CoreClass::Little => &self.little,
        }
    }

    fn get_mut(&mut self, class: CoreClass) -> &mut T {
        match class {
            CoreClass::Big => &mut self.big,
            CoreClass::Little => &mut self.little,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WaitStats {
    pub mean: f64,
    pub p99: u64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub total_cs: u64,
    pub acquisitions: ClassPair<u64>,
    pub makespan: u64,
    /// Critical sections per time unit over the whole horizon.
    pub throughput_cs_per_unit: f64,
    /// Whole-horizon throughput normalized to the big-only rate.
    pub whole_horizon_normalized: f64,
    /// Steady-state normalized throughput, measured between renewal points
    /// (acquisitions of a marker thread) to exclude startup transients.
    pub normalized_throughput: f64,
    /// Fraction of the makespan the lock was held.
    pub lock_utilization: f64,
    /// Waiting time statistics per class (`None`-like zeroes when a class
    /// has no threads).
    pub wait: ClassPair<Option<WaitStats>>,
    /// Window after each completed little epoch, one series per little
    /// thread (feedback policy only).
    pub window_trajectories: Vec<Vec<u64>>,
    /// First instant each thread entered the queue.
    pub first_enqueue: Vec<Option<u64>>,
    pub busy_per_thread: Vec<u64>,
    /// Bounded-reordering violations observed under a window policy
    /// (overtakes beyond window-duration grants plus queue drain).
    pub reorder_bound_violations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Standby { deadline: u64 },
    Queued,
    Holding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Release = 0,
    Join = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    t: u64,
    kind: EventKind,
    tid: usize,
}

struct SimThread {
    class: CoreClass,
    cs: u64,
    phase: Phase,
    want_since: u64,
    completed: u64,
    busy: u64,
    waits: Vec<u64>,
    first_enqueue: Option<u64>,
    // Feedback state (littles under SloFeedback).
    feedback: FeedbackState,
    epoch_open: bool,
    epoch_start: u64,
    window_log: Vec<u64>,
    // Bounded-reordering bookkeeping (littles under a window policy).
    grants_at_want: u64,
    grants_at_enqueue: u64,
    queue_pos_at_enqueue: u64,
}

struct Sim {
    cfg: SimConfig,
    threads: Vec<SimThread>,
    events: BinaryHeap<Reverse<Event>>,
    // Lock state.
    holder: Option<usize>,
    queue: VecDeque<usize>,
    class_queues: ClassPair<VecDeque<usize>>,
    wanting: Vec<usize>,
    standbys: Vec<usize>,
    streak: u64,
    rng: ChaCha8Rng,
    slo_cfg: Option<(SloConfig, u64)>,
    // Counters.
    grants: u64,
    completed_total: u64,
    makespan: u64,
    reorder_violations: u64,
    marker: usize,
    marker_starts: Vec<(u64, u64)>, // (grant instant, grants before it)
    done: bool,
}

/// Run the simulation to its horizon. Panics on an invalid configuration
/// (validate first when the input is untrusted).
pub fn simulate(cfg: &SimConfig) -> SimResult {
    if let Err(e) = cfg.validate() {
        panic!("invalid simulation config: {e}");
    }
    let n = cfg.n_big + cfg.n_little;
    let threads = (0..n)
        .map(|tid| {
            let class = if tid < cfg.n_big {
                CoreClass::Big
            } else {
                CoreClass::Little
            };
            SimThread {
                class,
                cs: cfg.cs_for(class),
                phase: Phase::Idle,
                want_since: 0,
                completed: 0,
                busy: 0,
                waits: Vec::new(),
                first_enqueue: None,
                feedback: FeedbackState::default(),
                epoch_open: false,
                epoch_start: 0,
                window_log: Vec::new(),
                grants_at_want: 0,
                grants_at_enqueue: 0,
                queue_pos_at_enqueue: 0,
            }
        })
        .collect();
    let slo_cfg = match cfg.policy {
        Policy::SloFeedback {
            slo,
            pct,
            min_unit,
            max_window,
        } => Some((
            SloConfig::new()
                .pct(pct)
                .min_unit_ns(min_unit)
                .max_window_ns(max_window),
            slo,
        )),
        _ => None,
    };
    let mut sim = Sim {
        cfg: *cfg,
        threads,
        events: BinaryHeap::new(),
        holder: None,
        queue: VecDeque::new(),
        class_queues: ClassPair::default(),
        wanting: Vec::new(),
        standbys: Vec::new(),
        streak: 0,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        slo_cfg,
        grants: 0,
        completed_total: 0,
        makespan: 0,
        reorder_violations: 0,
        marker: if cfg.n_little > 0 { cfg.n_big } else { 0 },
        marker_starts: Vec::new(),
        done: false,
    };
    for tid in 0..n {
        sim.push(Event {
            t: 0,
            kind: EventKind::Join,
            tid,
        });
    }
    sim.run();
    sim.into_result()
}

impl Sim {
    fn push(&mut self, ev: Event) {
        self.events.push(Reverse(ev));
    }

    fn run(&mut self) {
        while !self.done {
            let Some(Reverse(first)) = self.events.pop() else {
                break;
            };
            let t = first.t;
            self.process(first);
            while !self.done {
                match self.events.peek() {
                    Some(&Reverse(ev)) if ev.t == t => {
                        self.events.pop();
                        self.process(ev);
                    }
                    _ => break,
                }
            }
            if !self.done {
                self.resolve(t);
            }
        }
    }

    fn process(&mut self, ev: Event) {
        match ev.kind {
            EventKind::Release => self.on_release(ev.t, ev.tid),
            EventKind::Join => self.on_join(ev.t, ev.tid),
        }
    }

    fn on_release(&mut self, t: u64, tid: usize) {
        debug_assert_eq!(self.holder, Some(tid));
        self.holder = None;
        let th = &mut self.threads[tid];
        th.phase = Phase::Idle;
        th.busy += th.cs;
        th.completed += 1;
        self.completed_total += 1;
        if self.completed_total >= self.cfg.horizon_epochs {
            self.makespan = t;
            self.done = true;
            return;
        }
        self.push(Event {
            t: t + self.cfg.non_cs,
            kind: EventKind::Join,
            tid,
        });
    }

    fn on_join(&mut self, t: u64, tid: usize) {
        match self.threads[tid].phase {
            Phase::Standby { deadline } if deadline == t => self.enqueue(tid, t),
            Phase::Standby { .. } | Phase::Queued | Phase::Holding => {
                // Stale expiry: the thread enqueued on a free observation
                // (or is from a previous cycle). Ignore.
            }
            Phase::Idle => self.start_cycle(t, tid),
        }
    }

    fn start_cycle(&mut self, t: u64, tid: usize) {
        // Close the previous epoch first: the adapted window takes effect
        // for the acquisition below, exactly like the lock runtime.
        if let Some((slo_cfg, slo)) = self.slo_cfg {
            let th = &mut self.threads[tid];
            if th.class == CoreClass::Little && th.epoch_open {
                let latency = t - th.epoch_start;
                th.feedback.observe(latency, slo, &slo_cfg);
                let w = th.feedback.window_ns;
                th.window_log.push(w);
            }
            th.epoch_open = true;
            th.epoch_start = t;
        }
        let th = &mut self.threads[tid];
        th.want_since = t;
        th.grants_at_want = self.grants;

        let window = match (self.cfg.policy, th.class) {
            (Policy::Window { window }, CoreClass::Little) => Some(window),
            (Policy::SloFeedback { .. }, CoreClass::Little) => Some(th.feedback.window_ns),
            _ => None,
        };
        match self.cfg.policy {
            Policy::TasAffinity { .. } => {
                self.threads[tid].phase = Phase::Queued;
                self.wanting.push(tid);
            }
            _ => match window {
                Some(w) if w > 0 && !self.lock_free() => {
                    let deadline = t + w;
                    self.threads[tid].phase = Phase::Standby { deadline };
                    self.standbys.push(tid);
                    self.push(Event {
                        t: deadline,
                        kind: EventKind::Join,
                        tid,
                    });
                }
                _ => self.enqueue(tid, t),
            },
        }
    }

    fn lock_free(&self) -> bool {
        self.holder.is_none()
            && self.queue.is_empty()
            && self.class_queues.big.is_empty()
            && self.class_queues.little.is_empty()
            && self.wanting.is_empty()
    }

    fn enqueue(&mut self, tid: usize, t: u64) {
        self.standbys.retain(|&s| s != tid);
        let th = &mut self.threads[tid];
        th.phase = Phase::Queued;
        if th.first_enqueue.is_none() {
            th.first_enqueue = Some(t);
        }
        th.grants_at_enqueue = self.grants;
        let class = th.class;
        match self.cfg.policy {
            Policy::Proportional { .. } => {
                let q = self.class_queues.get_mut(class);
                q.push_back(tid);
                self.threads[tid].queue_pos_at_enqueue = q.len() as u64;
            }
            Policy::TasAffinity { .. } => unreachable!("tas threads join the wanting set"),
            _ => {
                self.queue.push_back(tid);
                self.threads[tid].queue_pos_at_enqueue = self.queue.len() as u64;
            }
        }
    }

    fn resolve(&mut self, t: u64) {
        if self.holder.is_some() {
            return;
        }
        if let Some(tid) = self.select_next() {
            self.grant(tid, t);
            return;
        }
        // The lock stayed free across this instant: every standby
        // competitor observes it and enqueues, in thread-id order.
        if !self.standbys.is_empty() {
            let mut observers = std::mem::take(&mut self.standbys);
            observers.sort_unstable();
            for tid in observers {
                self.enqueue(tid, t);
            }
            if let Some(tid) = self.select_next() {
                self.grant(tid, t);
            }
        }
    }

    fn select_next(&mut self) -> Option<usize> {
        match self.cfg.policy {
            Policy::Fifo | Policy::Window { .. } | Policy::SloFeedback { .. } => {
                self.queue.pop_front()
            }
            Policy::Proportional { batch } => {
                let has_big = !self.class_queues.big.is_empty();
                let has_little = !self.class_queues.little.is_empty();
                let pick_little = match (has_big, has_little) {
                    (_, false) => false,
                    (false, true) => true,
                    (true, true) => self.streak >= batch as u64,
                };
                if pick_little {
                    self.class_queues.little.pop_front()
                } else {
                    self.class_queues.big.pop_front()
                }
            }
            Policy::TasAffinity {
                favored,
                stickiness,
            } => {
                if self.wanting.is_empty() {
                    return None;
                }
                let classes: Vec<CoreClass> =
                    self.wanting.iter().map(|&w| self.threads[w].class).collect();
                let has = |c: CoreClass| classes.iter().any(|&x| x == c);
                let other = match favored {
                    CoreClass::Big => CoreClass::Little,
                    CoreClass::Little => CoreClass::Big,
                };
                let class = if has(favored) && has(other) {
                    if self.rng_unit() < stickiness {
                        favored
                    } else {
                        other
                    }
                } else if has(favored) {
                    favored
                } else {
                    other
                };
                // FIFO within the class, earliest want first.
                let (idx, _) = self
                    .wanting
                    .iter()
                    .enumerate()
                    .filter(|&(_, &w)| self.threads[w].class == class)
                    .min_by_key(|&(_, &w)| (self.threads[w].want_since, w))?;
                Some(self.wanting.swap_remove(idx))
            }
        }
    }

    fn rng_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn grant(&mut self, tid: usize, t: u64) {
        if let Policy::Proportional { batch } = self.cfg.policy {
            self.streak = match self.threads[tid].class {
                CoreClass::Big => (self.streak + 1).min(batch as u64 + 1),
                CoreClass::Little => 0,
            };
        }
        let grants_before = self.grants;
        self.grants += 1;
        if tid == self.marker {
            self.marker_starts.push((t, grants_before));
        }
        let th = &mut self.threads[tid];
        th.phase = Phase::Holding;
        th.waits.push(t - th.want_since);
        let cs = th.cs;
        // Bounded reordering: grants between want and own grant may not
        // exceed grants during the standby window plus the queue ahead.
        if matches!(self.cfg.policy, Policy::Window { .. }) && th.class == CoreClass::Little {
            let between = grants_before - th.grants_at_want;
            let during_window = th.grants_at_enqueue - th.grants_at_want;
            let bound = during_window + th.queue_pos_at_enqueue.saturating_sub(1);
            if between > bound {
                self.reorder_violations += 1;
            }
        }
        self.holder = Some(tid);
        self.push(Event {
            t: t + cs,
            kind: EventKind::Release,
            tid,
        });
    }

    fn into_result(self) -> SimResult {
        let makespan = self.makespan.max(1);
        let mut acquisitions = ClassPair::<u64>::default();
        let mut busy_total = 0u64;
        for th in &self.threads {
            *acquisitions.get_mut(th.class) += th.completed;
            busy_total += th.busy;
        }
        let total_cs = self.completed_total;
        let throughput = total_cs as f64 / makespan as f64;
        let whole_normalized = throughput * self.cfg.cs_big as f64;

        // Renewal measurement: count CS starts between two acquisitions of
        // the marker thread, skipping the first quarter as warmup.
        let normalized = if self.marker_starts.len() >= 2 {
            let len = self.marker_starts.len();
            let i0 = (len / 4).min(len - 2);
            let (t0, g0) = self.marker_starts[i0];
            let (t1, g1) = self.marker_starts[len - 1];
            if t1 > t0 {
                (g1 - g0) as f64 / (t1 - t0) as f64 * self.cfg.cs_big as f64
            } else {
                whole_normalized
            }
        } else {
            whole_normalized
        };

        let wait_stats = |class: CoreClass| {
            let mut waits: Vec<u64> = self
                .threads
                .iter()
                .filter(|th| th.class == class)
                .flat_map(|th| th.waits.iter().copied())
                .collect();
            if waits.is_empty() {
                return None;
            }
            waits.sort_unstable();
            let mean = waits.iter().map(|&w| w as f64).sum::<f64>() / waits.len() as f64;
            Some(WaitStats {
                mean,
                p99: nearest_rank(&waits, 99.0),
                max: *waits.last().unwrap(),
            })
        };

        SimResult {
            total_cs,
            acquisitions,
            makespan: self.makespan,
            throughput_cs_per_unit: throughput,
            whole_horizon_normalized: whole_normalized,
            normalized_throughput: normalized,
            lock_utilization: busy_total as f64 / makespan as f64,
            wait: ClassPair {
                big: wait_stats(CoreClass::Big),
                little: wait_stats(CoreClass::Little),
            },
            window_trajectories: self
                .threads
                .iter()
                .filter(|th| th.class == CoreClass::Little)
                .map(|th| th.window_log.clone())
                .collect(),
            first_enqueue: self.threads.iter().map(|th| th.first_enqueue).collect(),
            busy_per_thread: self.threads.iter().map(|th| th.busy).collect(),
            reorder_bound_violations: self.reorder_violations,
        }
    }
}
