//! Lock-protected data-structure workloads: threads push or pop one
//! element per epoch, fifty-fifty, on a shared stack or linked list.

use std::cell::UnsafeCell;
use std::collections::LinkedList;
use std::sync::{Arc, Barrier};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::locks::{
    BatchingProportionalLock, FifoQueueLock, TestAndSetLock, TicketLock, WaitingRecord,
};
use crate::metrics::LatencyRecorder;
use crate::platform::{self, now_ns, CoreClass, EmulationProfile};
use crate::reorder::ReorderableLock;
use crate::runtime::EpochRuntime;

use super::config::{BenchConfig, LockKind};
use super::report::{BenchReport, ClassCounts, LatencyStats, LatencySummaries, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsKind {
    Stack,
    List,
}

impl std::str::FromStr for DsKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stack" => Ok(DsKind::Stack),
            "list" => Ok(DsKind::List),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown data structure `{other}` (expected stack|list)"
            ))),
        }
    }
}

enum Store {
    Stack(Vec<u64>),
    List(LinkedList<u64>),
}

impl Store {
    fn push(&mut self, v: u64) {
        match self {
            Store::Stack(s) => s.push(v),
            Store::List(l) => l.push_back(v),
        }
    }

    fn pop(&mut self) -> Option<u64> {
        match self {
            Store::Stack(s) => s.pop(),
            Store::List(l) => l.pop_front(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Store::Stack(s) => s.len(),
            Store::List(l) => l.len(),
        }
    }
}

/// Interior-mutable store: accessed only while holding the scenario lock.
struct SharedStore(UnsafeCell<Store>);
unsafe impl Sync for SharedStore {}

enum DsLock {
    Mcs(FifoQueueLock),
    Tas(TestAndSetLock),
    Ticket(TicketLock),
    Proportional(BatchingProportionalLock),
    Asl {
        lock: ReorderableLock<FifoQueueLock>,
        rt: EpochRuntime,
        epoch: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsReport {
    pub kind: DsKind,
    pub report: BenchReport,
    pub pushes: u64,
    pub pops: u64,
    /// Pops against an empty structure (no element removed).
    pub empty_pops: u64,
    pub final_len: u64,
    /// `pushes - pops == final_len` (element-count conservation).
    pub conserved: bool,
}

struct DsWorkerOut {
    class: CoreClass,
    t0: u64,
    samples: Vec<(u64, u64)>, // (end_ns, latency_ns)
    pushes: u64,
    pops: u64,
    empty_pops: u64,
}

/// Run the stack or linked-list workload under the configured lock.
pub fn scenario_data_structures(
    cfg: &BenchConfig,
    kind: DsKind,
    profile: &EmulationProfile,
) -> Result<DsReport, HarnessError> {
    cfg.validate()?;
    let store = Arc::new(SharedStore(UnsafeCell::new(match kind {
        DsKind::Stack => Store::Stack(Vec::new()),
        DsKind::List => Store::List(LinkedList::new()),
    })));
    let lock = Arc::new(match cfg.lock {
        LockKind::Mcs => DsLock::Mcs(FifoQueueLock::new()),
        LockKind::Tas => DsLock::Tas(TestAndSetLock::new()),
        LockKind::Ticket => DsLock::Ticket(TicketLock::new()),
        LockKind::Proportional => {
            DsLock::Proportional(BatchingProportionalLock::new(cfg.batch_ratio))
        }
        LockKind::Asl => {
            let rt = EpochRuntime::new(cfg.slo_config());
            let epoch = rt.next_epoch_id().expect("fresh runtime has epoch ids");
            DsLock::Asl {
                lock: ReorderableLock::new(FifoQueueLock::new())
                    .with_windows(crate::reorder::DEFAULT_THRESHOLD_NS, cfg.max_window_ns),
                rt,
                epoch,
            }
        }
    });

    let classes: Vec<CoreClass> = (0..cfg.n_big)
        .map(|_| CoreClass::Big)
        .chain((0..cfg.n_little).map(|_| CoreClass::Little))
        .collect();
    let barrier = Arc::new(Barrier::new(classes.len()));
    let duration_ns = cfg.duration.as_nanos() as u64;

    let handles: Vec<_> = classes
        .iter()
        .enumerate()
        .map(|(idx, &class)| {
            let lock = lock.clone();
            let store = store.clone();
            let barrier = barrier.clone();
            let seed = cfg.worker_seed(idx);
            let slo_ns = cfg.slo_ns;
            let cs_ns = cfg.cs_ns;
            let profile = *profile;
            std::thread::spawn(move || {
                platform::declare_thread_class(Some(class));
                platform::set_worker_id(idx as u64);
                let record = WaitingRecord::new();
                let mut table = match &*lock {
                    DsLock::Asl { rt, .. } => Some(rt.thread_epochs()),
                    _ => None,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = DsWorkerOut {
                    class,
                    t0: 0,
                    samples: Vec::new(),
                    pushes: 0,
                    pops: 0,
                    empty_pops: 0,
                };
                let mut next_value = (idx as u64) << 32;
                barrier.wait();
                out.t0 = now_ns();
                let deadline = out.t0 + duration_ns;
                loop {
                    let now = now_ns();
                    if now >= deadline {
                        break;
                    }
                    let push = rng.next_u64() & 1 == 0;
                    let begin = now_ns();
                    // One data-structure operation per epoch, under the lock,
                    // padded with class-scaled work so little-core operations
                    // carry the emulated capacity gap.
                    let op = |out: &mut DsWorkerOut| {
                        // Safety: the scenario lock is held for the whole access.
                        let store = unsafe { &mut *store.0.get() };
                        if push {
                            store.push(next_value);
                            out.pushes += 1;
                        } else if store.pop().is_some() {
                            out.pops += 1;
                        } else {
                            out.empty_pops += 1;
                        }
                        crate::platform::emulated_work(cs_ns, class, &profile);
                    };
                    match &*lock {
                        DsLock::Mcs(l) => {
                            l.acquire(&record);
                            op(&mut out);
                            l.release(&record);
                        }
                        DsLock::Tas(l) => {
                            l.acquire();
                            op(&mut out);
                            l.release();
                        }
                        DsLock::Ticket(l) => {
                            l.acquire();
                            op(&mut out);
                            l.release();
                        }
                        DsLock::Proportional(l) => {
                            l.acquire(class);
                            op(&mut out);
                            l.release(class);
                        }
                        DsLock::Asl { lock, rt, epoch } => {
                            let table = table.as_mut().unwrap();
                            match slo_ns {
                                Some(slo) => {
                                    rt.epoch_start(table, *epoch).expect("epoch opens");
                                    rt.lock(lock, &record, table);
                                    op(&mut out);
                                    rt.unlock(lock, &record);
                                    rt.epoch_end(table, *epoch, slo).expect("epoch closes");
                                }
                                None => {
                                    rt.lock(lock, &record, table);
                                    op(&mut out);
                                    rt.unlock(lock, &record);
                                }
                            }
                        }
                    }
                    let end = now_ns();
                    out.samples.push((end, end - begin));
                    next_value += 1;
                }
                platform::declare_thread_class(None);
                out
            })
        })
        .collect();
    let outs: Vec<DsWorkerOut> = handles
        .into_iter()
        .map(|h| h.join().expect("ds worker panicked"))
        .collect();

    let t0 = outs.iter().map(|o| o.t0).min().unwrap_or(0);
    let warmup_end = t0 + duration_ns / 10;
    let deadline = t0 + duration_ns;
    let span_s = (deadline - warmup_end) as f64 / 1e9;
    let mut overall = LatencyRecorder::new();
    let mut big = LatencyRecorder::new();
    let mut little = LatencyRecorder::new();
    let mut counts = ClassCounts::default();
    let (mut pushes, mut pops, mut empty_pops) = (0u64, 0u64, 0u64);
    for o in &outs {
        pushes += o.pushes;
        pops += o.pops;
        empty_pops += o.empty_pops;
        for &(end, lat) in &o.samples {
            if end < warmup_end || end > deadline {
                continue;
            }
            overall.record(lat);
            match o.class {
                CoreClass::Big => {
                    big.record(lat);
                    counts.big += 1;
                }
                CoreClass::Little => {
                    little.record(lat);
                    counts.little += 1;
                }
            }
        }
    }
    counts.total = counts.big + counts.little;
    let final_len = unsafe { (*store.0.get()).len() } as u64;

    let big_eps = counts.big as f64 / span_s;
    let little_eps = counts.little as f64 / span_s;
    let report = BenchReport {
        lock: cfg.lock.name().to_string(),
        n_big: cfg.n_big,
        n_little: cfg.n_little,
        slo_ns: cfg.slo_ns,
        configured_duration_s: cfg.duration.as_secs_f64(),
        measured_span_s: span_s,
        seed: cfg.seed,
        topology: Topology {
            host_cores: platform::available_cores(),
            pinned: false,
            inflation: cfg.inflation,
            emulated: true,
        },
        throughput: super::report::ThroughputStats {
            total_eps: big_eps + little_eps,
            big_eps,
            little_eps,
        },
        epochs: counts,
        acquisitions: counts,
        latency: LatencySummaries {
            overall: LatencyStats::from_recorder(&mut overall),
            big: LatencyStats::from_recorder(&mut big),
            little: LatencyStats::from_recorder(&mut little),
        },
        violation_fraction: cfg.slo_ns.and_then(|slo| overall.violation_fraction(slo)),
        cdf: overall.cdf(256),
    };
    Ok(DsReport {
        kind,
        report,
        pushes,
        pops,
        empty_pops,
        final_len,
        conserved: pushes - pops == final_len,
    })
}
