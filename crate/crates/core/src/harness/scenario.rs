//! Scenario execution: worker threads, report assembly, sweeps.

use std::sync::{Arc, Barrier};

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::locks::{
    BatchingProportionalLock, FifoQueueLock, TestAndSetLock, TicketLock, WaitingRecord,
};
use crate::metrics::LatencyRecorder;
use crate::platform::{self, emulated_work, now_ns, CoreClass, EmulationProfile};
use crate::reorder::{BlockingMutex, ReorderableLock, StandbyMode, DEFAULT_SLEEP_GRANULARITY};
use crate::runtime::EpochRuntime;

use super::config::{BenchConfig, LockKind, Phase, PhaseKind, Workload};
use super::report::{BenchReport, ClassCounts, LatencyStats, LatencySummaries, Topology};

/// Shared lock instance driven by the workers.
enum BenchLock {
    Mcs(FifoQueueLock),
    Tas(TestAndSetLock),
    Ticket(TicketLock),
    Proportional(BatchingProportionalLock),
    Asl {
        lock: ReorderableLock<FifoQueueLock>,
        rt: EpochRuntime,
        epoch: u32,
    },
    AslBlocking {
        lock: ReorderableLock<BlockingMutex>,
        rt: EpochRuntime,
        epoch: u32,
    },
    Blocking(BlockingMutex),
}

impl BenchLock {
    fn label(&self) -> &'static str {
        match self {
            BenchLock::Mcs(_) => "mcs",
            BenchLock::Tas(_) => "tas",
            BenchLock::Ticket(_) => "ticket",
            BenchLock::Proportional(_) => "proportional",
            BenchLock::Asl { .. } => "asl",
            BenchLock::AslBlocking { .. } => "asl+blocking+sleep",
            BenchLock::Blocking(_) => "blocking",
        }
    }
}

fn build_lock(cfg: &BenchConfig) -> BenchLock {
    match cfg.lock {
        LockKind::Mcs => BenchLock::Mcs(FifoQueueLock::new()),
        LockKind::Tas => BenchLock::Tas(TestAndSetLock::new()),
        LockKind::Ticket => BenchLock::Ticket(TicketLock::new()),
        LockKind::Proportional => {
            BenchLock::Proportional(BatchingProportionalLock::new(cfg.batch_ratio))
        }
        LockKind::Asl => {
            let rt = EpochRuntime::new(cfg.slo_config());
            let epoch = rt.next_epoch_id().expect("fresh runtime has epoch ids");
            BenchLock::Asl {
                lock: ReorderableLock::new(FifoQueueLock::new())
                    .with_windows(crate::reorder::DEFAULT_THRESHOLD_NS, cfg.max_window_ns),
                rt,
                epoch,
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    end_ns: u64,
    latency_ns: u64,
}

struct WorkerOutput {
    class: CoreClass,
    t0: u64,
    samples: Vec<Sample>,
    /// (timestamp, window) after each epoch end; ASL littles only.
    windows: Vec<(u64, u64)>,
}

struct WorkerCtx {
    idx: usize,
    class: CoreClass,
    lock: Arc<BenchLock>,
    workload: Workload,
    duration_ns: u64,
    cs_ns: u64,
    non_cs_ns: u64,
    slo_ns: Option<u64>,
    pin_core: Option<usize>,
    seed: u64,
    profile: EmulationProfile,
    barrier: Arc<Barrier>,
}

fn worker(ctx: WorkerCtx) -> WorkerOutput {
    platform::declare_thread_class(Some(ctx.class));
    platform::set_worker_id(ctx.idx as u64);
    if let Some(core) = ctx.pin_core {
        // Best effort; the run continues unpinned on refusal.
        let _ = platform::pin_thread(core);
    }
    let record = WaitingRecord::new();
    let mut table = match &*ctx.lock {
        BenchLock::Asl { rt, .. } | BenchLock::AslBlocking { rt, .. } => Some(rt.thread_epochs()),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut samples = Vec::new();
    let mut windows = Vec::new();
    let track_windows = ctx.class == CoreClass::Little && ctx.slo_ns.is_some();

    ctx.barrier.wait();
    let t0 = now_ns();
    let deadline = t0 + ctx.duration_ns;
    loop {
        let now = now_ns();
        if now >= deadline {
            break;
        }
        let mult = ctx.workload.multiplier_at(now - t0, ctx.duration_ns, &mut rng);
        let cs = ctx.cs_ns.saturating_mul(mult);
        let begin = now_ns();
        match &*ctx.lock {
            BenchLock::Mcs(lock) => {
                lock.acquire(&record);
                emulated_work(cs, ctx.class, &ctx.profile);
                lock.release(&record);
            }
            BenchLock::Tas(lock) => {
                lock.acquire();
                emulated_work(cs, ctx.class, &ctx.profile);
                lock.release();
            }
            BenchLock::Ticket(lock) => {
                lock.acquire();
                emulated_work(cs, ctx.class, &ctx.profile);
                lock.release();
            }
            BenchLock::Proportional(lock) => {
                lock.acquire(ctx.class);
                emulated_work(cs, ctx.class, &ctx.profile);
                lock.release(ctx.class);
            }
            BenchLock::Asl { lock, rt, epoch } => {
                run_asl_epoch(lock, rt, *epoch, table.as_mut().unwrap(), &record, cs, &ctx)
            }
            BenchLock::AslBlocking { lock, rt, epoch } => {
                run_asl_epoch(lock, rt, *epoch, table.as_mut().unwrap(), &record, cs, &ctx)
            }
            BenchLock::Blocking(lock) => {
                use crate::reorder::InnerLock;
                lock.lock(&record);
                emulated_work(cs, ctx.class, &ctx.profile);
                lock.unlock(&record);
            }
        }
        let end = now_ns();
        samples.push(Sample {
            end_ns: end,
            latency_ns: end - begin,
        });
        if track_windows {
            if let (Some(table), BenchLock::Asl { epoch, .. } | BenchLock::AslBlocking { epoch, .. }) =
                (&table, &*ctx.lock)
            {
                windows.push((end, table.window_ns(*epoch)));
            }
        }
        if ctx.non_cs_ns > 0 {
            emulated_work(ctx.non_cs_ns, ctx.class, &ctx.profile);
        }
    }
    platform::declare_thread_class(None);
    WorkerOutput {
        class: ctx.class,
        t0,
        samples,
        windows,
    }
}

fn run_asl_epoch<L: crate::reorder::InnerLock>(
    lock: &ReorderableLock<L>,
    rt: &EpochRuntime,
    epoch: u32,
    table: &mut crate::runtime::ThreadEpochs,
    record: &WaitingRecord,
    cs: u64,
    ctx: &WorkerCtx,
) {
    match ctx.slo_ns {
        Some(slo) => {
            rt.epoch_start(table, epoch).expect("epoch opens");
            rt.lock(lock, record, table);
            emulated_work(cs, ctx.class, &ctx.profile);
            rt.unlock(lock, record);
            rt.epoch_end(table, epoch, slo).expect("epoch closes");
        }
        None => {
            // No SLO annotation: acquisitions run outside any epoch and
            // little threads use the maximum reorder window.
            rt.lock(lock, record, table);
            emulated_work(cs, ctx.class, &ctx.profile);
            rt.unlock(lock, record);
        }
    }
}

struct RunOutcome {
    label: &'static str,
    outputs: Vec<WorkerOutput>,
    pinned: bool,
}

fn run_workers(
    cfg: &BenchConfig,
    lock: BenchLock,
    classes: Vec<CoreClass>,
    workload: Workload,
    profile: &EmulationProfile,
) -> RunOutcome {
    let label = lock.label();
    let lock = Arc::new(lock);
    let barrier = Arc::new(Barrier::new(classes.len()));
    let host_cores = platform::available_cores();
    let mut pinned = cfg.pin;
    let handles: Vec<_> = classes
        .iter()
        .enumerate()
        .map(|(idx, &class)| {
            let ctx = WorkerCtx {
                idx,
                class,
                lock: lock.clone(),
                workload: workload.clone(),
                duration_ns: cfg.duration.as_nanos() as u64,
                cs_ns: cfg.cs_ns,
                non_cs_ns: cfg.non_cs_ns,
                slo_ns: cfg.slo_ns,
                pin_core: cfg.pin.then_some(idx % host_cores),
                seed: cfg.worker_seed(idx),
                profile: *profile,
                barrier: barrier.clone(),
            };
            std::thread::spawn(move || worker(ctx))
        })
        .collect();
    let outputs: Vec<WorkerOutput> = handles
        .into_iter()
        .map(|h| h.join().expect("worker panicked"))
        .collect();
    if cfg.pin && host_cores < classes.len() {
        pinned = false;
    }
    RunOutcome {
        label,
        outputs,
        pinned,
    }
}

fn class_split(n_big: usize, n_little: usize) -> Vec<CoreClass> {
    let mut classes = vec![CoreClass::Big; n_big];
    classes.extend(std::iter::repeat(CoreClass::Little).take(n_little));
    classes
}

fn build_report(cfg: &BenchConfig, outcome: &RunOutcome) -> BenchReport {
    let duration_ns = cfg.duration.as_nanos() as u64;
    let t0 = outcome.outputs.iter().map(|o| o.t0).min().unwrap_or(0);
    let warmup_end = t0 + duration_ns / 10;
    let deadline = t0 + duration_ns;
    let span_s = (deadline - warmup_end) as f64 / 1e9;

    let mut overall = LatencyRecorder::new();
    let mut big = LatencyRecorder::new();
    let mut little = LatencyRecorder::new();
    let mut counts = ClassCounts::default();
    for out in &outcome.outputs {
        let rec = match out.class {
            CoreClass::Big => &mut big,
            CoreClass::Little => &mut little,
        };
        for s in &out.samples {
            if s.end_ns < warmup_end || s.end_ns > deadline {
                continue;
            }
            rec.record(s.latency_ns);
            overall.record(s.latency_ns);
            match out.class {
                CoreClass::Big => counts.big += 1,
                CoreClass::Little => counts.little += 1,
            }
        }
    }
    counts.total = counts.big + counts.little;

    let big_eps = counts.big as f64 / span_s;
    let little_eps = counts.little as f64 / span_s;
    let violation = cfg
        .slo_ns
        .and_then(|slo| overall.violation_fraction(slo));
    BenchReport {
        lock: outcome.label.to_string(),
        n_big: cfg.n_big,
        n_little: cfg.n_little,
        slo_ns: cfg.slo_ns,
        configured_duration_s: cfg.duration.as_secs_f64(),
        measured_span_s: span_s,
        seed: cfg.seed,
        topology: Topology {
            host_cores: platform::available_cores(),
            pinned: outcome.pinned,
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
        violation_fraction: violation,
        cdf: overall.cdf(256),
    }
}

/// Run one scenario to completion and aggregate a report.
pub fn run_scenario(
    cfg: &BenchConfig,
    profile: &EmulationProfile,
) -> Result<BenchReport, HarnessError> {
    cfg.validate()?;
    let lock = build_lock(cfg);
    let classes = class_split(cfg.n_big, cfg.n_little);
    let workload = Workload::SteadyMix(cfg.mix.clone());
    let outcome = run_workers(cfg, lock, classes, workload, profile);
    Ok(build_report(cfg, &outcome))
}

/// One point of an SLO sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SloPoint {
    pub slo_ns: u64,
    pub report: BenchReport,
}

/// Increasing-SLO sweep on the feedback lock.
pub fn scenario_slo_sweep(
    base: &BenchConfig,
    slos: &[u64],
    profile: &EmulationProfile,
) -> Result<Vec<SloPoint>, HarnessError> {
    let mut out = Vec::with_capacity(slos.len());
    for &slo_ns in slos {
        let mut cfg = base.clone();
        cfg.lock = LockKind::Asl;
        cfg.slo_ns = Some(slo_ns);
        let report = run_scenario(&cfg, profile)?;
        out.push(SloPoint { slo_ns, report });
    }
    Ok(out)
}

/// One contention level: the feedback lock (no SLO, maximum reordering)
/// against FIFO, test-and-set and big-only FIFO baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentionPoint {
    pub non_cs_ns: u64,
    pub asl: BenchReport,
    pub mcs: BenchReport,
    pub tas: BenchReport,
    pub mcs_big_only: BenchReport,
    pub speedup_vs_mcs: f64,
    pub speedup_vs_tas: f64,
    pub speedup_vs_big_only: f64,
}

/// Sweep the work between acquisitions (contention knob).
pub fn scenario_contention_sweep(
    base: &BenchConfig,
    non_cs_points: &[u64],
    profile: &EmulationProfile,
) -> Result<Vec<ContentionPoint>, HarnessError> {
    let mut out = Vec::with_capacity(non_cs_points.len());
    for &non_cs_ns in non_cs_points {
        let run = |lock: LockKind, slo: Option<u64>, little: usize| {
            let mut cfg = base.clone();
            cfg.lock = lock;
            cfg.slo_ns = slo;
            cfg.n_little = little;
            cfg.non_cs_ns = non_cs_ns;
            run_scenario(&cfg, profile)
        };
        let asl = run(LockKind::Asl, None, base.n_little)?;
        let mcs = run(LockKind::Mcs, None, base.n_little)?;
        let tas = run(LockKind::Tas, None, base.n_little)?;
        let mcs_big_only = run(LockKind::Mcs, None, 0)?;
        let s = |b: &BenchReport| asl.throughput.total_eps / b.throughput.total_eps.max(1e-9);
        out.push(ContentionPoint {
            non_cs_ns,
            speedup_vs_mcs: s(&mcs),
            speedup_vs_tas: s(&tas),
            speedup_vs_big_only: s(&mcs_big_only),
            asl,
            mcs,
            tas,
            mcs_big_only,
        });
    }
    Ok(out)
}

/// Per-epoch observation emitted by the variable-load scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Nanoseconds since run start.
    pub t_ns: u64,
    pub latency_ns: u64,
    pub class: CoreClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
    pub epochs: u64,
    /// Overall / little P99 over the last third of the phase, once the
    /// feedback has had time to adapt to the new epoch length.
    pub p99_last_third_ns: Option<u64>,
    pub little_p99_last_third_ns: Option<u64>,
    pub violation_fraction_last_third: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableLoadReport {
    pub report: BenchReport,
    pub phases: Vec<PhaseSummary>,
    pub latency_series: Vec<SeriesPoint>,
    /// (t_ns since start, window_ns) across all little workers.
    pub window_series: Vec<(u64, u64)>,
}

/// Phased epoch-length schedule: steady, 128x longer, back, rapidly
/// random, then 1024x (an unachievable SLO on purpose).
pub fn scenario_variable_load(
    cfg: &BenchConfig,
    profile: &EmulationProfile,
) -> Result<VariableLoadReport, HarnessError> {
    cfg.validate()?;
    let phases = vec![
        Phase {
            label: "x1".into(),
            kind: PhaseKind::Fixed(1),
        },
        Phase {
            label: "x128".into(),
            kind: PhaseKind::Fixed(128),
        },
        Phase {
            label: "x1-return".into(),
            kind: PhaseKind::Fixed(1),
        },
        Phase {
            label: "random".into(),
            kind: PhaseKind::Random(vec![1, 2, 4, 8, 16, 32, 64, 128]),
        },
        Phase {
            label: "x1024".into(),
            kind: PhaseKind::Fixed(1024),
        },
    ];
    let lock = build_lock(cfg);
    let classes = class_split(cfg.n_big, cfg.n_little);
    let outcome = run_workers(
        cfg,
        lock,
        classes,
        Workload::Phased(phases.clone()),
        profile,
    );
    let report = build_report(cfg, &outcome);

    let t0 = outcome.outputs.iter().map(|o| o.t0).min().unwrap_or(0);
    let mut latency_series: Vec<SeriesPoint> = outcome
        .outputs
        .iter()
        .flat_map(|o| {
            o.samples.iter().map(move |s| SeriesPoint {
                t_ns: s.end_ns.saturating_sub(t0),
                latency_ns: s.latency_ns,
                class: o.class,
            })
        })
        .collect();
    latency_series.sort_by_key(|p| p.t_ns);
    let mut window_series: Vec<(u64, u64)> = outcome
        .outputs
        .iter()
        .flat_map(|o| {
            o.windows
                .iter()
                .map(move |&(ts, w)| (ts.saturating_sub(t0), w))
        })
        .collect();
    window_series.sort_unstable();

    let duration_ns = cfg.duration.as_nanos() as u64;
    let share = duration_ns / phases.len() as u64;
    let summaries = phases
        .iter()
        .enumerate()
        .map(|(i, phase)| {
            let start = i as u64 * share;
            let end = if i == phases.len() - 1 {
                duration_ns
            } else {
                (i as u64 + 1) * share
            };
            let tail_start = start + 2 * (end - start) / 3;
            let mut overall = LatencyRecorder::new();
            let mut little = LatencyRecorder::new();
            let mut epochs = 0u64;
            for p in &latency_series {
                if p.t_ns < start || p.t_ns >= end {
                    continue;
                }
                epochs += 1;
                if p.t_ns >= tail_start {
                    overall.record(p.latency_ns);
                    if p.class == CoreClass::Little {
                        little.record(p.latency_ns);
                    }
                }
            }
            PhaseSummary {
                label: phase.label.clone(),
                start_s: start as f64 / 1e9,
                end_s: end as f64 / 1e9,
                epochs,
                p99_last_third_ns: overall.percentile(99.0),
                little_p99_last_third_ns: little.percentile(99.0),
                violation_fraction_last_third: cfg
                    .slo_ns
                    .and_then(|slo| overall.violation_fraction(slo)),
            }
        })
        .collect();

    Ok(VariableLoadReport {
        report,
        phases: summaries,
        latency_series,
        window_series,
    })
}

/// Oversubscription scenario: more runnable threads than cores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversubReport {
    pub factor: usize,
    pub threads: usize,
    /// Plain OS-blocking mutex, the baseline every result is judged by.
    pub blocking_baseline: BenchReport,
    /// Feedback lock over the blocking mutex with sleeping standby.
    pub asl_sleep_blocking: BenchReport,
    /// Feedback lock over the spinning queue lock, reported to document
    /// how badly FIFO spin handoff degrades when cores are oversubscribed.
    pub asl_spin_queue: BenchReport,
}

pub fn scenario_oversubscription(
    base: &BenchConfig,
    factor: usize,
    profile: &EmulationProfile,
) -> Result<OversubReport, HarnessError> {
    if factor == 0 {
        return Err(HarnessError::InvalidConfig("factor must be >= 1".into()));
    }
    let mut cfg = base.clone();
    cfg.n_big = base.n_big * factor;
    cfg.n_little = base.n_little * factor;
    cfg.validate()?;
    let classes = class_split(cfg.n_big, cfg.n_little);

    let baseline = {
        let outcome = run_workers(
            &cfg,
            BenchLock::Blocking(BlockingMutex::new()),
            classes.clone(),
            Workload::SteadyMix(cfg.mix.clone()),
            profile,
        );
        build_report(&cfg, &outcome)
    };

    let asl_sleep = {
        let rt = EpochRuntime::new(cfg.slo_config());
        let epoch = rt.next_epoch_id().expect("fresh runtime has epoch ids");
        let lock = ReorderableLock::new(BlockingMutex::new())
            .with_windows(crate::reorder::DEFAULT_THRESHOLD_NS, cfg.max_window_ns)
            .with_standby(StandbyMode::Sleep {
                granularity: DEFAULT_SLEEP_GRANULARITY,
            });
        let outcome = run_workers(
            &cfg,
            BenchLock::AslBlocking { lock, rt, epoch },
            classes.clone(),
            Workload::SteadyMix(cfg.mix.clone()),
            profile,
        );
        build_report(&cfg, &outcome)
    };

    let asl_spin = {
        let mut spin_cfg = cfg.clone();
        spin_cfg.lock = LockKind::Asl;
        let outcome = run_workers(
            &spin_cfg,
            build_lock(&spin_cfg),
            classes,
            Workload::SteadyMix(cfg.mix.clone()),
            profile,
        );
        build_report(&spin_cfg, &outcome)
    };

    Ok(OversubReport {
        factor,
        threads: cfg.n_big + cfg.n_little,
        blocking_baseline: baseline,
        asl_sleep_blocking: asl_sleep,
        asl_spin_queue: asl_spin,
    })
}
