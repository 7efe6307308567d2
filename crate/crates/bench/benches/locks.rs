//! Uncontended fast-path costs of the lock primitives and the feedback
//! machinery. Contended behavior is covered by the harness scenarios;
//! these numbers track per-acquisition overhead regressions.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use asl_core::locks::{
    BatchingProportionalLock, FifoQueueLock, TestAndSetLock, TicketLock, WaitingRecord,
};
use asl_core::platform::{self, CoreClass};
use asl_core::reorder::ReorderableLock;
use asl_core::runtime::{adjust_window, EpochRuntime, SloConfig};

fn uncontended(c: &mut Criterion) {
    let mut group = c.benchmark_group("uncontended");

    let mcs = FifoQueueLock::new();
    let record = WaitingRecord::new();
    group.bench_function("mcs", |b| {
        b.iter(|| {
            mcs.acquire(&record);
            mcs.release(&record);
        })
    });

    let tas = TestAndSetLock::new();
    group.bench_function("tas", |b| {
        b.iter(|| {
            tas.acquire();
            tas.release();
        })
    });

    let ticket = TicketLock::new();
    group.bench_function("ticket", |b| {
        b.iter(|| {
            black_box(ticket.acquire());
            ticket.release();
        })
    });

    let prop = BatchingProportionalLock::new(10);
    group.bench_function("proportional", |b| {
        b.iter(|| {
            prop.acquire(CoreClass::Big);
            prop.release(CoreClass::Big);
        })
    });

    let reorder = ReorderableLock::default();
    group.bench_function("reorderable_immediate", |b| {
        b.iter(|| {
            reorder.lock_immediately(&record);
            reorder.unlock(&record);
        })
    });

    // Full feedback dispatch on a big-class thread (the common fast path).
    let rt = EpochRuntime::new(SloConfig::new());
    let epochs = rt.thread_epochs();
    platform::declare_thread_class(Some(CoreClass::Big));
    group.bench_function("asl_dispatch_big", |b| {
        b.iter(|| {
            rt.lock(&reorder, &record, &epochs);
            rt.unlock(&reorder, &record);
        })
    });
    platform::declare_thread_class(None);

    group.finish();
}

fn feedback(c: &mut Criterion) {
    let cfg = SloConfig::new();
    c.bench_function("adjust_window", |b| {
        let mut w = 1_000u64;
        let mut u = 100u64;
        let mut lat = 0u64;
        b.iter(|| {
            lat = (lat + 997) % 2_000;
            let (nw, nu) = adjust_window(black_box(w), u, lat, 1_000, &cfg);
            w = nw.max(1);
            u = nu;
        })
    });

    c.bench_function("now_ns", |b| b.iter(|| black_box(platform::now_ns())));
}

criterion_group!(benches, uncontended, feedback);
criterion_main!(benches);
