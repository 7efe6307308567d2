//! Benchmark harness: micro-benchmark scenarios with per-class latency
//! percentiles, CDFs and throughput reports across all lock kinds.
//!
//! Workers declare a core class and run emulated work, so the scenarios are
//! meaningful on symmetric hosts. Runs are fixed-duration with the first
//! 10% of each run discarded as warmup. Reports always carry the actual
//! host topology so results are self-describing.

mod config;
mod ds;
mod report;
mod scenario;

pub use config::{BenchConfig, EpochMix, LockKind, Workload};
pub use ds::{scenario_data_structures, DsKind, DsReport};
pub use report::{
    export_csv, export_json, export_report, export_slo_sweep_csv, BenchReport, ClassCounts,
    ExportFormat, LatencyStats, LatencySummaries, ThroughputStats, Topology,
};
pub use scenario::{
    run_scenario, scenario_contention_sweep, scenario_oversubscription, scenario_slo_sweep,
    scenario_variable_load, ContentionPoint, OversubReport, PhaseSummary, SeriesPoint, SloPoint,
    VariableLoadReport,
};
