//! `asl` — benchmark and simulation driver for the asymmetric-core SLO
//! lock library.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use asl_core::harness::{
    self, BenchConfig, DsKind, EpochMix, ExportFormat, LockKind, SloPoint,
};
use asl_core::model::{self, Policy, SimConfig};
use asl_core::platform::{self, CoreClass, EmulationProfile, PlatformSettings};

#[derive(Parser)]
#[command(
    name = "asl",
    about = "Lock benchmarks, SLO sweeps and a deterministic contention simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark scenario and report throughput and latency.
    Bench(BenchArgs),
    /// Sweep the SLO or the contention level across a series of runs.
    Sweep(SweepArgs),
    /// Lock-protected stack / linked-list workloads.
    Ds(DsArgs),
    /// Core-oversubscription comparison (blocking mutex vs standby modes).
    Oversub(OversubArgs),
    /// Closed-form throughput model tables.
    Model(ModelArgs),
    /// Deterministic discrete-event simulation of one lock policy.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct CommonBench {
    /// Lock under test: mcs|tas|ticket|proportional|asl.
    #[arg(long, default_value = "asl")]
    lock: String,
    /// Big-class worker threads.
    #[arg(long, default_value_t = 4)]
    big: usize,
    /// Little-class worker threads.
    #[arg(long, default_value_t = 4)]
    little: usize,
    /// Epoch latency SLO in nanoseconds (omit to run without epochs).
    #[arg(long)]
    slo_ns: Option<u64>,
    /// SLO percentile.
    #[arg(long)]
    pct: Option<u8>,
    /// Run duration in seconds.
    #[arg(long, default_value_t = 3.0)]
    duration_s: f64,
    /// Base critical-section cost in big-core nanoseconds.
    #[arg(long, default_value_t = 1_000)]
    cs_ns: u64,
    /// Work between two acquisitions (contention knob).
    #[arg(long, default_value_t = 100)]
    noncs_ns: u64,
    /// Epoch-length mix, e.g. "1" or "1:0.5,100:0.5".
    #[arg(long, default_value = "1")]
    mix: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Little-core slowdown factor for emulation.
    #[arg(long = "emulate-a")]
    emulate_a: Option<f64>,
    /// Pin workers to cores round-robin.
    #[arg(long)]
    pin: bool,
    /// Do not pin workers (default).
    #[arg(long, conflicts_with = "pin")]
    no_pin: bool,
    /// Key-value settings file (core map, a, pct, window constants).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report format for --out.
    #[arg(long, default_value = "json")]
    format: String,
    /// Write the full report here (stdout shows a summary either way).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonBench,
    /// Workload shape: steady, or the phased variable-load schedule.
    #[arg(long, default_value = "steady")]
    workload: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonBench,
    /// What to sweep: slo|contention.
    #[arg(long, default_value = "slo")]
    sweep: String,
    /// Comma-separated points: SLOs in ns, or non-CS durations in ns.
    #[arg(long)]
    points: String,
}

#[derive(Args)]
struct DsArgs {
    #[command(flatten)]
    common: CommonBench,
    /// Data structure: stack|list.
    #[arg(long, default_value = "stack")]
    ds: String,
}

#[derive(Args)]
struct OversubArgs {
    #[command(flatten)]
    common: CommonBench,
    /// Threads per configured worker slot.
    #[arg(long, default_value_t = 2)]
    factor: usize,
}

#[derive(Args)]
struct ModelArgs {
    /// Little/big capacity ratio.
    #[arg(long, default_value_t = 4.7)]
    a: f64,
    /// Table upper bound for x (big CS per little CS).
    #[arg(long, default_value_t = 32)]
    x_max: u32,
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// fifo|tas-big|tas-little|proportional|window|slo-feedback.
    #[arg(long, default_value = "fifo")]
    policy: String,
    /// Reorder window in time units (window policy).
    #[arg(long, default_value_t = 0)]
    window: u64,
    /// Batch ratio (proportional policy).
    #[arg(long, default_value_t = 10)]
    batch: u32,
    /// Epoch SLO in time units (slo-feedback policy).
    #[arg(long, default_value_t = 500)]
    slo: u64,
    #[arg(long, default_value_t = 99)]
    pct: u8,
    /// Probability the favored class wins a contended grant.
    #[arg(long, default_value_t = 1.0)]
    stickiness: f64,
    #[arg(long, default_value_t = 1)]
    n_big: usize,
    #[arg(long, default_value_t = 1)]
    n_little: usize,
    #[arg(long, default_value_t = 4.7)]
    a: f64,
    /// Big-core CS cost in time units.
    #[arg(long, default_value_t = 10)]
    cs: u64,
    #[arg(long, default_value_t = 0)]
    noncs: u64,
    /// Total critical sections to simulate.
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// JSON file holding a full simulation config (overrides the flags).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

type CliError = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench(args) => bench(args),
        Command::Sweep(args) => sweep(args),
        Command::Ds(args) => ds(args),
        Command::Oversub(args) => oversub(args),
        Command::Model(args) => model_tables(args),
        Command::Simulate(args) => simulate(args),
    }
}

fn settings_for(common: &CommonBench) -> Result<PlatformSettings, CliError> {
    let mut settings = match &common.config {
        Some(path) => PlatformSettings::load(path)?,
        None => PlatformSettings::from_env()?,
    };
    if let Some(a) = common.emulate_a {
        if a < 1.0 {
            return Err("emulation factor must be >= 1".into());
        }
        settings.inflation_factor = a;
    }
    if let Some(pct) = common.pct {
        if !(1..=99).contains(&pct) {
            return Err("pct must be in 1..=99".into());
        }
        settings.pct = pct;
    }
    Ok(settings)
}

fn bench_config(common: &CommonBench, settings: &PlatformSettings) -> Result<BenchConfig, CliError> {
    if common.duration_s <= 0.0 {
        return Err("duration must be positive".into());
    }
    let cfg = BenchConfig {
        lock: common.lock.parse::<LockKind>()?,
        n_big: common.big,
        n_little: common.little,
        slo_ns: common.slo_ns,
        pct: settings.pct,
        duration: Duration::from_secs_f64(common.duration_s),
        cs_ns: common.cs_ns,
        non_cs_ns: common.noncs_ns,
        mix: common.mix.parse::<EpochMix>()?,
        seed: common.seed,
        pin: common.pin && !common.no_pin,
        inflation: settings.inflation_factor,
        max_window_ns: settings.max_window_ns,
        min_unit_ns: settings.min_unit_ns,
        ..BenchConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn calibrate(settings: &PlatformSettings) -> Result<EmulationProfile, CliError> {
    let profile = platform::calibrate_with_factor(settings.inflation_factor)?;
    eprintln!(
        "calibration: {:.3} iters/ns, inflation a={:.2}, host cores: {}",
        profile.iters_per_ns,
        profile.inflation_factor,
        platform::available_cores()
    );
    Ok(profile)
}

fn write_or_stdout(
    out: &Option<PathBuf>,
    emit: impl Fn(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            let mut buf = std::io::BufWriter::new(file);
            emit(&mut buf)?;
            buf.flush()?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit(&mut lock)
        }
    }
}

fn print_summary(report: &harness::BenchReport) {
    let p99 = |s: &Option<harness::LatencyStats>| {
        s.as_ref()
            .map(|v| format!("{:.1}us", v.p99_ns as f64 / 1e3))
            .unwrap_or_else(|| "-".into())
    };
    eprintln!(
        "{}: {:.0} epochs/s (big {:.0}, little {:.0}); P99 overall {} big {} little {}{}",
        report.lock,
        report.throughput.total_eps,
        report.throughput.big_eps,
        report.throughput.little_eps,
        p99(&report.latency.overall),
        p99(&report.latency.big),
        p99(&report.latency.little),
        report
            .violation_fraction
            .map(|v| format!("; violations {:.3}%", v * 100.0))
            .unwrap_or_default(),
    );
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let settings = settings_for(&args.common)?;
    let cfg = bench_config(&args.common, &settings)?;
    let profile = calibrate(&settings)?;
    let format: ExportFormat = args.common.format.parse()?;
    match args.workload.as_str() {
        "steady" => {
            let report = harness::run_scenario(&cfg, &profile)?;
            print_summary(&report);
            write_or_stdout(&args.common.out, |w| match format {
                ExportFormat::Json => Ok(harness::export_json(&report, w)?),
                ExportFormat::Csv => Ok(harness::export_csv(&report, w)?),
            })
        }
        "phased" => {
            let out = harness::scenario_variable_load(&cfg, &profile)?;
            print_summary(&out.report);
            for phase in &out.phases {
                eprintln!(
                    "  phase {:<10} [{:>5.2}s..{:>5.2}s] epochs {:>8} p99(last third) {}",
                    phase.label,
                    phase.start_s,
                    phase.end_s,
                    phase.epochs,
                    phase
                        .p99_last_third_ns
                        .map(|v| format!("{:.1}us", v as f64 / 1e3))
                        .unwrap_or_else(|| "-".into())
                );
            }
            write_or_stdout(&args.common.out, |w| Ok(harness::export_json(&out, w)?))
        }
        other => Err(format!("unknown workload `{other}` (expected steady|phased)").into()),
    }
}

fn parse_points(spec: &str) -> Result<Vec<u64>, CliError> {
    spec.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|_| format!("bad point `{p}`").into())
        })
        .collect()
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let settings = settings_for(&args.common)?;
    let cfg = bench_config(&args.common, &settings)?;
    let profile = calibrate(&settings)?;
    let points = parse_points(&args.points)?;
    if points.is_empty() {
        return Err("need at least one sweep point".into());
    }
    let format: ExportFormat = args.common.format.parse()?;
    match args.sweep.as_str() {
        "slo" => {
            let sweep: Vec<SloPoint> = harness::scenario_slo_sweep(&cfg, &points, &profile)?;
            for p in &sweep {
                print_summary(&p.report);
            }
            write_or_stdout(&args.common.out, |w| match format {
                ExportFormat::Json => Ok(harness::export_json(&sweep, w)?),
                ExportFormat::Csv => Ok(harness::export_slo_sweep_csv(&sweep, w)?),
            })
        }
        "contention" => {
            let sweep = harness::scenario_contention_sweep(&cfg, &points, &profile)?;
            for p in &sweep {
                eprintln!(
                    "noncs {:>8}ns: asl {:.0}/s, speedup vs mcs {:.2}x, vs tas {:.2}x, vs big-only {:.2}x",
                    p.non_cs_ns,
                    p.asl.throughput.total_eps,
                    p.speedup_vs_mcs,
                    p.speedup_vs_tas,
                    p.speedup_vs_big_only
                );
            }
            write_or_stdout(&args.common.out, |w| Ok(harness::export_json(&sweep, w)?))
        }
        other => Err(format!("unknown sweep `{other}` (expected slo|contention)").into()),
    }
}

fn ds(args: DsArgs) -> Result<(), CliError> {
    let settings = settings_for(&args.common)?;
    let cfg = bench_config(&args.common, &settings)?;
    let profile = calibrate(&settings)?;
    let kind: DsKind = args.ds.parse()?;
    let out = harness::scenario_data_structures(&cfg, kind, &profile)?;
    print_summary(&out.report);
    eprintln!(
        "  {:?}: pushes {}, pops {}, empty pops {}, final len {}, conserved: {}",
        out.kind, out.pushes, out.pops, out.empty_pops, out.final_len, out.conserved
    );
    if !out.conserved {
        return Err("element-count conservation violated".into());
    }
    write_or_stdout(&args.common.out, |w| Ok(harness::export_json(&out, w)?))
}

fn oversub(args: OversubArgs) -> Result<(), CliError> {
    let settings = settings_for(&args.common)?;
    let cfg = bench_config(&args.common, &settings)?;
    let profile = calibrate(&settings)?;
    let out = harness::scenario_oversubscription(&cfg, args.factor, &profile)?;
    eprintln!("oversubscription x{} ({} threads):", out.factor, out.threads);
    print_summary(&out.blocking_baseline);
    print_summary(&out.asl_sleep_blocking);
    print_summary(&out.asl_spin_queue);
    write_or_stdout(&args.common.out, |w| Ok(harness::export_json(&out, w)?))
}

fn model_tables(args: ModelArgs) -> Result<(), CliError> {
    if args.a < 1.0 {
        return Err("a must be >= 1".into());
    }
    #[derive(serde::Serialize)]
    struct Point {
        x: u32,
        throughput: f64,
    }
    #[derive(serde::Serialize)]
    struct Table {
        a: f64,
        speedup_upper_bound: f64,
        points: Vec<Point>,
    }
    let table = Table {
        a: args.a,
        speedup_upper_bound: model::speedup_upper_bound(args.a),
        points: (0..=args.x_max)
            .map(|x| Point {
                x,
                throughput: model::theoretical_throughput(x as f64, args.a),
            })
            .collect(),
    };
    eprintln!(
        "a = {}: speedup upper bound {:.4}",
        table.a, table.speedup_upper_bound
    );
    let format: ExportFormat = args.format.parse()?;
    write_or_stdout(&args.out, |w| match format {
        ExportFormat::Json => Ok(harness::export_json(&table, w)?),
        ExportFormat::Csv => {
            writeln!(w, "x,throughput")?;
            for p in &table.points {
                writeln!(w, "{},{}", p.x, p.throughput)?;
            }
            writeln!(w, "speedup_upper_bound,{}", table.speedup_upper_bound)?;
            Ok(())
        }
    })
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(path) => serde_json::from_str::<SimConfig>(&std::fs::read_to_string(path)?)?,
        None => {
            let policy = match args.policy.as_str() {
                "fifo" => Policy::Fifo,
                "tas-big" => Policy::TasAffinity {
                    favored: CoreClass::Big,
                    stickiness: args.stickiness,
                },
                "tas-little" => Policy::TasAffinity {
                    favored: CoreClass::Little,
                    stickiness: args.stickiness,
                },
                "proportional" => Policy::Proportional { batch: args.batch },
                "window" => Policy::Window {
                    window: args.window,
                },
                "slo-feedback" => Policy::SloFeedback {
                    slo: args.slo,
                    pct: args.pct,
                    min_unit: 1,
                    max_window: u64::MAX / 4,
                },
                other => return Err(format!("unknown policy `{other}`").into()),
            };
            SimConfig {
                n_big: args.n_big,
                n_little: args.n_little,
                a: args.a,
                cs_big: args.cs,
                non_cs: args.noncs,
                policy,
                horizon_epochs: args.horizon,
                seed: args.seed,
            }
        }
    };
    cfg.validate().map_err(CliError::from)?;
    let result = model::simulate(&cfg);
    eprintln!(
        "simulated {} sections over {} units: normalized throughput {:.6} (whole-horizon {:.6})",
        result.total_cs, result.makespan, result.normalized_throughput, result.whole_horizon_normalized
    );
    let format: ExportFormat = args.format.parse()?;
    write_or_stdout(&args.out, |w| match format {
        ExportFormat::Json => Ok(harness::export_json(&result, w)?),
        ExportFormat::Csv => {
            writeln!(w, "metric,class,value")?;
            writeln!(w, "total_cs,overall,{}", result.total_cs)?;
            writeln!(w, "acquisitions,big,{}", result.acquisitions.big)?;
            writeln!(w, "acquisitions,little,{}", result.acquisitions.little)?;
            writeln!(w, "makespan,overall,{}", result.makespan)?;
            writeln!(w, "normalized_throughput,overall,{}", result.normalized_throughput)?;
            writeln!(
                w,
                "whole_horizon_normalized,overall,{}",
                result.whole_horizon_normalized
            )?;
            writeln!(w, "lock_utilization,overall,{}", result.lock_utilization)?;
            for (class, stats) in [("big", &result.wait.big), ("little", &result.wait.little)] {
                if let Some(s) = stats {
                    writeln!(w, "wait_mean,{class},{}", s.mean)?;
                    writeln!(w, "wait_p99,{class},{}", s.p99)?;
                    writeln!(w, "wait_max,{class},{}", s.max)?;
                }
            }
            Ok(())
        }
    })
}
