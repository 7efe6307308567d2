//! Benchmark reports and their json/csv export.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::metrics::{CdfPoint, LatencyRecorder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ExportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown format `{other}` (expected json|csv)"
            ))),
        }
    }
}

/// Host facts that make a report self-describing: results from different
/// machines and core counts are not comparable otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub host_cores: usize,
    pub pinned: bool,
    /// Little-core slowdown factor in effect.
    pub inflation: f64,
    /// True when classes are emulated by per-thread declaration rather
    /// than real heterogeneous cores.
    pub emulated: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub big: u64,
    pub little: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThroughputStats {
    /// Completed epochs per second, post-warmup.
    pub total_eps: f64,
    pub big_eps: f64,
    pub little_eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p90_ns: u64,
    pub p99_ns: u64,
    pub p999_ns: u64,
    pub max_ns: u64,
}

impl LatencyStats {
    pub(crate) fn from_recorder(rec: &mut LatencyRecorder) -> Option<Self> {
        if rec.is_empty() {
            return None;
        }
        Some(LatencyStats {
            count: rec.len() as u64,
            mean_ns: rec.mean().unwrap(),
            p50_ns: rec.percentile(50.0).unwrap(),
            p90_ns: rec.percentile(90.0).unwrap(),
            p99_ns: rec.percentile(99.0).unwrap(),
            p999_ns: rec.percentile(99.9).unwrap(),
            max_ns: rec.max().unwrap(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummaries {
    pub overall: Option<LatencyStats>,
    pub big: Option<LatencyStats>,
    pub little: Option<LatencyStats>,
}

/// Aggregated outcome of one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub lock: String,
    pub n_big: usize,
    pub n_little: usize,
    pub slo_ns: Option<u64>,
    pub configured_duration_s: f64,
    /// Post-warmup span used for throughput accounting.
    pub measured_span_s: f64,
    pub seed: u64,
    pub topology: Topology,
    pub throughput: ThroughputStats,
    /// Completed epochs per class (post-warmup).
    pub epochs: ClassCounts,
    /// Lock acquisitions per class (post-warmup); the affinity report.
    pub acquisitions: ClassCounts,
    pub latency: LatencySummaries,
    /// Fraction of epochs above the SLO, when one was set.
    pub violation_fraction: Option<f64>,
    /// Overall latency CDF, downsampled.
    pub cdf: Vec<CdfPoint>,
}

pub fn export_json<W: Write>(report: &impl Serialize, mut out: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// One `metric,class,value` row per scalar, then `cdf` rows as
/// `(latency_ns, cumulative_fraction)` pairs.
pub fn export_csv<W: Write>(report: &BenchReport, mut out: W) -> Result<(), HarnessError> {
    writeln!(out, "metric,class,value")?;
    writeln!(out, "lock,overall,{}", report.lock)?;
    writeln!(out, "threads,big,{}", report.n_big)?;
    writeln!(out, "threads,little,{}", report.n_little)?;
    if let Some(slo) = report.slo_ns {
        writeln!(out, "slo_ns,overall,{slo}")?;
    }
    writeln!(out, "measured_span_s,overall,{}", report.measured_span_s)?;
    writeln!(out, "host_cores,overall,{}", report.topology.host_cores)?;
    writeln!(out, "inflation,overall,{}", report.topology.inflation)?;
    writeln!(out, "throughput_eps,overall,{}", report.throughput.total_eps)?;
    writeln!(out, "throughput_eps,big,{}", report.throughput.big_eps)?;
    writeln!(out, "throughput_eps,little,{}", report.throughput.little_eps)?;
    writeln!(out, "epochs,overall,{}", report.epochs.total)?;
    writeln!(out, "epochs,big,{}", report.epochs.big)?;
    writeln!(out, "epochs,little,{}", report.epochs.little)?;
    writeln!(out, "acquisitions,big,{}", report.acquisitions.big)?;
    writeln!(out, "acquisitions,little,{}", report.acquisitions.little)?;
    for (class, stats) in [
        ("overall", &report.latency.overall),
        ("big", &report.latency.big),
        ("little", &report.latency.little),
    ] {
        if let Some(s) = stats {
            writeln!(out, "latency_mean_ns,{class},{}", s.mean_ns)?;
            writeln!(out, "latency_p50_ns,{class},{}", s.p50_ns)?;
            writeln!(out, "latency_p90_ns,{class},{}", s.p90_ns)?;
            writeln!(out, "latency_p99_ns,{class},{}", s.p99_ns)?;
            writeln!(out, "latency_p999_ns,{class},{}", s.p999_ns)?;
            writeln!(out, "latency_max_ns,{class},{}", s.max_ns)?;
        }
    }
    if let Some(v) = report.violation_fraction {
        writeln!(out, "violation_fraction,overall,{v}")?;
    }
    writeln!(out, "cdf_latency_ns,cdf_fraction")?;
    for p in &report.cdf {
        writeln!(out, "{},{}", p.latency_ns, p.fraction)?;
    }
    Ok(())
}

pub fn export_report(
    report: &BenchReport,
    format: ExportFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    match format {
        ExportFormat::Json => export_json(report, &mut buf)?,
        ExportFormat::Csv => export_csv(report, &mut buf)?,
    }
    buf.flush()?;
    Ok(())
}

/// One row per SLO point, ready for throughput/latency-vs-SLO plots.
pub fn export_slo_sweep_csv<W: Write>(
    points: &[super::SloPoint],
    mut out: W,
) -> Result<(), HarnessError> {
    writeln!(
        out,
        "slo_ns,throughput_eps,overall_p99_ns,big_p99_ns,little_p99_ns,violation_fraction"
    )?;
    let p99 = |s: &Option<LatencyStats>| s.map(|v| v.p99_ns.to_string()).unwrap_or_default();
    for point in points {
        let r = &point.report;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            point.slo_ns,
            r.throughput.total_eps,
            p99(&r.latency.overall),
            p99(&r.latency.big),
            p99(&r.latency.little),
            r.violation_fraction
                .map(|v| v.to_string())
                .unwrap_or_default(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> BenchReport {
        let mut rec = LatencyRecorder::new();
        for v in 1..=100u64 {
            rec.record(v * 10);
        }
        let stats = LatencyStats::from_recorder(&mut rec);
        BenchReport {
            lock: "mcs".into(),
            n_big: 2,
            n_little: 2,
            slo_ns: Some(500),
            configured_duration_s: 1.0,
            measured_span_s: 0.9,
            seed: 42,
            topology: Topology {
                host_cores: 8,
                pinned: false,
                inflation: 4.7,
                emulated: true,
            },
            throughput: ThroughputStats {
                total_eps: 100.0,
                big_eps: 60.0,
                little_eps: 40.0,
            },
            epochs: ClassCounts {
                big: 60,
                little: 40,
                total: 100,
            },
            acquisitions: ClassCounts {
                big: 60,
                little: 40,
                total: 100,
            },
            latency: LatencySummaries {
                overall: stats,
                big: stats,
                little: None,
            },
            violation_fraction: Some(0.5),
            cdf: rec.cdf(16),
        }
    }

    #[test]
    fn json_round_trips() {
        let report = sample_report();
        let mut buf = Vec::new();
        export_json(&report, &mut buf).unwrap();
        let parsed: BenchReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn csv_rows_and_cdf_terminate_at_one() {
        let report = sample_report();
        let mut buf = Vec::new();
        export_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("metric,class,value\n"));
        assert!(text.contains("throughput_eps,overall,100"));
        let last = text.trim_end().lines().last().unwrap();
        assert!(last.ends_with(",1"), "cdf must end at fraction 1: {last}");
    }
}
