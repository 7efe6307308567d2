//! Error types shared across the crate.

use thiserror::Error;

/// Configuration problems: unparsable settings, incomplete core maps.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("core {core} is not covered by the core-type map (mapped: {mapped})")]
    UnmappedCore { core: usize, mapped: usize },
    #[error("cannot parse `{input}` as {expected}")]
    Parse { input: String, expected: &'static str },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// The asymmetry-emulation calibration failed its self-check.
#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("spin-work rate calibrated to zero iterations per nanosecond")]
    ZeroRate,
    #[error("calibration too unstable: spread {spread_pct:.0}% exceeds {limit_pct:.0}%")]
    Unstable { spread_pct: f64, limit_pct: f64 },
    #[error(
        "calibrated {requested_ns}ns delay took {observed_ns}ns, outside [{low_ns}, {high_ns}]"
    )]
    SelfCheck {
        requested_ns: u64,
        observed_ns: u64,
        low_ns: u64,
        high_ns: u64,
    },
}

/// Epoch bookkeeping violations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EpochError {
    #[error("epoch id {id} out of range (max_epochs = {max_epochs})")]
    IdOutOfRange { id: u32, max_epochs: usize },
    #[error("epoch {open} already open on this thread")]
    AlreadyOpen { open: u32 },
    #[error("epoch {id} is not the open epoch on this thread")]
    NotOpen { id: u32 },
    #[error("global epoch-id space exhausted (max_epochs = {max_epochs})")]
    Exhausted { max_epochs: usize },
}

/// Benchmark-harness failures.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid benchmark configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}
