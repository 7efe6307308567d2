//! Benchmark configuration: lock kind, thread mix, SLO and workload shape.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::reorder::DEFAULT_MAX_WINDOW_NS;
use crate::runtime::{DEFAULT_MIN_UNIT_NS, DEFAULT_PCT};

/// Lock implementation under benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockKind {
    Mcs,
    Tas,
    Ticket,
    Proportional,
    Asl,
}

impl LockKind {
    pub const ALL: [LockKind; 5] = [
        LockKind::Mcs,
        LockKind::Tas,
        LockKind::Ticket,
        LockKind::Proportional,
        LockKind::Asl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LockKind::Mcs => "mcs",
            LockKind::Tas => "tas",
            LockKind::Ticket => "ticket",
            LockKind::Proportional => "proportional",
            LockKind::Asl => "asl",
        }
    }
}

impl fmt::Display for LockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LockKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mcs" => Ok(LockKind::Mcs),
            "tas" => Ok(LockKind::Tas),
            "ticket" => Ok(LockKind::Ticket),
            "proportional" => Ok(LockKind::Proportional),
            "asl" => Ok(LockKind::Asl),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown lock kind `{other}` (expected mcs|tas|ticket|proportional|asl)"
            ))),
        }
    }
}

/// Distribution of epoch length multipliers, e.g. `1:0.5,100:0.5` for a
/// fifty-fifty mix of short and 100x epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMix {
    entries: Vec<(u64, f64)>,
}

impl Default for EpochMix {
    fn default() -> Self {
        EpochMix {
            entries: vec![(1, 1.0)],
        }
    }
}

impl EpochMix {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn new(entries: Vec<(u64, f64)>) -> Result<Self, HarnessError> {
        if entries.is_empty() {
            return Err(HarnessError::InvalidConfig("empty epoch mix".into()));
        }
        let sum: f64 = entries.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(HarnessError::InvalidConfig(format!(
                "mix ratios sum to {sum}, expected 1"
            )));
        }
        if entries.iter().any(|&(m, w)| m == 0 || w < 0.0) {
            return Err(HarnessError::InvalidConfig(
                "mix multipliers must be positive and weights non-negative".into(),
            ));
        }
        Ok(EpochMix { entries })
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    /// Draw one multiplier; deterministic in the generator state.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        if self.entries.len() == 1 {
            return self.entries[0].0;
        }
        let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let mut acc = 0.0;
        for &(mult, weight) in &self.entries {
            acc += weight;
            if unit < acc {
                return mult;
            }
        }
        self.entries.last().unwrap().0
    }
}

impl FromStr for EpochMix {
    type Err = HarnessError;

    /// `"1"` or `"1:0.5,100:0.5"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |s: &str| HarnessError::InvalidConfig(format!("cannot parse mix entry `{s}`"));
        let mut entries = Vec::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let part = part.trim();
            match part.split_once(':') {
                Some((m, w)) => entries.push((
                    m.trim().parse().map_err(|_| bad(part))?,
                    w.trim().parse().map_err(|_| bad(part))?,
                )),
                None => entries.push((part.parse().map_err(|_| bad(part))?, 1.0)),
            }
        }
        if entries.len() == 1 {
            entries[0].1 = 1.0;
        }
        EpochMix::new(entries)
    }
}

/// Epoch length schedule over a run: a steady mix, or timed phases.
#[derive(Debug, Clone)]
pub enum Workload {
    SteadyMix(EpochMix),
    /// Equal-duration phases; each is a fixed multiplier or a random draw
    /// from a choice set.
    Phased(Vec<Phase>),
}

#[derive(Debug, Clone)]
pub struct Phase {
    pub label: String,
    pub kind: PhaseKind,
}

#[derive(Debug, Clone)]
pub enum PhaseKind {
    Fixed(u64),
    Random(Vec<u64>),
}

impl Workload {
    pub(crate) fn multiplier_at(
        &self,
        elapsed_ns: u64,
        run_ns: u64,
        rng: &mut ChaCha8Rng,
    ) -> u64 {
        match self {
            Workload::SteadyMix(mix) => mix.sample(rng),
            Workload::Phased(phases) => {
                let share = (run_ns / phases.len() as u64).max(1);
                let idx = ((elapsed_ns / share) as usize).min(phases.len() - 1);
                match &phases[idx].kind {
                    PhaseKind::Fixed(m) => *m,
                    PhaseKind::Random(choices) => {
                        choices[(rng.next_u64() % choices.len() as u64) as usize]
                    }
                }
            }
        }
    }
}

/// One benchmark run.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub lock: LockKind,
    pub n_big: usize,
    pub n_little: usize,
    /// Latency SLO annotated on every epoch; `None` runs without epochs
    /// (little-class acquisitions use the maximum reorder window).
    pub slo_ns: Option<u64>,
    pub pct: u8,
    pub duration: Duration,
    /// Base critical-section cost (big-core nanoseconds).
    pub cs_ns: u64,
    /// Work between two acquisitions (contention knob).
    pub non_cs_ns: u64,
    pub mix: EpochMix,
    pub seed: u64,
    pub pin: bool,
    /// Little-core slowdown factor used for emulation.
    pub inflation: f64,
    pub max_window_ns: u64,
    pub min_unit_ns: u64,
    /// Batch ratio for the proportional lock.
    pub batch_ratio: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            lock: LockKind::Mcs,
            n_big: 4,
            n_little: 4,
            slo_ns: None,
            pct: DEFAULT_PCT,
            duration: Duration::from_secs(3),
            cs_ns: 1_000,
            non_cs_ns: 100,
            mix: EpochMix::default(),
            seed: 42,
            pin: false,
            inflation: crate::platform::DEFAULT_INFLATION_FACTOR,
            max_window_ns: DEFAULT_MAX_WINDOW_NS,
            min_unit_ns: DEFAULT_MIN_UNIT_NS,
            batch_ratio: crate::locks::DEFAULT_BATCH_RATIO,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_big + self.n_little == 0 {
            return Err(HarnessError::InvalidConfig(
                "need at least one worker thread".into(),
            ));
        }
        if self.duration.is_zero() {
            return Err(HarnessError::InvalidConfig("duration must be > 0".into()));
        }
        if !(1..=99).contains(&self.pct) {
            return Err(HarnessError::InvalidConfig("pct must be in 1..=99".into()));
        }
        if self.inflation < 1.0 {
            return Err(HarnessError::InvalidConfig(
                "inflation factor must be >= 1".into(),
            ));
        }
        if self.cs_ns == 0 {
            return Err(HarnessError::InvalidConfig("cs_ns must be > 0".into()));
        }
        Ok(())
    }

    pub(crate) fn worker_seed(&self, worker: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(worker as u64)
    }

    pub(crate) fn slo_config(&self) -> crate::runtime::SloConfig {
        crate::runtime::SloConfig::new()
            .pct(self.pct)
            .min_unit_ns(self.min_unit_ns)
            .max_window_ns(self.max_window_ns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::SeedableRng;

    #[test]
    fn mix_parses_and_validates() {
        let mix: EpochMix = "1:0.5,100:0.5".parse().unwrap();
        assert_eq!(mix.entries().len(), 2);
        let single: EpochMix = "1".parse().unwrap();
        assert_eq!(single.entries(), &[(1, 1.0)]);
        assert!("1:0.3,100:0.3".parse::<EpochMix>().is_err());
        assert!("".parse::<EpochMix>().is_err());
        assert!("0:1.0".parse::<EpochMix>().is_err());
    }

    #[test]
    fn mix_sampling_is_deterministic_per_seed() {
        let mix: EpochMix = "1:0.5,100:0.5".parse().unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| mix.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn mix_sampling_tracks_weights() {
        let mix: EpochMix = "1:0.9,100:0.1".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let long = (0..10_000)
            .filter(|_| mix.sample(&mut rng) == 100)
            .count();
        assert!((500..1_500).contains(&long), "{long} long epochs");
    }

    #[test]
    fn phased_workload_switches_by_time() {
        let w = Workload::Phased(vec![
            Phase {
                label: "x1".into(),
                kind: PhaseKind::Fixed(1),
            },
            Phase {
                label: "x128".into(),
                kind: PhaseKind::Fixed(128),
            },
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(w.multiplier_at(0, 1_000, &mut rng), 1);
        assert_eq!(w.multiplier_at(499, 1_000, &mut rng), 1);
        assert_eq!(w.multiplier_at(500, 1_000, &mut rng), 128);
        assert_eq!(w.multiplier_at(5_000, 1_000, &mut rng), 128);
    }

    #[test]
    fn config_validation_catches_nonsense() {
        let mut cfg = BenchConfig::default();
        cfg.n_big = 0;
        cfg.n_little = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::default();
        cfg.inflation = 0.5;
        assert!(cfg.validate().is_err());
        assert!(BenchConfig::default().validate().is_ok());
    }
}
