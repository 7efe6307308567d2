//! Analytic formulas and a deterministic discrete-event oracle for lock
//! ordering policies on asymmetric cores.
//!
//! Everything here is exact and single-threaded: time is counted in integer
//! units (one unit = the big-core critical-section cost quantum) and ties
//! are broken by thread id, so property tests can compare runs bit for bit.

mod sim;

pub use sim::{simulate, ClassPair, Policy, SimConfig, SimResult, WaitStats};

use crate::runtime::{adjust_window, SloConfig};

/// Normalized lock throughput when `x` big critical sections run for every
/// little one, with a little/big cost ratio `a`: `(x+1)/(x+a)`.
///
/// Normalization is to the big-only rate (one CS per unit time).
pub fn theoretical_throughput(x: f64, a: f64) -> f64 {
    debug_assert!(x >= 0.0 && a >= 1.0);
    (x + 1.0) / (x + a)
}

/// Upper bound on the relative throughput gain of big-only execution over
/// strict big/little alternation: `(a+1)/2 - 1`.
pub fn speedup_upper_bound(a: f64) -> f64 {
    debug_assert!(a >= 1.0);
    (a + 1.0) / 2.0 - 1.0
}

/// Reorder-window feedback state of one simulated little thread; mirrors
/// the runtime's per-epoch state, including the seeding of the growth unit
/// on the first epoch end.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeedbackState {
    pub window_ns: u64,
    pub unit_ns: u64,
}

impl FeedbackState {
    /// Fold one epoch latency into the window, exactly as the lock runtime
    /// does at `epoch_end`.
    pub fn observe(&mut self, latency_ns: u64, slo_ns: u64, cfg: &SloConfig) {
        if self.unit_ns == 0 {
            let seeded = (slo_ns as u128 * (100 - cfg.get_pct() as u128) / 100) as u64;
            self.unit_ns = seeded.max(cfg.get_min_unit_ns());
        }
        let (window, unit) = adjust_window(self.window_ns, self.unit_ns, latency_ns, slo_ns, cfg);
        self.window_ns = window;
        self.unit_ns = unit;
    }
}

/// Window trajectory produced by feeding a latency sequence through the
/// feedback loop: entry `i` is the window after epoch `i` closed.
pub fn feedback_trajectory(
    cfg: &SloConfig,
    slo_ns: u64,
    latencies: impl IntoIterator<Item = u64>,
) -> Vec<u64> {
    let mut state = FeedbackState::default();
    latencies
        .into_iter()
        .map(|latency| {
            state.observe(latency, slo_ns, cfg);
            state.window_ns
        })
        .collect()
}

/// Monotone step latency model: an epoch violates the SLO iff its window
/// exceeds `threshold_window_ns`.
#[derive(Debug, Clone, Copy)]
pub struct StepLatencyModel {
    pub threshold_window_ns: u64,
    pub latency_below_ns: u64,
    pub latency_above_ns: u64,
}

impl StepLatencyModel {
    pub fn latency_for(&self, window_ns: u64) -> u64 {
        if window_ns > self.threshold_window_ns {
            self.latency_above_ns
        } else {
            self.latency_below_ns
        }
    }
}

/// Long-run fraction of SLO-violating epochs under the step latency model.
///
/// The feedback loop is schedule-free here: each epoch's latency is a pure
/// function of its window, so the rate depends only on the growth/reduction
/// cycle structure (about one violation per `100/(100-pct)` epochs once the
/// window oscillates around the step).
pub fn steady_state_violation_rate(
    cfg: &SloConfig,
    slo_ns: u64,
    model: &StepLatencyModel,
    epochs: u64,
) -> f64 {
    assert!(epochs > 0);
    let mut state = FeedbackState::default();
    let mut violations = 0u64;
    for _ in 0..epochs {
        let latency = model.latency_for(state.window_ns);
        if latency > slo_ns {
            violations += 1;
        }
        state.observe(latency, slo_ns, cfg);
    }
    violations as f64 / epochs as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throughput_formula_spot_values() {
        assert!((theoretical_throughput(0.0, 4.7) - 1.0 / 4.7).abs() < 1e-12);
        assert_eq!(theoretical_throughput(5.0, 1.0), 1.0);
        assert!((theoretical_throughput(9.0, 4.7) - 10.0 / 13.7).abs() < 1e-12);
    }

    #[test]
    fn speedup_bound_spot_values() {
        assert_eq!(speedup_upper_bound(4.75), 1.875);
        assert_eq!(speedup_upper_bound(1.0), 0.0);
        assert_eq!(speedup_upper_bound(3.0), 1.0);
    }

    #[test]
    fn trajectory_matches_manual_fold() {
        let cfg = SloConfig::new().pct(90).min_unit_ns(10);
        let slo = 1_000;
        let latencies = [100u64, 200, 1500, 900, 2000, 100, 100];
        let trajectory = feedback_trajectory(&cfg, slo, latencies);

        let mut window = 0u64;
        let mut unit = 0u64;
        let mut expect = Vec::new();
        for lat in latencies {
            if unit == 0 {
                unit = (slo * (100 - 90) / 100).max(10);
            }
            let (w, u) = adjust_window(window, unit, lat, slo, &cfg);
            window = w;
            unit = u;
            expect.push(window);
        }
        assert_eq!(trajectory, expect);
    }

    #[test]
    fn generous_slo_never_violates() {
        let cfg = SloConfig::new().max_window_ns(50_000);
        let model = StepLatencyModel {
            threshold_window_ns: 100_000,
            latency_below_ns: 500,
            latency_above_ns: 2_000,
        };
        // The growth cap keeps the window below the step threshold forever.
        let rate = steady_state_violation_rate(&cfg, 1_000, &model, 10_000);
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn violation_rate_tracks_pct_50() {
        let cfg = SloConfig::new().pct(50);
        let model = StepLatencyModel {
            threshold_window_ns: 100_000,
            latency_below_ns: 5_000,
            latency_above_ns: 20_000,
        };
        let rate = steady_state_violation_rate(&cfg, 10_000, &model, 100_000);
        assert!((0.25..=0.45).contains(&rate), "rate {rate}");
    }
}
