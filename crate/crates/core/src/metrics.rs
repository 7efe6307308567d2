//! Latency recording, nearest-rank percentiles and CDF extraction.

use serde::{Deserialize, Serialize};

/// Nearest-rank percentile over sorted samples: the value at 1-indexed rank
/// `ceil(p/100 * n)`. `p` is given in percent, `0 < p <= 100`, with 0.1%
/// resolution (so `99.9` selects the P999).
///
/// Panics on an empty slice or out-of-range `p`.
pub fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    assert!(!sorted.is_empty(), "percentile of empty sample set");
    let tenths = (p * 10.0).round() as u64;
    assert!((1..=1000).contains(&tenths), "percentile out of range: {p}");
    let n = sorted.len() as u64;
    let rank = (tenths * n).div_ceil(1000).max(1);
    sorted[(rank - 1) as usize]
}

/// Full-log latency store with percentile and CDF extraction.
///
/// Full logging keeps percentiles exact; at desk scale the memory cost is
/// fine (8 bytes per epoch).
#[derive(Debug, Clone, Default)]
pub struct LatencyRecorder {
    samples: Vec<u64>,
    sorted: bool,
}

/// One point of a cumulative distribution: `fraction` of samples are
/// `<= latency_ns`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub latency_ns: u64,
    pub fraction: f64,
}

impl LatencyRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        LatencyRecorder {
            samples: Vec::with_capacity(n),
            sorted: false,
        }
    }

    #[inline]
    pub fn record(&mut self, latency_ns: u64) {
        self.samples.push(latency_ns);
        self.sorted = false;
    }

    pub fn merge(&mut self, other: &LatencyRecorder) {
        self.samples.extend_from_slice(&other.samples);
        self.sorted = false;
    }

    pub fn extend(&mut self, samples: &[u64]) {
        self.samples.extend_from_slice(samples);
        self.sorted = false;
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[u64] {
        &self.samples
    }

    fn sorted_samples(&mut self) -> &[u64] {
        if !self.sorted {
            self.samples.sort_unstable();
            self.sorted = true;
        }
        &self.samples
    }

    /// Nearest-rank percentile; `None` when no samples were recorded.
    pub fn percentile(&mut self, p: f64) -> Option<u64> {
        if self.samples.is_empty() {
            return None;
        }
        Some(nearest_rank(self.sorted_samples(), p))
    }

    pub fn mean(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        Some(self.samples.iter().map(|&v| v as f64).sum::<f64>() / self.samples.len() as f64)
    }

    pub fn max(&mut self) -> Option<u64> {
        self.sorted_samples().last().copied()
    }

    /// Fraction of samples strictly above `slo_ns`.
    pub fn violation_fraction(&self, slo_ns: u64) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let violations = self.samples.iter().filter(|&&v| v > slo_ns).count();
        Some(violations as f64 / self.samples.len() as f64)
    }

    /// Downsampled CDF with at most `max_points` points. Fractions are
    /// non-decreasing and the last point is exactly 1.0.
    pub fn cdf(&mut self, max_points: usize) -> Vec<CdfPoint> {
        let n = self.samples.len();
        if n == 0 || max_points == 0 {
            return Vec::new();
        }
        let sorted = self.sorted_samples();
        let points = max_points.min(n);
        let mut out = Vec::with_capacity(points);
        for k in 1..=points {
            // Evenly spaced ranks, always ending at rank n.
            let rank = (k * n).div_ceil(points);
            out.push(CdfPoint {
                latency_ns: sorted[rank - 1],
                fraction: rank as f64 / n as f64,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_matches_the_definition() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(nearest_rank(&v, 99.0), 99);
        assert_eq!(nearest_rank(&v, 100.0), 100);
        let v: Vec<u64> = (1..=10).collect();
        assert_eq!(nearest_rank(&v, 50.0), 5);
        assert_eq!(nearest_rank(&v, 99.9), 10);
        assert_eq!(nearest_rank(&[5], 1.0), 5);
        assert_eq!(nearest_rank(&[5], 99.0), 5);
    }

    #[test]
    fn recorder_percentiles_and_mean() {
        let mut r = LatencyRecorder::new();
        assert_eq!(r.percentile(99.0), None);
        for v in [30u64, 10, 20] {
            r.record(v);
        }
        assert_eq!(r.percentile(50.0), Some(20));
        assert_eq!(r.mean(), Some(20.0));
        assert_eq!(r.violation_fraction(25), Some(1.0 / 3.0));
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let mut r = LatencyRecorder::new();
        for v in 0..1000u64 {
            r.record((v * 7919) % 1000);
        }
        let cdf = r.cdf(64);
        assert!(!cdf.is_empty());
        for w in cdf.windows(2) {
            assert!(w[1].fraction >= w[0].fraction);
            assert!(w[1].latency_ns >= w[0].latency_ns);
        }
        assert_eq!(cdf.last().unwrap().fraction, 1.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Oracle: count samples <= chosen value must reach p% of n, and
            // no smaller sample may already satisfy that.
            #[test]
            fn nearest_rank_against_counting_oracle(
                mut samples in proptest::collection::vec(0u64..1000, 1..200),
                tenths in 1u64..=1000,
            ) {
                samples.sort_unstable();
                let p = tenths as f64 / 10.0;
                let chosen = nearest_rank(&samples, p);
                let n = samples.len() as u64;
                let need = (tenths * n).div_ceil(1000).max(1);
                let at_or_below = samples.iter().filter(|&&s| s <= chosen).count() as u64;
                prop_assert!(at_or_below >= need);
                let strictly_below = samples.iter().filter(|&&s| s < chosen).count() as u64;
                prop_assert!(strictly_below < need);
            }

            #[test]
            fn cdf_monotone_for_any_input(
                samples in proptest::collection::vec(0u64..10_000, 1..300),
                points in 1usize..50,
            ) {
                let mut r = LatencyRecorder::new();
                r.extend(&samples);
                let cdf = r.cdf(points);
                prop_assert!(!cdf.is_empty());
                for w in cdf.windows(2) {
                    prop_assert!(w[1].fraction >= w[0].fraction);
                    prop_assert!(w[1].latency_ns >= w[0].latency_ns);
                }
                prop_assert_eq!(cdf.last().unwrap().fraction, 1.0);
            }
        }
    }
}
