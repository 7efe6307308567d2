//! Clocks, core identification, big/little classification, thread pinning
//! and calibrated asymmetry emulation.
//!
//! Everything here exists so the rest of the crate can run on symmetric
//! desk hardware: worker threads *declare* a core class instead of relying
//! on real heterogeneous silicon, and [`emulated_work`] stretches critical
//! sections by a calibrated inflation factor to stand in for the slower
//! little cores.

use std::cell::Cell;
use std::fmt;
use std::hint::black_box;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{CalibrationError, ConfigError};

/// Default little-core slowdown factor relative to a big core.
pub const DEFAULT_INFLATION_FACTOR: f64 = 4.7;

/// The two capacity classes of an asymmetric processor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoreClass {
    Big,
    Little,
}

impl CoreClass {
    pub fn is_big(self) -> bool {
        matches!(self, CoreClass::Big)
    }

    pub fn name(self) -> &'static str {
        match self {
            CoreClass::Big => "big",
            CoreClass::Little => "little",
        }
    }
}

impl fmt::Display for CoreClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Monotonic clock
// ---------------------------------------------------------------------------

fn clock_anchor() -> &'static Instant {
    static ANCHOR: OnceLock<Instant> = OnceLock::new();
    ANCHOR.get_or_init(Instant::now)
}

/// Nanoseconds since an arbitrary process-local origin, monotonic
/// non-decreasing within a thread.
#[inline]
pub fn now_ns() -> u64 {
    clock_anchor().elapsed().as_nanos() as u64
}

// ---------------------------------------------------------------------------
// Per-thread identity: declared class and worker id
// ---------------------------------------------------------------------------

thread_local! {
    static DECLARED_CLASS: Cell<Option<CoreClass>> = const { Cell::new(None) };
    static WORKER_ID: Cell<Option<u64>> = const { Cell::new(None) };
}

/// Declare the calling thread's core class (emulation mode). A declaration
/// always takes precedence over core-id lookup. `None` clears it.
pub fn declare_thread_class(class: Option<CoreClass>) {
    DECLARED_CLASS.with(|c| c.set(class));
}

/// Class declared for the calling thread, if any.
pub fn declared_thread_class() -> Option<CoreClass> {
    DECLARED_CLASS.with(Cell::get)
}

/// Tag the calling thread with a small worker id for observation records.
pub fn set_worker_id(id: u64) {
    WORKER_ID.with(|w| w.set(Some(id)));
}

/// Worker id of the calling thread. Threads that never called
/// [`set_worker_id`] get a process-unique id assigned on first use.
pub fn worker_id() -> u64 {
    WORKER_ID.with(|w| {
        if let Some(id) = w.get() {
            id
        } else {
            use std::sync::atomic::{AtomicU64, Ordering};
            // Anonymous threads count down from the top so they never
            // collide with harness-assigned ids.
            static NEXT_ANON: AtomicU64 = AtomicU64::new(u64::MAX);
            let id = NEXT_ANON.fetch_sub(1, Ordering::Relaxed);
            w.set(Some(id));
            id
        }
    })
}

// ---------------------------------------------------------------------------
// Core-type map and classification
// ---------------------------------------------------------------------------

/// Mapping from core id to [`CoreClass`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreTypeMap {
    classes: Vec<CoreClass>,
}

impl CoreTypeMap {
    /// Build a map from explicit big/little core-id lists. The ids must
    /// together cover `0..n` with no gaps.
    pub fn new(big: &[usize], little: &[usize]) -> Result<Self, ConfigError> {
        let n = big.len() + little.len();
        let mut classes = vec![None; n];
        for (&core, class) in big
            .iter()
            .map(|c| (c, CoreClass::Big))
            .chain(little.iter().map(|c| (c, CoreClass::Little)))
        {
            let slot = classes
                .get_mut(core)
                .ok_or(ConfigError::UnmappedCore { core, mapped: n })?;
            if slot.replace(class).is_some() {
                return Err(ConfigError::InvalidValue {
                    key: "core map".into(),
                    reason: format!("core {core} listed twice"),
                });
            }
        }
        let classes = classes
            .into_iter()
            .enumerate()
            .map(|(core, c)| c.ok_or(ConfigError::UnmappedCore { core, mapped: n }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CoreTypeMap { classes })
    }

    /// Parse core-id range lists like `0-3` or `0,2-4,7`.
    pub fn from_range_specs(big: &str, little: &str) -> Result<Self, ConfigError> {
        Ok(Self::new(&parse_ranges(big)?, &parse_ranges(little)?)?)
    }

    /// Every core mapped to `Big` (symmetric-host default).
    pub fn all_big(n_cores: usize) -> Self {
        CoreTypeMap {
            classes: vec![CoreClass::Big; n_cores],
        }
    }

    pub fn num_cores(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, core_id: usize) -> Option<CoreClass> {
        self.classes.get(core_id).copied()
    }

    /// Fail unless the map covers every core id the process may run on.
    pub fn validate_covers(&self, n_cores: usize) -> Result<(), ConfigError> {
        if self.classes.len() < n_cores {
            return Err(ConfigError::UnmappedCore {
                core: self.classes.len(),
                mapped: self.classes.len(),
            });
        }
        Ok(())
    }
}

fn parse_ranges(spec: &str) -> Result<Vec<usize>, ConfigError> {
    let mut out = Vec::new();
    let parse = |s: &str| {
        s.trim().parse::<usize>().map_err(|_| ConfigError::Parse {
            input: s.trim().to_string(),
            expected: "core id",
        })
    };
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi) = (parse(lo)?, parse(hi)?);
                if hi < lo {
                    return Err(ConfigError::Parse {
                        input: part.trim().to_string(),
                        expected: "ascending core-id range",
                    });
                }
                out.extend(lo..=hi);
            }
            None => out.push(parse(part)?),
        }
    }
    Ok(out)
}

/// Id of the core the calling thread currently runs on, if the OS exposes it.
#[cfg(target_os = "linux")]
pub fn current_core_id() -> Option<usize> {
    let cpu = unsafe { libc::sched_getcpu() };
    (cpu >= 0).then_some(cpu as usize)
}

#[cfg(not(target_os = "linux"))]
pub fn current_core_id() -> Option<usize> {
    None
}

/// Classify the calling thread: a per-thread declaration wins, otherwise the
/// current core id is looked up in `map`. Threads on cores the map does not
/// cover (validated at startup, so only reachable after migration to a
/// hot-plugged core) count as big.
pub fn classify_current_core(map: &CoreTypeMap) -> CoreClass {
    if let Some(declared) = declared_thread_class() {
        return declared;
    }
    current_core_id()
        .and_then(|id| map.class_of(id))
        .unwrap_or(CoreClass::Big)
}

// ---------------------------------------------------------------------------
// Thread pinning
// ---------------------------------------------------------------------------

/// Outcome of a pin request on platforms where pinning may be unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinOutcome {
    Pinned,
    /// The platform offers no affinity control; the run continues unpinned.
    Unsupported,
}

/// Pin the calling thread to `core_id`.
#[cfg(target_os = "linux")]
pub fn pin_thread(core_id: usize) -> Result<PinOutcome, ConfigError> {
    if core_id >= libc::CPU_SETSIZE as usize {
        return Err(ConfigError::InvalidValue {
            key: "pin".into(),
            reason: format!("core {core_id} beyond CPU_SETSIZE"),
        });
    }
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(core_id, &mut set);
        let rc = libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set);
        if rc == 0 {
            Ok(PinOutcome::Pinned)
        } else {
            Err(ConfigError::InvalidValue {
                key: "pin".into(),
                reason: format!(
                    "sched_setaffinity(core {core_id}): {}",
                    std::io::Error::last_os_error()
                ),
            })
        }
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_thread(_core_id: usize) -> Result<PinOutcome, ConfigError> {
    Ok(PinOutcome::Unsupported)
}

/// Number of cores available to this process.
pub fn available_cores() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

// ---------------------------------------------------------------------------
// Asymmetry emulation
// ---------------------------------------------------------------------------

/// Calibrated busy-work profile emulating the big/little capacity gap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EmulationProfile {
    /// Little-core slowdown factor `a` (little CS cost = a x big CS cost).
    pub inflation_factor: f64,
    /// Spin-work iterations completed per nanosecond on this host.
    pub iters_per_ns: f64,
}

/// Opaque busy work; one unit per loop iteration, resistant to the
/// optimizer and with no memory traffic outside its own stack slot.
#[inline(never)]
pub fn spin_work(iters: u64) -> u64 {
    let mut acc: u64 = 0x9e3779b97f4a7c15;
    for i in 0..iters {
        acc = black_box(acc.wrapping_mul(6364136223846793005).wrapping_add(i));
    }
    black_box(acc)
}

impl EmulationProfile {
    /// Profile that treats every class as a big core (no inflation).
    pub fn symmetric(iters_per_ns: f64) -> Self {
        EmulationProfile {
            inflation_factor: 1.0,
            iters_per_ns,
        }
    }

    pub fn with_factor(mut self, a: f64) -> Self {
        assert!(a >= 1.0, "inflation factor must be >= 1");
        self.inflation_factor = a;
        self
    }

    fn iters_for(&self, base_ns: u64, class: CoreClass) -> u64 {
        let scale = match class {
            CoreClass::Big => 1.0,
            CoreClass::Little => self.inflation_factor,
        };
        (base_ns as f64 * scale * self.iters_per_ns) as u64
    }
}

/// Busy-execute approximately `base_ns` of work for a big core, or
/// `a x base_ns` for a little core.
#[inline]
pub fn emulated_work(base_ns: u64, class: CoreClass, profile: &EmulationProfile) {
    spin_work(profile.iters_for(base_ns, class));
}

const CALIBRATION_TRIALS: usize = 11;
const CALIBRATION_ROUNDS: usize = 3;
const CALIBRATION_ITERS: u64 = 1_000_000;
const CALIBRATION_SPREAD_LIMIT: f64 = 0.5;
const SELF_CHECK_NS: u64 = 100_000;
const SELF_CHECK_LOW: f64 = 0.9;
const SELF_CHECK_HIGH: f64 = 1.5;
const SELF_CHECK_ATTEMPTS: usize = 5;

/// Measure the spin-work rate of this host and self-check the result.
///
/// Call once at startup before worker threads launch; the self-check
/// verifies that a calibrated 100us delay lands within [0.9x, 1.5x] of the
/// requested wall time (retrying a few times to ride out scheduler noise).
pub fn calibrate_delay() -> Result<EmulationProfile, CalibrationError> {
    calibrate_with_factor(DEFAULT_INFLATION_FACTOR)
}

/// [`calibrate_delay`] with an explicit inflation factor.
pub fn calibrate_with_factor(a: f64) -> Result<EmulationProfile, CalibrationError> {
    let mut last_err = CalibrationError::ZeroRate;
    for _ in 0..CALIBRATION_ROUNDS {
        match calibration_round(a) {
            Ok(profile) => return Ok(profile),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

fn calibration_round(a: f64) -> Result<EmulationProfile, CalibrationError> {
    let mut rates = [0f64; CALIBRATION_TRIALS];
    spin_work(CALIBRATION_ITERS); // warm up frequency scaling
    for rate in rates.iter_mut() {
        let start = Instant::now();
        spin_work(CALIBRATION_ITERS);
        let ns = start.elapsed().as_nanos().max(1) as f64;
        *rate = CALIBRATION_ITERS as f64 / ns;
    }
    rates.sort_by(|x, y| x.total_cmp(y));
    let median = rates[CALIBRATION_TRIALS / 2];
    if median <= 0.0 {
        return Err(CalibrationError::ZeroRate);
    }
    // Interquartile spread: a couple of preempted trials must not condemn
    // an otherwise stable host.
    let (lo, hi) = (rates[CALIBRATION_TRIALS / 4], rates[3 * CALIBRATION_TRIALS / 4]);
    let spread = (hi - lo) / median;
    if spread > CALIBRATION_SPREAD_LIMIT {
        return Err(CalibrationError::Unstable {
            spread_pct: spread * 100.0,
            limit_pct: CALIBRATION_SPREAD_LIMIT * 100.0,
        });
    }
    // Take the fastest trial: undisturbed runs define the hardware rate.
    // Slower trials carry preemption and hypervisor steal, and sizing
    // delays from them would make clean executions finish short.
    let profile = EmulationProfile {
        inflation_factor: a,
        iters_per_ns: rates[CALIBRATION_TRIALS - 1],
    };
    self_check(&profile)?;
    Ok(profile)
}

fn self_check(profile: &EmulationProfile) -> Result<(), CalibrationError> {
    let low = (SELF_CHECK_NS as f64 * SELF_CHECK_LOW) as u64;
    let high = (SELF_CHECK_NS as f64 * SELF_CHECK_HIGH) as u64;
    let mut observed = 0;
    for _ in 0..SELF_CHECK_ATTEMPTS {
        let start = Instant::now();
        emulated_work(SELF_CHECK_NS, CoreClass::Big, profile);
        observed = start.elapsed().as_nanos() as u64;
        if (low..=high).contains(&observed) {
            return Ok(());
        }
    }
    Err(CalibrationError::SelfCheck {
        requested_ns: SELF_CHECK_NS,
        observed_ns: observed,
        low_ns: low,
        high_ns: high,
    })
}

// ---------------------------------------------------------------------------
// Settings: config file + environment
// ---------------------------------------------------------------------------

/// Process-wide tunables, merged from defaults, an optional key-value config
/// file and `ASL_*` environment variables (later sources win).
///
/// File format: one `key = value` pair per line, `#` starts a comment.
/// Recognized keys: `big_cores`, `little_cores` (core-id range lists),
/// `a` (inflation factor), `pct`, `min_unit_ns`, `max_window_ns`,
/// `threshold_ns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSettings {
    pub core_map: Option<CoreTypeMap>,
    pub inflation_factor: f64,
    pub pct: u8,
    pub min_unit_ns: u64,
    pub max_window_ns: u64,
    pub threshold_ns: u64,
}

impl Default for PlatformSettings {
    fn default() -> Self {
        PlatformSettings {
            core_map: None,
            inflation_factor: DEFAULT_INFLATION_FACTOR,
            pct: crate::runtime::DEFAULT_PCT,
            min_unit_ns: crate::runtime::DEFAULT_MIN_UNIT_NS,
            max_window_ns: crate::runtime::DEFAULT_MAX_WINDOW_NS,
            threshold_ns: crate::reorder::DEFAULT_THRESHOLD_NS,
        }
    }
}

impl PlatformSettings {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut s = PlatformSettings::default();
        s.apply_file(path)?;
        s.apply_env()?;
        Ok(s)
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        let mut s = PlatformSettings::default();
        s.apply_env()?;
        Ok(s)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut big: Option<String> = None;
        let mut little: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                input: format!("line {}: {raw}", lineno + 1),
                expected: "key = value",
            })?;
            self.apply_kv(key.trim(), value.trim(), &mut big, &mut little)?;
        }
        self.finish_core_map(big, little)
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        let mut big = std::env::var("ASL_BIG_CORES").ok();
        let mut little = std::env::var("ASL_LITTLE_CORES").ok();
        for (env, key) in [
            ("ASL_A", "a"),
            ("ASL_PCT", "pct"),
            ("ASL_MIN_UNIT_NS", "min_unit_ns"),
            ("ASL_MAX_WINDOW_NS", "max_window_ns"),
            ("ASL_THRESHOLD_NS", "threshold_ns"),
        ] {
            if let Ok(value) = std::env::var(env) {
                self.apply_kv(key, &value, &mut None, &mut None)?;
            }
        }
        // Core lists only make sense as a pair.
        if big.is_some() || little.is_some() {
            let b = big.take().unwrap_or_default();
            let l = little.take().unwrap_or_default();
            self.core_map = Some(CoreTypeMap::from_range_specs(&b, &l)?);
        }
        Ok(())
    }

    fn apply_kv(
        &mut self,
        key: &str,
        value: &str,
        big: &mut Option<String>,
        little: &mut Option<String>,
    ) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
            v.parse().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                reason: format!("cannot parse `{v}`"),
            })
        }
        match key {
            "big_cores" => *big = Some(value.to_string()),
            "little_cores" => *little = Some(value.to_string()),
            "a" => {
                let a: f64 = num(key, value)?;
                if a < 1.0 {
                    return Err(ConfigError::InvalidValue {
                        key: key.into(),
                        reason: "inflation factor must be >= 1".into(),
                    });
                }
                self.inflation_factor = a;
            }
            "pct" => {
                let pct: u8 = num(key, value)?;
                if !(1..=99).contains(&pct) {
                    return Err(ConfigError::InvalidValue {
                        key: key.into(),
                        reason: "percentile must be in 1..=99".into(),
                    });
                }
                self.pct = pct;
            }
            "min_unit_ns" => {
                self.min_unit_ns = num(key, value)?;
                if self.min_unit_ns == 0 {
                    return Err(ConfigError::InvalidValue {
                        key: key.into(),
                        reason: "must be positive".into(),
                    });
                }
            }
            "max_window_ns" => self.max_window_ns = num(key, value)?,
            "threshold_ns" => {
                self.threshold_ns = num(key, value)?;
                if self.threshold_ns == 0 {
                    return Err(ConfigError::InvalidValue {
                        key: key.into(),
                        reason: "must be positive".into(),
                    });
                }
            }
            other => {
                return Err(ConfigError::InvalidValue {
                    key: other.to_string(),
                    reason: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    fn finish_core_map(
        &mut self,
        big: Option<String>,
        little: Option<String>,
    ) -> Result<(), ConfigError> {
        if big.is_some() || little.is_some() {
            let b = big.unwrap_or_default();
            let l = little.unwrap_or_default();
            self.core_map = Some(CoreTypeMap::from_range_specs(&b, &l)?);
        }
        Ok(())
    }

    pub fn slo_config(&self) -> crate::runtime::SloConfig {
        crate::runtime::SloConfig::new()
            .pct(self.pct)
            .min_unit_ns(self.min_unit_ns)
            .max_window_ns(self.max_window_ns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn clock_is_monotonic() {
        let t1 = now_ns();
        let t2 = now_ns();
        assert!(t2 >= t1);
    }

    #[test]
    fn clock_tracks_sleep_coarsely() {
        let t1 = now_ns();
        std::thread::sleep(Duration::from_millis(1));
        let elapsed = now_ns() - t1;
        assert!((1_000_000..5_000_000).contains(&elapsed), "{elapsed}");
    }

    #[test]
    fn clock_call_is_cheap() {
        let _guard = crate::serial_test_guard();
        // Median over 1e6 calls must stay under 1us.
        let n = 1_000_000u32;
        let start = Instant::now();
        for _ in 0..n {
            black_box(now_ns());
        }
        let per_call = start.elapsed().as_nanos() / n as u128;
        assert!(per_call < 1_000, "now_ns costs {per_call}ns");
    }

    #[test]
    fn declaration_overrides_core_lookup() {
        let map = CoreTypeMap::all_big(available_cores());
        declare_thread_class(Some(CoreClass::Little));
        assert_eq!(classify_current_core(&map), CoreClass::Little);
        declare_thread_class(None);
        assert_eq!(classify_current_core(&map), CoreClass::Big);
    }

    #[test]
    fn core_map_lookup_and_ranges() {
        let map = CoreTypeMap::from_range_specs("0-3", "4-7").unwrap();
        assert_eq!(map.num_cores(), 8);
        assert_eq!(map.class_of(2), Some(CoreClass::Big));
        assert_eq!(map.class_of(5), Some(CoreClass::Little));
        assert_eq!(map.class_of(8), None);
        map.validate_covers(8).unwrap();
        assert!(map.validate_covers(9).is_err());
    }

    #[test]
    fn core_map_rejects_gaps_and_duplicates() {
        assert!(CoreTypeMap::new(&[0, 1], &[3]).is_err());
        assert!(CoreTypeMap::new(&[0, 1], &[1, 2]).is_err());
    }

    #[test]
    fn pin_to_core_zero_and_read_back() {
        match pin_thread(0) {
            Ok(PinOutcome::Pinned) => {
                assert_eq!(current_core_id(), Some(0));
            }
            Ok(PinOutcome::Unsupported) => {}
            Err(e) => panic!("pinning core 0 failed: {e}"),
        }
    }

    #[test]
    fn pin_to_nonexistent_core_errors() {
        if matches!(pin_thread(0), Ok(PinOutcome::Pinned)) {
            assert!(pin_thread(100_000).is_err());
            pin_thread(0).unwrap();
        }
    }

    #[test]
    fn calibration_passes_self_check() {
        let _guard = crate::serial_test_guard();
        let profile = calibrate_delay().expect("calibration");
        assert!(profile.iters_per_ns > 0.0);
        assert_eq!(profile.inflation_factor, DEFAULT_INFLATION_FACTOR);
    }

    #[test]
    fn calibration_is_repeatable() {
        let _guard = crate::serial_test_guard();
        let p1 = calibrate_delay().expect("first calibration");
        let p2 = calibrate_delay().expect("second calibration");
        let ratio = p1.iters_per_ns / p2.iters_per_ns;
        assert!(
            (0.75..=1.25).contains(&ratio),
            "calibrations diverge: {} vs {}",
            p1.iters_per_ns,
            p2.iters_per_ns
        );
    }

    #[test]
    fn zero_rate_profile_fails_self_check() {
        let profile = EmulationProfile {
            inflation_factor: 1.0,
            iters_per_ns: 0.0,
        };
        assert!(self_check(&profile).is_err());
    }

    #[test]
    fn emulated_work_scales_by_class() {
        let _guard = crate::serial_test_guard();
        let profile = calibrate_delay().expect("calibration");
        let time_one = |class| {
            let t = Instant::now();
            emulated_work(100_000, class, &profile);
            t.elapsed().as_nanos() as u64
        };
        // Interleave the classes and keep the fastest run of each: the
        // undisturbed executions carry the ratio, preempted ones do not.
        let mut big = u64::MAX;
        let mut little = u64::MAX;
        for _ in 0..9 {
            big = big.min(time_one(CoreClass::Big));
            little = little.min(time_one(CoreClass::Little));
        }
        let ratio = little as f64 / big as f64;
        let a = profile.inflation_factor;
        assert!(
            (ratio - a).abs() / a < 0.2,
            "little/big ratio {ratio:.2} vs factor {a}"
        );
    }

    #[test]
    fn symmetric_factor_means_equal_classes() {
        let profile = EmulationProfile::symmetric(1.0);
        assert_eq!(
            profile.iters_for(1_000, CoreClass::Big),
            profile.iters_for(1_000, CoreClass::Little)
        );
    }

    #[test]
    fn settings_from_file_and_defaults() {
        let dir = std::env::temp_dir().join(format!("asl-settings-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("asl.conf");
        std::fs::write(
            &path,
            "# topology\nbig_cores = 0-3\nlittle_cores = 4-7\na = 3.5\npct = 95\nmax_window_ns = 5000000\n",
        )
        .unwrap();
        let s = PlatformSettings::load(&path).unwrap();
        assert_eq!(s.inflation_factor, 3.5);
        assert_eq!(s.pct, 95);
        assert_eq!(s.max_window_ns, 5_000_000);
        assert_eq!(s.min_unit_ns, crate::runtime::DEFAULT_MIN_UNIT_NS);
        let map = s.core_map.unwrap();
        assert_eq!(map.class_of(6), Some(CoreClass::Little));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn settings_reject_bad_values() {
        let mut s = PlatformSettings::default();
        assert!(s.apply_kv("pct", "0", &mut None, &mut None).is_err());
        assert!(s.apply_kv("pct", "100", &mut None, &mut None).is_err());
        assert!(s.apply_kv("a", "0.5", &mut None, &mut None).is_err());
        assert!(s.apply_kv("nope", "1", &mut None, &mut None).is_err());
    }
}
