//! External interference sources as alternating idle/busy processes.
//!
//! A source is described by the distribution of its busy periods and of the
//! idle gaps between them. Presets cover a microwave oven (10 ms on, 10 ms
//! off), a frequency-hopping Bluetooth link and saturated or light Wi-Fi.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::PowerDbm;
use crate::rng::{draw_exponential, RngStream};
use crate::time::{Duration, TimePoint};

/// Quantile used as the effective maximum of an unbounded distribution.
pub const EFFECTIVE_MAX_QUANTILE: f64 = 0.999;

pub const DEFAULT_INTERFERENCE_DBM: f64 = -55.0;

/// Bluetooth hops over 79 1-MHz channels; four of them fall inside one
/// 2-MHz 802.15.4 channel.
pub const BLUETOOTH_HIT_PROBABILITY: f64 = 4.0 / 79.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    Periodic,
    Bluetooth,
    WifiBursty,
    Silent,
}

/// Length distribution of idle or busy periods, in microseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum DurationDist {
    Fixed { us: u64 },
    Uniform { lo: u64, hi: u64 },
    Exponential { mean: u64 },
}

impl DurationDist {
    pub fn sample(&self, rng: &mut RngStream) -> Duration {
        match *self {
            DurationDist::Fixed { us } => Duration::from_micros(us.max(1)),
            DurationDist::Uniform { lo, hi } => Duration::from_micros(rng.uniform_u64(lo, hi).max(1)),
            DurationDist::Exponential { mean } => {
                draw_exponential(rng, Duration::from_micros(mean.max(1)))
                    .expect("mean clamped to >= 1")
            }
        }
    }

    /// Upper bound, or the [`EFFECTIVE_MAX_QUANTILE`] quantile for the
    /// exponential.
    pub fn effective_max(&self) -> Duration {
        match *self {
            DurationDist::Fixed { us } => Duration::from_micros(us),
            DurationDist::Uniform { lo, hi } => Duration::from_micros(lo.max(hi)),
            DurationDist::Exponential { mean } => {
                let q = -(mean as f64) * (1.0 - EFFECTIVE_MAX_QUANTILE).ln();
                Duration::from_micros(q.ceil() as u64)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DurationDist::Fixed { us } => us as f64,
            DurationDist::Uniform { lo, hi } => (lo + hi) as f64 / 2.0,
            DurationDist::Exponential { mean } => mean as f64,
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        match *self {
            DurationDist::Fixed { us: 0 } => Err(Error::config(path, "fixed duration must be >= 1 us")),
            DurationDist::Uniform { lo, hi } if lo == 0 || hi < lo => {
                Err(Error::config(path, "uniform bounds need 1 <= lo <= hi"))
            }
            DurationDist::Exponential { mean: 0 } => Err(Error::config(path, "exponential mean must be >= 1 us")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSource {
    pub kind: SourceKind,
    pub busy: DurationDist,
    pub idle: DurationDist,
    /// Power seen at every node while the source is busy.
    pub rx_power: PowerDbm,
    /// Probability that a busy period lands on the monitored channel.
    pub hit_probability: f64,
}

impl InterferenceSource {
    pub fn silent() -> Self {
        preset_source(SourceKind::Silent, PowerDbm::new(DEFAULT_INTERFERENCE_DBM))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hit_probability) {
            return Err(Error::config("interference.hit_probability", "must lie in [0, 1]"));
        }
        if self.kind == SourceKind::Silent {
            return Ok(());
        }
        self.busy.validate("interference.busy")?;
        self.idle.validate("interference.idle")?;
        if self.kind == SourceKind::Periodic {
            let fixed = |d: &DurationDist| matches!(d, DurationDist::Fixed { .. });
            if !fixed(&self.busy) || !fixed(&self.idle) {
                return Err(Error::config(
                    "interference",
                    "periodic sources need fixed busy and idle durations",
                ));
            }
        }
        Ok(())
    }
}

/// Named presets addressable from scenario files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Preset {
    Oven,
    Bluetooth,
    WifiHeavy,
    WifiLight,
    Silent,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Oven,
        Preset::Bluetooth,
        Preset::WifiHeavy,
        Preset::WifiLight,
        Preset::Silent,
    ];

    /// The presets that actually emit.
    pub const INTERFERING: [Preset; 4] = [
        Preset::Oven,
        Preset::Bluetooth,
        Preset::WifiHeavy,
        Preset::WifiLight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Oven => "oven",
            Preset::Bluetooth => "bluetooth",
            Preset::WifiHeavy => "wifi-heavy",
            Preset::WifiLight => "wifi-light",
            Preset::Silent => "silent",
        }
    }

    pub fn source(self, rx_power: PowerDbm) -> InterferenceSource {
        match self {
            Preset::Oven => preset_source(SourceKind::Periodic, rx_power),
            Preset::Bluetooth => preset_source(SourceKind::Bluetooth, rx_power),
            Preset::WifiHeavy => preset_source(SourceKind::WifiBursty, rx_power),
            Preset::WifiLight => InterferenceSource {
                idle: DurationDist::Exponential { mean: 5000 },
                ..preset_source(SourceKind::WifiBursty, rx_power)
            },
            Preset::Silent => preset_source(SourceKind::Silent, rx_power),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl TryFrom<String> for Preset {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Preset> for String {
    fn from(p: Preset) -> String {
        p.name().to_string()
    }
}

pub fn preset_source(kind: SourceKind, rx_power: PowerDbm) -> InterferenceSource {
    let (busy, idle, hit_probability) = match kind {
        SourceKind::Periodic => (
            DurationDist::Fixed { us: 10_000 },
            DurationDist::Fixed { us: 10_000 },
            1.0,
        ),
        SourceKind::Bluetooth => (
            DurationDist::Fixed { us: 625 },
            DurationDist::Exponential { mean: 1875 },
            BLUETOOTH_HIT_PROBABILITY,
        ),
        // Saturated file transfer: frames of 200..1500 us separated by short
        // inter-frame gaps.
        SourceKind::WifiBursty => (
            DurationDist::Uniform { lo: 200, hi: 1500 },
            DurationDist::Exponential { mean: 500 },
            1.0,
        ),
        SourceKind::Silent => (DurationDist::Fixed { us: 0 }, DurationDist::Fixed { us: 0 }, 0.0),
    };
    InterferenceSource {
        kind,
        busy,
        idle,
        rx_power,
        hit_probability,
    }
}

/// One busy period of a realised trace, `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BusyInterval {
    pub start: TimePoint,
    pub end: TimePoint,
    pub power: PowerDbm,
}

impl BusyInterval {
    pub fn len(&self) -> Duration {
        self.end.since(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, start: TimePoint, end: TimePoint) -> bool {
        self.start < end && start < self.end
    }
}

/// A realised interference signal: sorted, disjoint busy intervals within
/// `[0, horizon)`. Gaps are idle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActivityTrace {
    pub intervals: Vec<BusyInterval>,
    pub horizon: Duration,
}

impl ActivityTrace {
    pub fn empty(horizon: Duration) -> Self {
        ActivityTrace {
            intervals: Vec::new(),
            horizon,
        }
    }

    pub fn end(&self) -> TimePoint {
        TimePoint::ZERO + self.horizon
    }

    /// Idle gaps strictly between consecutive busy intervals.
    pub fn idle_gaps(&self) -> impl Iterator<Item = Duration> + '_ {
        self.intervals.windows(2).map(|w| w[1].start.since(w[0].end))
    }
}

pub fn generate_trace(
    source: &InterferenceSource,
    horizon: Duration,
    rng: &mut RngStream,
) -> Result<ActivityTrace> {
    if horizon.is_zero() {
        return Err(Error::NonPositiveDuration { field: "horizon" });
    }
    source.validate()?;
    let intervals = match source.kind {
        SourceKind::Silent => Vec::new(),
        SourceKind::Periodic => periodic_intervals(source, horizon, rng),
        SourceKind::Bluetooth | SourceKind::WifiBursty => alternating_intervals(source, horizon, rng),
    };
    Ok(ActivityTrace { intervals, horizon })
}

fn periodic_intervals(
    source: &InterferenceSource,
    horizon: Duration,
    rng: &mut RngStream,
) -> Vec<BusyInterval> {
    let busy = source.busy.effective_max().as_micros() as i64;
    let idle = source.idle.effective_max().as_micros() as i64;
    let cycle = busy + idle;
    let h = horizon.as_micros() as i64;
    // The pattern (idle, busy) repeats from -phase.
    let phase = rng.uniform_u64(0, cycle as u64 - 1) as i64;
    let mut out = Vec::new();
    let mut start = idle - phase;
    while start < h {
        let (s, e) = (start.max(0), (start + busy).min(h));
        if e > s {
            out.push(BusyInterval {
                start: TimePoint::from_micros(s as u64),
                end: TimePoint::from_micros(e as u64),
                power: source.rx_power,
            });
        }
        start += cycle;
    }
    out
}

fn alternating_intervals(
    source: &InterferenceSource,
    horizon: Duration,
    rng: &mut RngStream,
) -> Vec<BusyInterval> {
    let end = TimePoint::ZERO + horizon;
    let mut out = Vec::new();
    let mut t = TimePoint::ZERO;
    loop {
        t += source.idle.sample(rng);
        if t >= end {
            break;
        }
        let busy = source.busy.sample(rng);
        let hit = rng.bernoulli(source.hit_probability);
        let stop = (t + busy).min(end);
        if hit {
            out.push(BusyInterval {
                start: t,
                end: stop,
                power: source.rx_power,
            });
        }
        t += busy;
    }
    out
}

/// Longest busy period the source can produce (0 for a silent source).
pub fn max_busy(source: &InterferenceSource) -> Duration {
    match source.kind {
        SourceKind::Silent => Duration::ZERO,
        _ => source.busy.effective_max(),
    }
}

/// Longest idle period, using the 99.9th percentile for exponential idles.
/// A silent source is idle forever and reports [`Duration::MAX`].
pub fn max_idle(source: &InterferenceSource) -> Duration {
    match source.kind {
        SourceKind::Silent => Duration::MAX,
        _ => source.idle.effective_max(),
    }
}
