//! Received signal composition and the jamming detectors.
//!
//! The RSSI register reports the strongest co-channel signal, so a reading
//! is the maximum of a noise-floor draw and every emission on the air at
//! that instant, each perturbed by a small uniform jitter. A jam is declared
//! present only if no sample in the window drops to the floor (or, with a
//! reference level, below `r_s - delta_r`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::{ActivityTrace, BusyInterval};
use crate::power::PowerDbm;
use crate::rng::RngStream;
use crate::time::{Duration, TimePoint};
use crate::timing::TimingModel;

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmissionTag {
    Packet(u32),
    Jam(NodeId),
    Interference,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Emission {
    pub start: TimePoint,
    pub end: TimePoint,
    pub power: PowerDbm,
    pub tag: EmissionTag,
}

impl Emission {
    fn covers(&self, t: TimePoint) -> bool {
        self.start <= t && t < self.end
    }

    fn overlaps(&self, start: TimePoint, end: TimePoint) -> bool {
        self.start < end && start < self.end
    }
}

/// Receiver-side radio parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub noise_floor_low: f64,
    pub noise_floor_high: f64,
    /// Half-width of the uniform jitter applied to every emission reading.
    pub jitter_db: f64,
    /// A packet survives an overlapping signal that is at least this many
    /// dB weaker.
    pub capture_margin_db: f64,
    pub sensitivity_dbm: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            noise_floor_low: -100.0,
            noise_floor_high: -94.0,
            jitter_db: 2.0,
            capture_margin_db: 3.0,
            sensitivity_dbm: -94.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.noise_floor_low > self.noise_floor_high {
            return Err(Error::config("channel.noise_floor_low", "must not exceed noise_floor_high"));
        }
        if self.jitter_db < 0.0 || !self.jitter_db.is_finite() {
            return Err(Error::config("channel.jitter_db", "must be finite and >= 0"));
        }
        if self.capture_margin_db < 0.0 {
            return Err(Error::config("channel.capture_margin_db", "must be >= 0"));
        }
        Ok(())
    }
}

/// Everything on the air during one trial, as seen by any node.
///
/// Interference powers are identical at every node, and every link in a
/// trial shares one received power, so a single timeline serves all
/// receivers.
#[derive(Clone, Debug)]
pub struct SignalTimeline {
    interference: Vec<BusyInterval>,
    emissions: Vec<Emission>,
    noise_floor: (PowerDbm, PowerDbm),
    jitter_db: f64,
    horizon: TimePoint,
}

impl SignalTimeline {
    pub fn new(trace: &ActivityTrace, params: &ChannelParams) -> Self {
        SignalTimeline {
            interference: trace.intervals.clone(),
            emissions: Vec::new(),
            noise_floor: (
                PowerDbm::new(params.noise_floor_low),
                PowerDbm::new(params.noise_floor_high),
            ),
            jitter_db: params.jitter_db,
            horizon: trace.end(),
        }
    }

    pub fn horizon(&self) -> TimePoint {
        self.horizon
    }

    pub fn noise_floor_range(&self) -> (PowerDbm, PowerDbm) {
        self.noise_floor
    }

    pub fn jitter_db(&self) -> f64 {
        self.jitter_db
    }

    pub fn emissions(&self) -> &[Emission] {
        &self.emissions
    }

    pub fn push(&mut self, emission: Emission) {
        self.emissions.push(emission);
    }

    /// The busy interference interval covering `t`, if any. Intervals are
    /// disjoint so at most one can.
    fn interference_at(&self, t: TimePoint) -> Option<&BusyInterval> {
        let idx = self.interference.partition_point(|iv| iv.start <= t);
        idx.checked_sub(1)
            .map(|i| &self.interference[i])
            .filter(|iv| t < iv.end)
    }

    /// Every signal overlapping `[start, end)` except the emission tagged
    /// `exclude`, as (power, tag).
    fn overlapping(
        &self,
        start: TimePoint,
        end: TimePoint,
        exclude: Option<EmissionTag>,
    ) -> impl Iterator<Item = (PowerDbm, EmissionTag)> + '_ {
        let first = self.interference.partition_point(|iv| iv.end <= start);
        let interference = self.interference[first..]
            .iter()
            .take_while(move |iv| iv.start < end)
            .map(|iv| (iv.power, EmissionTag::Interference));
        let own = self
            .emissions
            .iter()
            .filter(move |e| e.overlaps(start, end) && Some(e.tag) != exclude)
            .map(|e| (e.power, e.tag));
        interference.chain(own)
    }

    fn jitter(&self, rng: &mut RngStream) -> f64 {
        if self.jitter_db == 0.0 {
            0.0
        } else {
            rng.uniform_f64(-self.jitter_db, self.jitter_db)
        }
    }
}

/// One RSSI reading at `t`: the max of a noise-floor draw and every jittered
/// emission on the air.
pub fn rssi_at(timeline: &SignalTimeline, t: TimePoint, rng: &mut RngStream) -> PowerDbm {
    let (lo, hi) = timeline.noise_floor;
    let mut level = PowerDbm::new(rng.uniform_f64(lo.dbm(), hi.dbm()));
    if let Some(iv) = timeline.interference_at(t) {
        level = level.max(iv.power + timeline.jitter(rng));
    }
    for e in timeline.emissions.iter().filter(|e| e.covers(t)) {
        level = level.max(e.power + timeline.jitter(rng));
    }
    level
}

#[derive(Clone, Debug, PartialEq)]
pub struct RssiSampleRun {
    pub samples: Vec<(TimePoint, PowerDbm)>,
    pub window: (TimePoint, TimePoint),
}

impl RssiSampleRun {
    pub fn values(&self) -> impl Iterator<Item = PowerDbm> + '_ {
        self.samples.iter().map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Fast RSSI sampling over `[start, start + t_samp)`, one reading per
/// sample period starting at `start`.
///
/// Panics if `t_samp` is shorter than one sample period; protocol configs
/// are validated against that before a trial runs.
pub fn sample_window(
    timeline: &SignalTimeline,
    start: TimePoint,
    t_samp: Duration,
    timing: &TimingModel,
    rng: &mut RngStream,
) -> RssiSampleRun {
    let period = timing.rssi_sample_period;
    assert!(t_samp >= period, "sampling window shorter than one RSSI sample");
    let count = timing.samples_in(t_samp);
    let samples = (0..count)
        .map(|i| {
            let t = start + period * i;
            (t, rssi_at(timeline, t, rng))
        })
        .collect();
    RssiSampleRun {
        samples,
        window: (start, start + t_samp),
    }
}

/// A packet on the air as seen by its intended receiver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketTx {
    pub id: u32,
    pub start: TimePoint,
    pub airtime: Duration,
    pub rx_power: PowerDbm,
}

impl PacketTx {
    pub fn end(&self) -> TimePoint {
        self.start + self.airtime
    }

    pub fn emission(&self) -> Emission {
        Emission {
            start: self.start,
            end: self.end(),
            power: self.rx_power,
            tag: EmissionTag::Packet(self.id),
        }
    }
}

/// Whether `pkt` is decoded. Lost if any other signal overlapping it is
/// within `capture_margin_db` of the packet's power (partial overlap is
/// fatal), if an ambient Bernoulli(`base_loss`) loss fires, or if the packet
/// is below `sensitivity`.
///
/// Exactly one uniform draw is consumed per call.
pub fn packet_received(
    timeline: &SignalTimeline,
    pkt: &PacketTx,
    capture_margin_db: f64,
    sensitivity: PowerDbm,
    base_loss: f64,
    rng: &mut RngStream,
) -> bool {
    let ambient_loss = rng.bernoulli(base_loss);
    if ambient_loss || pkt.rx_power < sensitivity {
        return false;
    }
    let limit = pkt.rx_power - capture_margin_db;
    !timeline
        .overlapping(pkt.start, pkt.end(), Some(EmissionTag::Packet(pkt.id)))
        .any(|(power, _)| power > limit)
}

fn non_empty(run: &RssiSampleRun) -> Result<()> {
    if run.is_empty() {
        Err(Error::InvalidArgument("jam detection on an empty sample run".into()))
    } else {
        Ok(())
    }
}

/// Jam present iff every sample is strictly above the noise floor.
pub fn detect_jam_floor(run: &RssiSampleRun, r_noise: PowerDbm) -> Result<bool> {
    non_empty(run)?;
    Ok(run.values().all(|x| x > r_noise))
}

/// Jam present iff no sample falls below `r_s - delta_r`. When that
/// threshold does not clear the noise floor the floor detector is used
/// unchanged.
pub fn detect_jam_ref(
    run: &RssiSampleRun,
    r_s: PowerDbm,
    delta_r: f64,
    r_noise: PowerDbm,
) -> Result<bool> {
    non_empty(run)?;
    let threshold = r_s - delta_r;
    if threshold <= r_noise {
        return detect_jam_floor(run, r_noise);
    }
    Ok(run.values().all(|x| x >= threshold))
}

/// Whether a CCA window `[at - cca, at)` sees no signal above `threshold`.
pub fn cca_clear(timeline: &SignalTimeline, at: TimePoint, threshold: PowerDbm, timing: &TimingModel) -> bool {
    let start = at.saturating_back(timing.cca_check_duration);
    !timeline
        .overlapping(start, at, None)
        .any(|(power, _)| power > threshold)
}

/// Earliest instant `t >= from + cca` whose preceding CCA window is clear.
pub fn first_cca_idle(
    timeline: &SignalTimeline,
    from: TimePoint,
    threshold: PowerDbm,
    timing: &TimingModel,
) -> Result<TimePoint> {
    let cca = timing.cca_check_duration;
    let mut window_start = from;
    loop {
        let window_end = window_start + cca;
        if window_end > timeline.horizon {
            return Err(Error::HorizonExhausted {
                from,
                horizon: timeline.horizon,
            });
        }
        let blocker = timeline
            .interference
            .iter()
            .filter(|iv| iv.power > threshold && iv.overlaps(window_start, window_end))
            .map(|iv| iv.end)
            .chain(
                timeline
                    .emissions
                    .iter()
                    .filter(|e| e.power > threshold && e.overlaps(window_start, window_end))
                    .map(|e| e.end),
            )
            .max();
        match blocker {
            None => return Ok(window_end),
            Some(end) => window_start = end,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::{generate_trace, Preset};
    use crate::rng::StreamId;

    fn us(t: u64) -> TimePoint {
        TimePoint::from_micros(t)
    }

    fn rng() -> RngStream {
        RngStream::new(5, StreamId::label("channel-test"))
    }

    fn trace(intervals: &[(u64, u64, f64)], horizon: u64) -> ActivityTrace {
        ActivityTrace {
            intervals: intervals
                .iter()
                .map(|&(s, e, p)| BusyInterval {
                    start: us(s),
                    end: us(e),
                    power: PowerDbm::new(p),
                })
                .collect(),
            horizon: Duration::from_micros(horizon),
        }
    }

    fn jam(start: u64, end: u64, p: f64) -> Emission {
        Emission {
            start: us(start),
            end: us(end),
            power: PowerDbm::new(p),
            tag: EmissionTag::Jam(1),
        }
    }

    fn run_of(values: &[f64]) -> RssiSampleRun {
        RssiSampleRun {
            samples: values
                .iter()
                .enumerate()
                .map(|(i, &v)| (us(i as u64 * 20), PowerDbm::new(v)))
                .collect(),
            window: (us(0), us(values.len() as u64 * 20)),
        }
    }

    #[test]
    fn idle_channel_reads_noise_floor() {
        let tl = SignalTimeline::new(&trace(&[], 10_000), &ChannelParams::default());
        let mut r = rng();
        for t in 0..1000 {
            let v = rssi_at(&tl, us(t), &mut r).dbm();
            assert!((-100.0..=-94.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn strongest_signal_wins() {
        let mut tl = SignalTimeline::new(&trace(&[(0, 1000, -55.0)], 10_000), &ChannelParams::default());
        tl.push(jam(0, 1000, -70.0));
        let mut r = rng();
        for t in 0..1000 {
            let v = rssi_at(&tl, us(t), &mut r).dbm();
            assert!((-57.0..=-53.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn weak_emission_above_noise_is_visible() {
        // Emission at -90 always beats a floor draw of at most -94 even with
        // -2 dB jitter.
        let mut tl = SignalTimeline::new(&trace(&[], 10_000), &ChannelParams::default());
        tl.push(jam(0, 1000, -90.0));
        let mut r = rng();
        for t in 0..1000 {
            let v = rssi_at(&tl, us(t), &mut r).dbm();
            assert!((-92.0..=-88.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn sample_counts() {
        let tl = SignalTimeline::new(&trace(&[], 100_000), &ChannelParams::default());
        let timing = TimingModel::default();
        let mut r = rng();
        assert_eq!(sample_window(&tl, us(0), Duration::from_micros(2000), &timing, &mut r).len(), 100);
        assert_eq!(sample_window(&tl, us(0), Duration::from_micros(20), &timing, &mut r).len(), 1);
        let slot = sample_window(&tl, us(0), Duration::from_micros(1000), &timing, &mut r).len() as i64;
        assert!((slot - 49).abs() <= 1, "{slot}");
        let run = sample_window(&tl, us(100), Duration::from_micros(200), &timing, &mut r);
        for w in run.samples.windows(2) {
            assert_eq!(w[1].0.since(w[0].0), timing.rssi_sample_period);
        }
        assert!(run.samples.iter().all(|&(t, _)| run.window.0 <= t && t < run.window.1));
    }

    #[test]
    fn clean_packet_is_received() {
        let tl = SignalTimeline::new(&trace(&[], 100_000), &ChannelParams::default());
        let pkt = PacketTx { id: 0, start: us(100), airtime: Duration::from_micros(704), rx_power: PowerDbm::new(-80.0) };
        assert!(packet_received(&tl, &pkt, 3.0, PowerDbm::new(-94.0), 0.0, &mut rng()));
    }

    #[test]
    fn dominating_interferer_destroys_packet() {
        let tl = SignalTimeline::new(&trace(&[(0, 10_000, -55.0)], 100_000), &ChannelParams::default());
        let pkt = PacketTx { id: 0, start: us(100), airtime: Duration::from_micros(704), rx_power: PowerDbm::new(-80.0) };
        assert!(!packet_received(&tl, &pkt, 3.0, PowerDbm::new(-94.0), 0.0, &mut rng()));
        // Partial overlap at the tail is also fatal.
        let tl = SignalTimeline::new(&trace(&[(800, 900, -55.0)], 100_000), &ChannelParams::default());
        assert!(!packet_received(&tl, &pkt, 3.0, PowerDbm::new(-94.0), 0.0, &mut rng()));
    }

    #[test]
    fn weak_interferer_is_captured_over() {
        let tl = SignalTimeline::new(&trace(&[(0, 10_000, -85.0)], 100_000), &ChannelParams::default());
        let pkt = PacketTx { id: 0, start: us(100), airtime: Duration::from_micros(704), rx_power: PowerDbm::new(-60.0) };
        assert!(packet_received(&tl, &pkt, 3.0, PowerDbm::new(-94.0), 0.0, &mut rng()));
        // -62 is inside the 3 dB margin of -60.
        let tl = SignalTimeline::new(&trace(&[(0, 10_000, -62.0)], 100_000), &ChannelParams::default());
        assert!(!packet_received(&tl, &pkt, 3.0, PowerDbm::new(-94.0), 0.0, &mut rng()));
    }

    #[test]
    fn ambient_loss_and_sensitivity() {
        let tl = SignalTimeline::new(&trace(&[], 100_000), &ChannelParams::default());
        let mut pkt = PacketTx { id: 0, start: us(0), airtime: Duration::from_micros(704), rx_power: PowerDbm::new(-80.0) };
        assert!(!packet_received(&tl, &pkt, 3.0, PowerDbm::new(-94.0), 1.0, &mut rng()));
        pkt.rx_power = PowerDbm::new(-95.0);
        assert!(!packet_received(&tl, &pkt, 3.0, PowerDbm::new(-94.0), 0.0, &mut rng()));
        let mut r = rng();
        let n = 100_000;
        pkt.rx_power = PowerDbm::new(-80.0);
        let got = (0..n).filter(|_| packet_received(&tl, &pkt, 3.0, PowerDbm::new(-94.0), 0.1, &mut r)).count();
        let frac = got as f64 / n as f64;
        assert!((frac - 0.9).abs() < 4.0 * (0.09f64 / n as f64).sqrt(), "{frac}");
    }

    #[test]
    fn floor_detector_rules() {
        let floor = PowerDbm::new(-94.0);
        assert!(detect_jam_floor(&run_of(&[-60.0; 10]), floor).unwrap());
        assert!(!detect_jam_floor(&run_of(&[-60.0, -94.0, -60.0]), floor).unwrap());
        assert!(!detect_jam_floor(&run_of(&[-94.0, -60.0, -94.0, -60.0]), floor).unwrap());
        assert!(detect_jam_floor(&run_of(&[]), floor).is_err());
    }

    #[test]
    fn reference_detector_rules() {
        let floor = PowerDbm::new(-94.0);
        let rs = PowerDbm::new(-70.0);
        assert!(!detect_jam_ref(&run_of(&[-70.0, -80.0, -70.0]), rs, 7.0, floor).unwrap());
        assert!(detect_jam_ref(&run_of(&[-70.0, -77.0, -72.0]), rs, 7.0, floor).unwrap());
        assert!(detect_jam_ref(&run_of(&[]), rs, 7.0, floor).is_err());
        // Threshold below the floor falls back to the floor rule exactly.
        let weak = PowerDbm::new(-99.0);
        for run in [run_of(&[-94.0, -60.0]), run_of(&[-93.9, -60.0]), run_of(&[-96.0])] {
            assert_eq!(
                detect_jam_ref(&run, weak, 7.0, floor).unwrap(),
                detect_jam_floor(&run, floor).unwrap()
            );
        }
    }

    #[test]
    fn cca_on_silent_channel_is_immediate() {
        let tl = SignalTimeline::new(&trace(&[], 100_000), &ChannelParams::default());
        let timing = TimingModel::default();
        let t = first_cca_idle(&tl, us(500), PowerDbm::new(-77.0), &timing).unwrap();
        assert_eq!(t, us(500) + timing.cca_check_duration);
        assert!(cca_clear(&tl, t, PowerDbm::new(-77.0), &timing));
    }

    #[test]
    fn cca_waits_out_oven_busy_period() {
        let timing = TimingModel::default();
        let src = Preset::Oven.source(PowerDbm::new(-55.0));
        let mut r = rng();
        for _ in 0..50 {
            let tr = generate_trace(&src, Duration::from_micros(100_000), &mut r).unwrap();
            let tl = SignalTimeline::new(&tr, &ChannelParams::default());
            // Query from the middle of some full busy period.
            let busy = tr.intervals.iter().find(|iv| iv.len() == Duration::from_micros(10_000)).unwrap();
            let from = busy.start + Duration::from_micros(3_000);
            let t = first_cca_idle(&tl, from, PowerDbm::new(-77.0), &timing).unwrap();
            assert_eq!(t, busy.end + timing.cca_check_duration);
            assert!(!cca_clear(&tl, from + Duration::from_micros(1), PowerDbm::new(-77.0), &timing));
        }
    }

    #[test]
    fn cca_exhausts_under_continuous_interference() {
        let tl = SignalTimeline::new(&trace(&[(0, 50_000, -55.0)], 50_000), &ChannelParams::default());
        let err = first_cca_idle(&tl, us(10), PowerDbm::new(-77.0), &TimingModel::default()).unwrap_err();
        assert!(matches!(err, Error::HorizonExhausted { .. }));
    }

    #[test]
    fn weak_interference_does_not_block_cca() {
        let tl = SignalTimeline::new(&trace(&[(0, 50_000, -90.0)], 100_000), &ChannelParams::default());
        let timing = TimingModel::default();
        assert_eq!(
            first_cca_idle(&tl, us(10), PowerDbm::new(-77.0), &timing).unwrap(),
            us(10) + timing.cca_check_duration
        );
    }
}
