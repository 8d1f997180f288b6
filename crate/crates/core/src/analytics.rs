//! Closed-form outcome probabilities for the abstract channel, where every
//! message independently gets through with probability `p`, and the
//! packet-success formulas for periodic and exponentially idle sources.
//! These serve as oracles for the full-channel simulation.

use crate::error::{Error, Result};
use crate::interference::{max_busy, max_idle, InterferenceSource};
use crate::protocols::Outcome;
use crate::rng::RngStream;
use crate::time::Duration;
use crate::timing::TimingModel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeProbs {
    pub pa: f64,
    pub na: f64,
    pub da: f64,
}

impl OutcomeProbs {
    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::PositiveAgreement => self.pa,
            Outcome::NegativeAgreement => self.na,
            Outcome::Disagreement => self.da,
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")))
    }
}

fn check_handshake_len(n: u32) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidArgument(format!("handshake needs at least 2 messages, got {n}")))
    } else {
        Ok(())
    }
}

/// Outcome probabilities of an n-message handshake with per-message
/// success `p`. Disagreement happens exactly when only the last message is
/// lost; losing any earlier one leaves both sides failing.
pub fn handshake_outcome_probs(p: f64, n: u32) -> Result<OutcomeProbs> {
    check_probability(p)?;
    check_handshake_len(n)?;
    let all_but_last = p.powi(n as i32 - 1);
    Ok(OutcomeProbs {
        pa: all_but_last * p,
        na: 1.0 - all_but_last,
        da: all_but_last * (1.0 - p),
    })
}

/// PA of V followed by a train of `trains` ACKs, each independently
/// delivered with probability `p`.
pub fn ack_train_pa(p: f64, trains: u32) -> Result<f64> {
    check_probability(p)?;
    Ok(p * (1.0 - (1.0 - p).powi(trains as i32)))
}

/// Probability that a packet of length `t_pkt`, started at a uniformly
/// random instant of an idle period of length `t_off`, completes before the
/// idle period ends.
pub fn packet_success_periodic(t_off: Duration, t_pkt: Duration) -> Result<f64> {
    if t_off.is_zero() {
        return Err(Error::NonPositiveDuration { field: "t_off" });
    }
    Ok(t_off.saturating_sub(t_pkt).as_micros() as f64 / t_off.as_micros() as f64)
}

/// Probability that an exponentially distributed idle period outlasts a
/// packet of length `t_pkt`.
pub fn packet_success_exponential(mean_idle: Duration, t_pkt: Duration) -> Result<f64> {
    if mean_idle.is_zero() {
        return Err(Error::NonPositiveDuration { field: "mean_idle" });
    }
    Ok((-(t_pkt.as_micros() as f64) / mean_idle.as_micros() as f64).exp())
}

/// One n-way handshake over the abstract channel: messages go out in order
/// until the first loss.
pub fn abstract_channel_trial(p: f64, n: u32, rng: &mut RngStream) -> Result<Outcome> {
    check_probability(p)?;
    check_handshake_len(n)?;
    let delivered = (0..n).take_while(|_| rng.bernoulli(p)).count() as u32;
    Ok(if delivered == n {
        Outcome::PositiveAgreement
    } else if delivered == n - 1 {
        Outcome::Disagreement
    } else {
        Outcome::NegativeAgreement
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CalibrationBounds {
    /// Shortest jam that outlasts every interference burst by a sample.
    pub min_t_jam: Duration,
    /// Longest message that still fits in the longest idle period.
    pub max_t_msg: Duration,
}

/// Jam and message length limits for a source. Unbounded distributions use
/// their 99.9th percentile as the maximum.
pub fn calibration_bounds(source: &InterferenceSource, timing: &TimingModel) -> CalibrationBounds {
    CalibrationBounds {
        min_t_jam: max_busy(source) + timing.rssi_sample_period,
        max_t_msg: max_idle(source).saturating_sub(Duration::from_micros(1)),
    }
}

/// One grid point of the analytic surfaces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub p: f64,
    pub n: u32,
    pub probs: OutcomeProbs,
}

/// PA/NA/DA over `p = 0, 1/steps, ..., 1` and every `n` in `ns`.
pub fn outcome_surfaces(steps: u32, ns: std::ops::RangeInclusive<u32>) -> Result<Vec<SurfacePoint>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("surface grid needs at least one step".into()));
    }
    let mut out = Vec::new();
    for n in ns {
        for i in 0..=steps {
            let p = i as f64 / steps as f64;
            out.push(SurfacePoint {
                p,
                n,
                probs: handshake_outcome_probs(p, n)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::Preset;
    use crate::power::PowerDbm;
    use crate::rng::StreamId;
    use proptest::prelude::*;

    const US: fn(u64) -> Duration = Duration::from_micros;

    /// Enumerates which message is lost first.
    fn enumerate(p: f64, n: u32) -> OutcomeProbs {
        let mut probs = OutcomeProbs { pa: 0.0, na: 0.0, da: 0.0 };
        for first_lost in 1..=n {
            let case = p.powi(first_lost as i32 - 1) * (1.0 - p);
            if first_lost == n {
                probs.da += case;
            } else {
                probs.na += case;
            }
        }
        probs.pa = p.powi(n as i32);
        probs
    }

    #[test]
    fn lossless_and_dead_channels() {
        for n in 2..=8 {
            let ok = handshake_outcome_probs(1.0, n).unwrap();
            assert_eq!((ok.pa, ok.na, ok.da), (1.0, 0.0, 0.0));
            let dead = handshake_outcome_probs(0.0, n).unwrap();
            assert_eq!((dead.pa, dead.na, dead.da), (0.0, 1.0, 0.0));
        }
    }

    #[test]
    fn three_way_at_ninety_percent() {
        let got = handshake_outcome_probs(0.9, 3).unwrap();
        let oracle = enumerate(0.9, 3);
        for (a, b, want) in [(got.pa, oracle.pa, 0.729), (got.na, oracle.na, 0.19), (got.da, oracle.da, 0.081)] {
            assert!((a - want).abs() < 1e-12);
            assert!((b - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_short_handshakes_and_bad_p() {
        assert!(handshake_outcome_probs(0.5, 1).is_err());
        assert!(handshake_outcome_probs(1.2, 3).is_err());
        let mut rng = RngStream::new(0, StreamId::label("x"));
        assert!(abstract_channel_trial(0.5, 1, &mut rng).is_err());
    }

    #[test]
    fn periodic_success() {
        assert!((packet_success_periodic(US(10_000), US(4300)).unwrap() - 0.57).abs() < 1e-12);
        assert_eq!(packet_success_periodic(US(10_000), US(10_000)).unwrap(), 0.0);
        assert_eq!(packet_success_periodic(US(10_000), US(20_000)).unwrap(), 0.0);
        assert_eq!(packet_success_periodic(US(10_000), US(0)).unwrap(), 1.0);
        assert!(packet_success_periodic(US(0), US(1)).is_err());
    }

    #[test]
    fn exponential_success() {
        let p = packet_success_exponential(US(2000), US(782)).unwrap();
        assert!((p - (-0.391f64).exp()).abs() < 1e-12);
        assert!((p - 0.6764).abs() < 1e-4);
        assert_eq!(packet_success_exponential(US(2000), US(0)).unwrap(), 1.0);
        assert!(packet_success_exponential(US(2000), US(10_000_000)).unwrap() < 1e-300);
    }

    #[test]
    fn exponential_success_matches_residual_idle_sampling() {
        // Memorylessness: the idle time left at a random instant is again
        // exponential, so count draws that outlast the packet.
        let mut rng = RngStream::new(11, StreamId::label("residual"));
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| crate::rng::draw_exponential(&mut rng, US(2000)).unwrap() > US(782))
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.6764).abs() < 0.005, "{freq}");
    }

    fn frequencies(p: f64, n: u32, trials: u32, seed: u64) -> OutcomeProbs {
        let mut rng = RngStream::new(seed, StreamId::label("abstract"));
        let mut counts = [0u32; 3];
        for _ in 0..trials {
            counts[abstract_channel_trial(p, n, &mut rng).unwrap() as usize] += 1;
        }
        let f = |c: u32| c as f64 / trials as f64;
        OutcomeProbs {
            pa: f(counts[0]),
            na: f(counts[1]),
            da: f(counts[2]),
        }
    }

    #[test]
    fn abstract_trial_is_positive_on_lossless_channel() {
        let mut rng = RngStream::new(1, StreamId::label("abstract"));
        for n in 2..=8 {
            assert_eq!(abstract_channel_trial(1.0, n, &mut rng).unwrap(), Outcome::PositiveAgreement);
        }
    }

    #[test]
    fn abstract_trial_converges() {
        let f = frequencies(0.9, 3, 1_000_000, 5);
        assert!((f.pa - 0.729).abs() < 0.002, "{f:?}");
        assert!((f.na - 0.19).abs() < 0.002, "{f:?}");
        assert!((f.da - 0.081).abs() < 0.002, "{f:?}");
        let f = frequencies(0.5, 2, 1_000_000, 6);
        assert!((f.da - 0.25).abs() < 0.002, "{f:?}");
    }

    #[test]
    fn ack_train_formula_matches_enumeration() {
        for t in 1..=4u32 {
            for i in 0..=10 {
                let p = i as f64 / 10.0;
                // V plus T ACK fates, each delivered or lost.
                let mut pa = 0.0;
                for mask in 0u32..(1 << (t + 1)) {
                    let weight: f64 = (0..=t).map(|b| if mask >> b & 1 == 1 { p } else { 1.0 - p }).product();
                    let v_ok = mask & 1 == 1;
                    let any_ack = mask >> 1 != 0;
                    if v_ok && any_ack {
                        pa += weight;
                    }
                }
                assert!((ack_train_pa(p, t).unwrap() - pa).abs() < 1e-12, "p={p} T={t}");
            }
        }
    }

    #[test]
    fn calibration_examples() {
        let timing = TimingModel::default();
        let at = |preset: Preset| calibration_bounds(&preset.source(PowerDbm::new(-55.0)), &timing);
        assert_eq!(at(Preset::Oven).min_t_jam, US(10_020));
        assert_eq!(at(Preset::Oven).max_t_msg, US(9_999));
        assert_eq!(at(Preset::Bluetooth).min_t_jam, US(645));
        assert_eq!(at(Preset::Silent).min_t_jam, US(20));
    }

    #[test]
    fn surfaces_cover_the_grid() {
        let pts = outcome_surfaces(10, 2..=8).unwrap();
        assert_eq!(pts.len(), 7 * 11);
        assert!(pts.iter().all(|s| (s.probs.pa + s.probs.na + s.probs.da - 1.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(p in 0.0f64..=1.0, n in 2u32..=30) {
            let o = handshake_outcome_probs(p, n).unwrap();
            prop_assert!((o.pa + o.na + o.da - 1.0).abs() < 1e-12);
            for x in [o.pa, o.na, o.da] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            let e = enumerate(p, n);
            prop_assert!((o.na - e.na).abs() < 1e-12 && (o.da - e.da).abs() < 1e-12);
        }

        // Kept where p^(n-1) stays well above f64 epsilon, so `1 - p^(n-1)`
        // still moves when n does.
        #[test]
        fn longer_handshakes_trade_disagreement_for_failure(p in 0.05f64..0.99, n in 2u32..=8) {
            let a = handshake_outcome_probs(p, n).unwrap();
            let b = handshake_outcome_probs(p, n + 1).unwrap();
            prop_assert!(b.da < a.da);
            prop_assert!(b.na > a.na);
        }

        #[test]
        fn pa_grows_with_p(p in 0.0f64..0.99, dp in 0.001f64..0.01, n in 2u32..=20) {
            let lo = handshake_outcome_probs(p, n).unwrap();
            let hi = handshake_outcome_probs((p + dp).min(1.0), n).unwrap();
            prop_assert!(hi.pa > lo.pa);
        }
    }
}
