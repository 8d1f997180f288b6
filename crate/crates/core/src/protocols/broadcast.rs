//! One initiator, `r` receivers (nodes `1..=r`).

use std::collections::BTreeMap;

use crate::channel::{detect_jam_floor, NodeId};
use crate::rng::RngStream;
use crate::time::Duration;

use super::engine::{never_started, Session};
use super::schedule::build_bitvector_schedule;
use super::{HandshakeConfig, OutcomeRecord, TrialEnv, Verdict, INITIATOR as S};

/// Broadcast V, then one slot per bit of the schedule in which every
/// receiver that got V jams its assigned slots. S samples each slot after
/// `t_settle` and, if every slot read as jammed, sends a final jam that the
/// receivers check with the floor detector.
#[allow(clippy::too_many_arguments)]
pub fn run_jamb(
    cfg: &HandshakeConfig,
    receivers: u32,
    slots: u32,
    t_slot: Duration,
    t_settle: Duration,
    t_jam: Duration,
    env: &TrialEnv<'_>,
    rng: &mut RngStream,
) -> OutcomeRecord {
    let schedule = build_bitvector_schedule(receivers as usize, slots as usize).expect("validated Jam-B shape");
    let Some((mut s, v_start)) = Session::open(cfg, env, rng) else {
        return never_started(cfg);
    };
    let timing = env.timing;
    let nodes: Vec<NodeId> = (1..=receivers).collect();
    let v_air = timing.data_packet_airtime(cfg.payload_bytes);
    let got_v = s.send(S, &nodes, v_start, v_air);

    let slots_start = v_start + v_air + timing.turnaround;
    for (i, &node) in nodes.iter().enumerate() {
        if !got_v[i] {
            continue;
        }
        for j in 0..slots {
            if schedule.jams_in(i, j) {
                s.jam(node, slots_start + t_slot * j as u64, t_slot);
            }
        }
    }
    let mut all_slots = true;
    for j in 0..slots {
        let at = slots_start + t_slot * j as u64 + t_settle;
        let run = s.sample(S, at, t_slot.saturating_sub(t_settle));
        all_slots &= detect_jam_floor(&run, cfg.r_noise).expect("validated settle time");
    }

    let final_start = slots_start + t_slot * slots as u64 + timing.turnaround;
    if all_slots {
        s.jam(S, final_start, t_jam);
    }
    let mut verdicts = BTreeMap::from([(S, Verdict::from(all_slots))]);
    let mut phantom = all_slots && got_v.iter().any(|&g| !g);
    for (i, &node) in nodes.iter().enumerate() {
        let detected = got_v[i] && {
            let run = s.sample(node, final_start, t_jam);
            detect_jam_floor(&run, cfg.r_noise).expect("validated jam length")
        };
        phantom |= detected && !all_slots;
        verdicts.insert(node, detected.into());
    }
    s.finish(verdicts, phantom)
}

/// Broadcast V, then one ACK slot per receiver, then a confirmation packet
/// from S once every ACK arrived. Receivers commit on the confirmation.
pub fn run_ackb(cfg: &HandshakeConfig, receivers: u32, env: &TrialEnv<'_>, rng: &mut RngStream) -> OutcomeRecord {
    let Some((mut s, v_start)) = Session::open(cfg, env, rng) else {
        return never_started(cfg);
    };
    let timing = env.timing;
    let nodes: Vec<NodeId> = (1..=receivers).collect();
    let v_air = timing.data_packet_airtime(cfg.payload_bytes);
    let got_v = s.send(S, &nodes, v_start, v_air);

    let ack = timing.ack_airtime;
    let gap = timing.handshake_gap();
    let first_ack = v_start + v_air + gap;
    let ack_slot = ack + timing.turnaround;
    let mut all_acks = true;
    for (i, &node) in nodes.iter().enumerate() {
        let at = first_ack + ack_slot * i as u64;
        let ok = if got_v[i] && s.cca(node, at) {
            s.send_one(node, S, at, ack)
        } else {
            s.listen(S, at, ack);
            false
        };
        all_acks &= ok;
    }

    let conf_at = first_ack + ack_slot * (receivers as u64 - 1) + ack + gap;
    let listeners: Vec<NodeId> = nodes.iter().zip(&got_v).filter(|(_, &g)| g).map(|(&n, _)| n).collect();
    let mut got_conf: BTreeMap<NodeId, bool> = BTreeMap::new();
    let conf_sent = all_acks && s.cca(S, conf_at);
    if conf_sent {
        let ok = s.send(S, &listeners, conf_at, ack);
        got_conf.extend(listeners.iter().copied().zip(ok));
    } else {
        for &n in &listeners {
            s.listen(n, conf_at, ack);
        }
    }

    let mut verdicts = BTreeMap::from([(S, Verdict::from(conf_sent))]);
    for &node in &nodes {
        verdicts.insert(node, got_conf.get(&node).copied().unwrap_or(false).into());
    }
    s.finish(verdicts, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::interference::ActivityTrace;
    use crate::power::PowerDbm;
    use crate::protocols::{run_handshake, Link, Outcome, Protocol};
    use crate::rng::StreamId;
    use crate::time::TimePoint;
    use crate::timing::TimingModel;

    fn run(cfg: &HandshakeConfig, seed: u64) -> OutcomeRecord {
        let timing = TimingModel::default();
        let channel = ChannelParams::default();
        let trace = ActivityTrace::empty(Duration::from_micros(200_000));
        let env = TrialEnv {
            timing: &timing,
            channel: &channel,
            trace: &trace,
            start: TimePoint::ZERO,
            link: Link {
                tx_power: PowerDbm::new(0.0),
                rx_power: PowerDbm::new(-60.0),
                base_loss: cfg.base_loss,
            },
        };
        let mut rng = RngStream::new(seed, StreamId::label("broadcast-test"));
        run_handshake(cfg, &env, &mut rng)
    }

    #[test]
    fn clean_channel_agrees() {
        for r in [1, 3, 6, 16] {
            let rec = run(&HandshakeConfig::new(Protocol::jamb(r)), r as u64);
            assert_eq!(rec.outcome, Outcome::PositiveAgreement);
            assert_eq!(rec.verdicts.len(), r as usize + 1);
            let rec = run(&HandshakeConfig::new(Protocol::AckB { receivers: r }), r as u64);
            assert_eq!(rec.outcome, Outcome::PositiveAgreement);
        }
    }

    #[test]
    fn jamb_is_safe_when_a_receiver_misses_v() {
        // With partial loss some receivers miss V, leaving their exclusive
        // slots silent, so S must not confirm.
        let mut cfg = HandshakeConfig::new(Protocol::jamb(6));
        cfg.base_loss = 0.3;
        for seed in 0..300 {
            let rec = run(&cfg, seed);
            assert!(!rec.false_positive);
            if rec.verdicts[&S] == Verdict::Success {
                assert_eq!(rec.outcome, Outcome::PositiveAgreement);
            }
        }
    }

    #[test]
    fn jamb_receiver_missing_v_on_silent_channel_aborts() {
        // A receiver that missed V leaves its exclusive slots at the noise
        // floor, S never sends the final jam and every node fails.
        let mut cfg = HandshakeConfig::new(Protocol::jamb(6));
        cfg.base_loss = 0.1;
        let mut aborted = 0;
        for seed in 0..400 {
            let rec = run(&cfg, seed);
            let receivers_ok = rec.verdicts.iter().filter(|(&n, v)| n != S && **v == Verdict::Success).count();
            if rec.verdicts[&S] == Verdict::Failure {
                aborted += 1;
                assert_eq!(receivers_ok, 0);
                assert_eq!(rec.outcome, Outcome::NegativeAgreement);
                assert_eq!(rec.radio[&S].tx.as_micros(), 704);
            }
        }
        assert!(aborted > 50, "{aborted}");
    }

    #[test]
    fn jamb_duration_on_success() {
        let rec = run(&HandshakeConfig::new(Protocol::jamb(6)), 1);
        assert_eq!(rec.duration.as_micros(), 128 + 704 + 192 + 16 * 1000 + 192 + 2000);
    }

    #[test]
    fn ackb_lost_v_forces_disagreement_or_negative() {
        let mut cfg = HandshakeConfig::new(Protocol::AckB { receivers: 4 });
        cfg.base_loss = 1.0;
        let rec = run(&cfg, 0);
        assert_eq!(rec.outcome, Outcome::NegativeAgreement);
    }
}
