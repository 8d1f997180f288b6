//! Two-party handshakes between the initiator S (node 0) and R (node 1).

use std::collections::BTreeMap;

use crate::channel::{detect_jam_floor, detect_jam_ref, rssi_at};
use crate::rng::RngStream;
use crate::time::Duration;

use super::engine::{never_started, Session};
use super::{HandshakeConfig, OutcomeRecord, TrialEnv, Verdict, INITIATOR as S, RESPONDER as R};

fn pair(s_ok: bool, r_ok: bool) -> BTreeMap<u32, Verdict> {
    BTreeMap::from([(S, s_ok.into()), (R, r_ok.into())])
}

/// Alternating n-message exchange. Message 1 is the data packet V, the rest
/// are ACK-sized. A node succeeds iff it received every message addressed
/// to it; the exchange stops at the first loss or busy CCA.
pub fn run_nway(cfg: &HandshakeConfig, n: u32, env: &TrialEnv<'_>, rng: &mut RngStream) -> OutcomeRecord {
    let Some((mut s, mut at)) = Session::open(cfg, env, rng) else {
        return never_started(cfg);
    };
    let timing = env.timing;
    let gap = timing.handshake_gap();
    let mut delivered = 0;
    for i in 1..=n {
        let (from, to) = if i % 2 == 1 { (S, R) } else { (R, S) };
        let airtime = if i == 1 {
            timing.data_packet_airtime(cfg.payload_bytes)
        } else {
            timing.ack_airtime
        };
        if i > 1 && !s.cca(from, at) {
            s.listen(to, at, airtime);
            break;
        }
        let ok = s.send_one(from, to, at, airtime);
        if !ok {
            break;
        }
        delivered = i;
        at = at + airtime + gap;
    }
    // Last message each side expects: R the last odd one, S the last even one.
    let last_for_r = if n % 2 == 1 { n } else { n - 1 };
    let last_for_s = if n.is_multiple_of(2) { n } else { n - 1 };
    s.finish(pair(delivered >= last_for_s, delivered >= last_for_r), false)
}

pub fn run_ack3(cfg: &HandshakeConfig, env: &TrialEnv<'_>, rng: &mut RngStream) -> OutcomeRecord {
    run_nway(cfg, 3, env, rng)
}

/// V followed by `trains` back-to-back ACKs from R. S succeeds if any ACK
/// gets through; R commits as soon as it has V.
pub fn run_ack_train(
    cfg: &HandshakeConfig,
    trains: u32,
    env: &TrialEnv<'_>,
    rng: &mut RngStream,
) -> OutcomeRecord {
    let Some((mut s, v_start)) = Session::open(cfg, env, rng) else {
        return never_started(cfg);
    };
    let timing = env.timing;
    let v_air = timing.data_packet_airtime(cfg.payload_bytes);
    let got_v = s.send_one(S, R, v_start, v_air);
    let train_start = v_start + v_air + timing.handshake_gap();
    let ack = timing.ack_airtime;
    let mut got_ack = false;
    if got_v && s.cca(R, train_start) {
        for j in 0..trains as u64 {
            got_ack |= s.send_one(R, S, train_start + ack * j, ack);
        }
    } else {
        s.listen(S, train_start, ack * trains as u64);
    }
    s.finish(pair(got_ack, got_v), false)
}

/// V acknowledged by a jam: R jams for `t_jam` right after V, S samples the
/// same window and accepts iff every sample is above the noise floor.
pub fn run_jam2(cfg: &HandshakeConfig, t_jam: Duration, env: &TrialEnv<'_>, rng: &mut RngStream) -> OutcomeRecord {
    let Some((mut s, v_start)) = Session::open(cfg, env, rng) else {
        return never_started(cfg);
    };
    let timing = env.timing;
    let v_end = v_start + timing.data_packet_airtime(cfg.payload_bytes);
    let got_v = s.send_one(S, R, v_start, v_end.since(v_start));
    let jam_start = v_end + timing.turnaround;
    if got_v {
        s.jam(R, jam_start, t_jam);
    }
    let run = s.sample(S, jam_start, t_jam);
    let detected = detect_jam_floor(&run, cfg.r_noise).expect("validated jam length");
    s.finish(pair(detected, got_v), detected && !got_v)
}

/// V, then an ACK from R, then a confirming jam from S. R records the RSSI
/// of V and accepts the jam only if no sample falls more than `delta_r`
/// below it.
pub fn run_jam3(
    cfg: &HandshakeConfig,
    t_jam: Duration,
    delta_r: f64,
    env: &TrialEnv<'_>,
    rng: &mut RngStream,
) -> OutcomeRecord {
    let Some((mut s, v_start)) = Session::open(cfg, env, rng) else {
        return never_started(cfg);
    };
    let timing = env.timing;
    let v_air = timing.data_packet_airtime(cfg.payload_bytes);
    let got_v = s.send_one(S, R, v_start, v_air);
    // Drawn unconditionally so later draws line up across outcomes.
    let r_s = rssi_at(&s.timeline, v_start + Duration::from_micros(v_air.as_micros() / 2), s.rng);

    let ack_start = v_start + v_air + timing.handshake_gap();
    let ack = timing.ack_airtime;
    let got_ack = if got_v && s.cca(R, ack_start) {
        s.send_one(R, S, ack_start, ack)
    } else {
        s.listen(S, ack_start, ack);
        false
    };

    let jam_start = ack_start + ack + timing.turnaround;
    if got_ack {
        s.jam(S, jam_start, t_jam);
    }
    let detected = if got_v {
        let run = s.sample(R, jam_start, t_jam);
        detect_jam_ref(&run, r_s, delta_r, cfg.r_noise).expect("validated jam length")
    } else {
        false
    };
    s.finish(pair(got_ack, detected), detected && !got_ack)
}
