//! Per-trial bookkeeping shared by every handshake: the signal timeline,
//! radio-on accounting and the span of protocol activity.

use std::collections::BTreeMap;

use crate::channel::{
    cca_clear, first_cca_idle, packet_received, sample_window, Emission, EmissionTag, NodeId, PacketTx,
    RssiSampleRun, SignalTimeline,
};
use crate::power::PowerDbm;
use crate::rng::RngStream;
use crate::time::{Duration, TimePoint};
use crate::timing::TimingModel;

use super::{classify, HandshakeConfig, OutcomeRecord, RadioTime, TrialEnv, Verdict};

pub(super) struct Session<'a> {
    pub cfg: &'a HandshakeConfig,
    pub timing: &'a TimingModel,
    pub timeline: SignalTimeline,
    pub rng: &'a mut RngStream,
    env: TrialEnv<'a>,
    radio: BTreeMap<NodeId, RadioTime>,
    next_packet: u32,
    first: TimePoint,
    last: TimePoint,
}

impl<'a> Session<'a> {
    /// Waits for a clear channel (if configured) and returns the session
    /// with the instant the first packet goes out. `None` means the channel
    /// never cleared before the trace horizon and nothing was sent.
    pub fn open(
        cfg: &'a HandshakeConfig,
        env: &TrialEnv<'a>,
        rng: &'a mut RngStream,
    ) -> Option<(Session<'a>, TimePoint)> {
        let timeline = SignalTimeline::new(env.trace, env.channel);
        let mut radio: BTreeMap<NodeId, RadioTime> =
            cfg.protocol.nodes().into_iter().map(|n| (n, RadioTime::default())).collect();
        let (first, tx_at) = if cfg.cca_before_first {
            let at = first_cca_idle(&timeline, env.start, cfg.cca_threshold, env.timing).ok()?;
            let cca = env.timing.cca_check_duration;
            radio.entry(super::INITIATOR).or_default().rx += cca;
            (at.saturating_back(cca), at)
        } else {
            (env.start, env.start)
        };
        let session = Session {
            cfg,
            timing: env.timing,
            timeline,
            rng,
            env: *env,
            radio,
            next_packet: 0,
            first,
            last: tx_at,
        };
        Some((session, tx_at))
    }

    fn touch(&mut self, end: TimePoint) {
        self.last = self.last.max(end);
    }

    fn add_tx(&mut self, node: NodeId, d: Duration) {
        self.radio.entry(node).or_default().tx += d;
    }

    fn add_rx(&mut self, node: NodeId, d: Duration) {
        self.radio.entry(node).or_default().rx += d;
    }

    /// Transmits a packet and reports, per entry of `to`, whether it was
    /// decoded. Each receiver draws its own ambient loss.
    pub fn send(&mut self, from: NodeId, to: &[NodeId], start: TimePoint, airtime: Duration) -> Vec<bool> {
        let pkt = PacketTx {
            id: self.next_packet,
            start,
            airtime,
            rx_power: self.env.link.rx_power,
        };
        self.next_packet += 1;
        self.timeline.push(pkt.emission());
        self.add_tx(from, airtime);
        self.touch(pkt.end());
        let params = self.env.channel;
        to.iter()
            .map(|&node| {
                self.add_rx(node, airtime);
                packet_received(
                    &self.timeline,
                    &pkt,
                    params.capture_margin_db,
                    PowerDbm::new(params.sensitivity_dbm),
                    self.env.link.base_loss,
                    self.rng,
                )
            })
            .collect()
    }

    pub fn send_one(&mut self, from: NodeId, to: NodeId, start: TimePoint, airtime: Duration) -> bool {
        self.send(from, &[to], start, airtime)[0]
    }

    /// A node keeps its radio on for a packet that never comes.
    pub fn listen(&mut self, node: NodeId, start: TimePoint, len: Duration) {
        self.add_rx(node, len);
        self.touch(start + len);
    }

    /// Single CCA check ending at `at`; the reply goes out only if clear.
    pub fn cca(&mut self, node: NodeId, at: TimePoint) -> bool {
        self.add_rx(node, self.timing.cca_check_duration);
        cca_clear(&self.timeline, at, self.cfg.cca_threshold, self.timing)
    }

    pub fn jam(&mut self, node: NodeId, start: TimePoint, len: Duration) {
        self.timeline.push(Emission {
            start,
            end: start + len,
            power: self.env.link.rx_power,
            tag: EmissionTag::Jam(node),
        });
        self.add_tx(node, len);
        self.touch(start + len);
    }

    pub fn sample(&mut self, node: NodeId, start: TimePoint, len: Duration) -> RssiSampleRun {
        self.add_rx(node, len);
        self.touch(start + len);
        sample_window(&self.timeline, start, len, self.timing, self.rng)
    }

    pub fn finish(self, verdicts: BTreeMap<NodeId, Verdict>, false_positive: bool) -> OutcomeRecord {
        let outcome = classify(verdicts.values().copied()).expect("every handshake has at least two nodes");
        OutcomeRecord {
            outcome,
            false_positive,
            verdicts,
            duration: self.last.since(self.first),
            radio: self.radio,
        }
    }
}

/// Record for a trial where the channel never cleared: nobody acted, so
/// every node fails.
pub(super) fn never_started(cfg: &HandshakeConfig) -> OutcomeRecord {
    let nodes = cfg.protocol.nodes();
    let verdicts: BTreeMap<NodeId, Verdict> = nodes.iter().map(|&n| (n, Verdict::Failure)).collect();
    OutcomeRecord {
        outcome: classify(verdicts.values().copied()).expect("at least two nodes"),
        false_positive: false,
        verdicts,
        duration: Duration::ZERO,
        radio: nodes.into_iter().map(|n| (n, RadioTime::default())).collect(),
    }
}
