//! Agreement handshakes and outcome classification.
//!
//! Each `run_*` function executes one handshake attempt against a freshly
//! generated interference trace and returns an [`OutcomeRecord`]. The
//! initiator is node 0; unicast receivers are node 1 and broadcast
//! receivers are nodes `1..=r`. There are no retransmissions: a lost
//! message ends the exchange.

mod broadcast;
mod engine;
mod schedule;
mod unicast;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, NodeId};
use crate::error::{Error, Result};
use crate::interference::ActivityTrace;
use crate::power::PowerDbm;
use crate::rng::RngStream;
use crate::time::{Duration, TimePoint};
use crate::timing::TimingModel;

pub use broadcast::{run_ackb, run_jamb};
pub use schedule::{build_bitvector_schedule, BitVectorSchedule};
pub use unicast::{run_ack3, run_ack_train, run_jam2, run_jam3, run_nway};

pub const INITIATOR: NodeId = 0;
pub const RESPONDER: NodeId = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Protocol {
    /// Alternating n-message handshake.
    NWay { n: u32 },
    /// V followed by a train of `trains` back-to-back ACKs; one ACK is Ack-2.
    AckTrain { trains: u32 },
    /// V acknowledged by a jam of length `t_jam`.
    Jam2 { t_jam: Duration },
    /// Packet-based three-way handshake.
    Ack3,
    /// V, ACK, then a confirming jam checked against the RSSI of V.
    Jam3 { t_jam: Duration, delta_r: f64 },
    /// Broadcast: slotted jamming by receivers, then a confirming jam by S.
    JamB {
        receivers: u32,
        slots: u32,
        t_slot: Duration,
        t_settle: Duration,
        t_jam: Duration,
    },
    /// Broadcast with slotted ACK packets and a confirmation packet.
    AckB { receivers: u32 },
}

impl Protocol {
    pub fn jamb(receivers: u32) -> Protocol {
        Protocol::JamB {
            receivers,
            slots: 16,
            t_slot: Duration::from_micros(1000),
            t_settle: Duration::from_micros(169),
            t_jam: Duration::from_micros(2000),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::NWay { .. } => "nway",
            Protocol::AckTrain { trains: 1 } => "ack2",
            Protocol::AckTrain { .. } => "ack-train",
            Protocol::Jam2 { .. } => "jam2",
            Protocol::Ack3 => "ack3",
            Protocol::Jam3 { .. } => "jam3",
            Protocol::JamB { .. } => "jamb",
            Protocol::AckB { .. } => "ackb",
        }
    }

    /// Parameter summary used in result tables, `;`-separated.
    pub fn params(&self) -> String {
        match *self {
            Protocol::NWay { n } => format!("n={n}"),
            Protocol::AckTrain { trains } => format!("T={trains}"),
            Protocol::Jam2 { t_jam } => format!("t_jam={}", t_jam.as_micros()),
            Protocol::Ack3 => String::new(),
            Protocol::Jam3 { t_jam, delta_r } => format!("t_jam={};delta_r={delta_r}", t_jam.as_micros()),
            Protocol::JamB {
                receivers,
                slots,
                t_slot,
                t_settle,
                t_jam,
            } => format!(
                "r={receivers};k={slots};t_slot={};t_settle={};t_jam={}",
                t_slot.as_micros(),
                t_settle.as_micros(),
                t_jam.as_micros()
            ),
            Protocol::AckB { receivers } => format!("r={receivers}"),
        }
    }

    /// Node ids taking part, initiator first.
    pub fn nodes(&self) -> Vec<NodeId> {
        match *self {
            Protocol::JamB { receivers, .. } | Protocol::AckB { receivers } => (0..=receivers).collect(),
            _ => vec![INITIATOR, RESPONDER],
        }
    }

    pub fn validate(&self, timing: &TimingModel) -> Result<()> {
        let period = timing.rssi_sample_period;
        let check_jam = |t_jam: Duration| {
            if t_jam < period {
                Err(Error::config("t_jam", format!("must be at least one RSSI sample period ({period})")))
            } else {
                Ok(())
            }
        };
        match *self {
            Protocol::NWay { n } if n < 2 => Err(Error::config("n", "n-way handshake needs n >= 2")),
            Protocol::AckTrain { trains: 0 } => Err(Error::config("trains", "ACK train needs T >= 1")),
            Protocol::Jam2 { t_jam } => check_jam(t_jam),
            Protocol::Jam3 { t_jam, delta_r } => {
                if !delta_r.is_finite() || delta_r < 0.0 {
                    return Err(Error::config("delta_r", "must be finite and >= 0"));
                }
                check_jam(t_jam)
            }
            Protocol::JamB {
                receivers,
                slots,
                t_slot,
                t_settle,
                t_jam,
            } => {
                if receivers < 1 || receivers > slots || slots > 64 {
                    return Err(Error::config("receivers", "Jam-B needs 1 <= r <= k <= 64"));
                }
                if t_settle + period > t_slot {
                    return Err(Error::config("t_settle", "guard time leaves no sample in the slot"));
                }
                check_jam(t_jam)
            }
            Protocol::AckB { receivers: 0 } => Err(Error::config("receivers", "Ack-B needs r >= 1")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.params();
        if params.is_empty() {
            f.write_str(self.name())
        } else {
            write!(f, "{}({})", self.name(), params)
        }
    }
}

/// Piecewise-linear map from transmit power to ambient per-packet loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkTable(pub Vec<(f64, f64)>);

impl Default for LinkTable {
    /// Weak links below -15 dBm lose up to 20% of packets at -25 dBm.
    fn default() -> Self {
        LinkTable(vec![(-25.0, 0.20), (-15.0, 0.0), (0.0, 0.0)])
    }
}

impl LinkTable {
    pub fn loss_at(&self, tx_dbm: f64) -> f64 {
        let pts = &self.0;
        match pts.iter().position(|&(x, _)| x >= tx_dbm) {
            None => pts.last().map_or(0.0, |&(_, y)| y),
            Some(0) => pts[0].1,
            Some(i) => {
                let (x0, y0) = pts[i - 1];
                let (x1, y1) = pts[i];
                y0 + (y1 - y0) * (tx_dbm - x0) / (x1 - x0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::config("tx_power.table", "needs at least one point"));
        }
        if self.0.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::config("tx_power.table", "power points must be strictly increasing"));
        }
        if self.0.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
            return Err(Error::config("tx_power.table", "loss values must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TxPowerPolicy {
    Fixed(PowerDbm),
    /// Integer dBm drawn uniformly from `[low, high]` per handshake; the
    /// table gives the ambient loss of the resulting link.
    Sweep { low: i32, high: i32, table: LinkTable },
}

impl TxPowerPolicy {
    pub fn sweep() -> Self {
        TxPowerPolicy::Sweep {
            low: -25,
            high: 0,
            table: LinkTable::default(),
        }
    }
}

/// The link realised for one handshake: every node pair shares it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub tx_power: PowerDbm,
    pub rx_power: PowerDbm,
    pub base_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandshakeConfig {
    pub protocol: Protocol,
    pub payload_bytes: u64,
    pub r_noise: PowerDbm,
    pub tx_power: TxPowerPolicy,
    pub path_loss_db: f64,
    /// Ambient loss used with a fixed transmit power.
    pub base_loss: f64,
    pub cca_before_first: bool,
    pub cca_threshold: PowerDbm,
}

impl HandshakeConfig {
    /// Defaults: 5-byte payload, -94 dBm floor, 0 dBm over 60 dB of path
    /// loss, no ambient loss, CCA before the first packet.
    pub fn new(protocol: Protocol) -> Self {
        HandshakeConfig {
            protocol,
            payload_bytes: 5,
            r_noise: PowerDbm::new(-94.0),
            tx_power: TxPowerPolicy::Fixed(PowerDbm::new(0.0)),
            path_loss_db: 60.0,
            base_loss: 0.0,
            cca_before_first: true,
            cca_threshold: PowerDbm::new(-77.0),
        }
    }

    pub fn validate(&self, timing: &TimingModel) -> Result<()> {
        self.protocol.validate(timing)?;
        if !(0.0..=1.0).contains(&self.base_loss) {
            return Err(Error::config("base_loss", "must lie in [0, 1]"));
        }
        if self.payload_bytes + timing.mac_overhead_bytes > crate::timing::MAX_FRAME_BYTES {
            return Err(Error::config("payload_bytes", "frame exceeds 127 bytes"));
        }
        if let TxPowerPolicy::Sweep { low, high, table } = &self.tx_power {
            if low > high {
                return Err(Error::config("tx_power", "sweep needs low <= high"));
            }
            table.validate()?;
        }
        Ok(())
    }

    /// Draws the transmit power for one handshake.
    pub fn draw_link(&self, rng: &mut RngStream) -> Link {
        let (tx, base_loss) = match &self.tx_power {
            TxPowerPolicy::Fixed(p) => (*p, self.base_loss),
            TxPowerPolicy::Sweep { low, high, table } => {
                let span = (*high - *low) as u64;
                let tx = *low as f64 + rng.uniform_u64(0, span) as f64;
                (PowerDbm::new(tx), table.loss_at(tx))
            }
        };
        Link {
            tx_power: tx,
            rx_power: tx - self.path_loss_db,
            base_loss,
        }
    }
}

/// Everything one trial runs against besides the protocol itself.
#[derive(Clone, Copy, Debug)]
pub struct TrialEnv<'a> {
    pub timing: &'a TimingModel,
    pub channel: &'a ChannelParams,
    pub trace: &'a ActivityTrace,
    /// When the initiator decides to start (before any CCA wait).
    pub start: TimePoint,
    pub link: Link,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    PositiveAgreement,
    NegativeAgreement,
    Disagreement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Success,
    Failure,
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Success
        } else {
            Verdict::Failure
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RadioTime {
    pub tx: Duration,
    pub rx: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRecord {
    pub outcome: Outcome,
    /// A detector accepted a jam that nobody transmitted.
    pub false_positive: bool,
    pub verdicts: BTreeMap<NodeId, Verdict>,
    /// From the start of the clear CCA window (or the first packet when CCA
    /// is off) to the last protocol event.
    pub duration: Duration,
    pub radio: BTreeMap<NodeId, RadioTime>,
}

impl OutcomeRecord {
    pub fn total_radio(&self) -> RadioTime {
        self.radio.values().fold(RadioTime::default(), |acc, r| RadioTime {
            tx: acc.tx + r.tx,
            rx: acc.rx + r.rx,
        })
    }
}

/// All success is positive agreement, all failure negative agreement,
/// anything mixed is disagreement.
pub fn classify<I>(verdicts: I) -> Result<Outcome>
where
    I: IntoIterator<Item = Verdict>,
{
    let (mut ok, mut failed) = (0usize, 0usize);
    for v in verdicts {
        match v {
            Verdict::Success => ok += 1,
            Verdict::Failure => failed += 1,
        }
    }
    if ok + failed < 2 {
        return Err(Error::TooFewVerdicts(ok + failed));
    }
    Ok(match (ok, failed) {
        (_, 0) => Outcome::PositiveAgreement,
        (0, _) => Outcome::NegativeAgreement,
        _ => Outcome::Disagreement,
    })
}

/// Runs the handshake selected by `cfg.protocol`.
pub fn run_handshake(cfg: &HandshakeConfig, env: &TrialEnv<'_>, rng: &mut RngStream) -> OutcomeRecord {
    match cfg.protocol {
        Protocol::NWay { n } => run_nway(cfg, n, env, rng),
        Protocol::AckTrain { trains } => run_ack_train(cfg, trains, env, rng),
        Protocol::Jam2 { t_jam } => run_jam2(cfg, t_jam, env, rng),
        Protocol::Ack3 => run_ack3(cfg, env, rng),
        Protocol::Jam3 { t_jam, delta_r } => run_jam3(cfg, t_jam, delta_r, env, rng),
        Protocol::JamB {
            receivers,
            slots,
            t_slot,
            t_settle,
            t_jam,
        } => run_jamb(cfg, receivers, slots, t_slot, t_settle, t_jam, env, rng),
        Protocol::AckB { receivers } => run_ackb(cfg, receivers, env, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Verdict::{Failure, Success};

    #[test]
    fn classification_table() {
        assert_eq!(classify([Success, Success]).unwrap(), Outcome::PositiveAgreement);
        assert_eq!(classify([Failure, Failure]).unwrap(), Outcome::NegativeAgreement);
        assert_eq!(classify([Success, Failure]).unwrap(), Outcome::Disagreement);
        assert_eq!(classify([Failure, Success, Success]).unwrap(), Outcome::Disagreement);
        assert!(matches!(classify([Success]), Err(Error::TooFewVerdicts(1))));
        assert!(classify([]).is_err());
    }

    #[test]
    fn classification_ignores_order() {
        let vs = [Success, Failure, Success, Success, Failure];
        let expected = classify(vs).unwrap();
        for rot in 0..vs.len() {
            let mut v = vs.to_vec();
            v.rotate_left(rot);
            v.reverse();
            assert_eq!(classify(v).unwrap(), expected);
        }
    }

    #[test]
    fn link_table_interpolates() {
        let t = LinkTable::default();
        assert_eq!(t.loss_at(-30.0), 0.20);
        assert_eq!(t.loss_at(-25.0), 0.20);
        assert!((t.loss_at(-20.0) - 0.10).abs() < 1e-12);
        assert_eq!(t.loss_at(-10.0), 0.0);
        assert_eq!(t.loss_at(5.0), 0.0);
    }

    #[test]
    fn config_validation() {
        let timing = TimingModel::default();
        assert!(HandshakeConfig::new(Protocol::NWay { n: 1 }).validate(&timing).is_err());
        assert!(HandshakeConfig::new(Protocol::AckTrain { trains: 0 }).validate(&timing).is_err());
        assert!(HandshakeConfig::new(Protocol::Jam2 { t_jam: Duration::from_micros(10) })
            .validate(&timing)
            .is_err());
        assert!(HandshakeConfig::new(Protocol::jamb(17)).validate(&timing).is_err());
        assert!(HandshakeConfig::new(Protocol::jamb(6)).validate(&timing).is_ok());
        let mut cfg = HandshakeConfig::new(Protocol::Ack3);
        cfg.base_loss = 1.5;
        assert!(cfg.validate(&timing).is_err());
    }

    #[test]
    fn protocol_labels() {
        assert_eq!(Protocol::AckTrain { trains: 1 }.name(), "ack2");
        assert_eq!(Protocol::AckTrain { trains: 4 }.to_string(), "ack-train(T=4)");
        assert_eq!(Protocol::Ack3.to_string(), "ack3");
        assert_eq!(Protocol::jamb(6).nodes().len(), 7);
    }
}
