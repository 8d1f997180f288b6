//! Radio and protocol timing constants.
//!
//! Defaults are the CC2420 / Tmote Sky figures: one RSSI sample every 20 µs,
//! a 782 µs on-air ACK and 2083 µs to process and send it. CCA window and
//! rx/tx turnaround are the usual 802.15.4 values (8 and 12 symbols).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Duration;

/// 250 kbit/s O-QPSK: 32 µs per byte.
const BYTE_TIME_US: u64 = 32;

/// Largest 802.15.4 PSDU.
pub const MAX_FRAME_BYTES: u64 = 127;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingModel {
    pub rssi_sample_period: Duration,
    pub rssi_readout_latency: Duration,
    pub rssi_settle_time: Duration,
    pub ack_airtime: Duration,
    /// Time for the sender to prepare, load and transmit a reply.
    pub ack_processing_plus_send: Duration,
    /// Time for the receiver to decode and hand a packet to the protocol
    /// before it can start preparing a reply.
    pub rx_processing: Duration,
    pub cca_check_duration: Duration,
    pub turnaround: Duration,
    /// Preamble, SFD and length field.
    pub phy_overhead_bytes: u64,
    /// Frame control, sequence number, addressing and FCS.
    pub mac_overhead_bytes: u64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            rssi_sample_period: Duration::from_micros(20),
            rssi_readout_latency: Duration::from_micros(21),
            rssi_settle_time: Duration::from_micros(128),
            ack_airtime: Duration::from_micros(782),
            ack_processing_plus_send: Duration::from_micros(2083),
            rx_processing: Duration::from_micros(2083),
            cca_check_duration: Duration::from_micros(128),
            turnaround: Duration::from_micros(192),
            phy_overhead_bytes: 6,
            mac_overhead_bytes: 11,
        }
    }
}

impl TimingModel {
    /// On-air time of a PSDU of `psdu_bytes` (PHY header added here).
    pub fn frame_airtime(&self, psdu_bytes: u64) -> Duration {
        Duration::from_micros((psdu_bytes + self.phy_overhead_bytes) * BYTE_TIME_US)
    }

    /// On-air time of a data packet carrying `payload_bytes` of application data.
    pub fn data_packet_airtime(&self, payload_bytes: u64) -> Duration {
        self.frame_airtime(payload_bytes + self.mac_overhead_bytes)
    }

    /// Gap between the end of one handshake message and the start of the
    /// reply to it.
    pub fn handshake_gap(&self) -> Duration {
        self.rx_processing + self.ack_processing_plus_send
    }

    /// Number of RSSI samples that fit in a window of `window` length.
    pub fn samples_in(&self, window: Duration) -> u64 {
        window.as_micros() / self.rssi_sample_period.as_micros()
    }
}

/// Partial field map applied on top of [`TimingModel::default`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingOverrides {
    pub rssi_sample_period: Option<u64>,
    pub rssi_readout_latency: Option<u64>,
    pub rssi_settle_time: Option<u64>,
    pub ack_airtime: Option<u64>,
    pub ack_processing_plus_send: Option<u64>,
    pub rx_processing: Option<u64>,
    pub cca_check_duration: Option<u64>,
    pub turnaround: Option<u64>,
    pub phy_overhead_bytes: Option<u64>,
    pub mac_overhead_bytes: Option<u64>,
}

pub fn make_timing_model(overrides: &TimingOverrides) -> Result<TimingModel> {
    let mut model = TimingModel::default();
    let durations: [(&'static str, Option<u64>, &mut Duration); 8] = [
        ("rssi_sample_period", overrides.rssi_sample_period, &mut model.rssi_sample_period),
        ("rssi_readout_latency", overrides.rssi_readout_latency, &mut model.rssi_readout_latency),
        ("rssi_settle_time", overrides.rssi_settle_time, &mut model.rssi_settle_time),
        ("ack_airtime", overrides.ack_airtime, &mut model.ack_airtime),
        ("ack_processing_plus_send", overrides.ack_processing_plus_send, &mut model.ack_processing_plus_send),
        ("rx_processing", overrides.rx_processing, &mut model.rx_processing),
        ("cca_check_duration", overrides.cca_check_duration, &mut model.cca_check_duration),
        ("turnaround", overrides.turnaround, &mut model.turnaround),
    ];
    for (field, value, slot) in durations {
        if let Some(us) = value {
            if us == 0 {
                return Err(Error::NonPositiveDuration { field });
            }
            *slot = Duration::from_micros(us);
        }
    }
    if let Some(b) = overrides.phy_overhead_bytes {
        model.phy_overhead_bytes = b;
    }
    if let Some(b) = overrides.mac_overhead_bytes {
        model.mac_overhead_bytes = b;
    }
    Ok(model)
}
