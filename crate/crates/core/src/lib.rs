//! Discrete-event simulation of agreement handshakes between low-power
//! radios under cross-technology interference.
//!
//! Packet handshakes (n-way, ACK trains, broadcast ACKs) are compared with
//! handshakes that acknowledge by jamming the channel and detecting the
//! jam through RSSI sampling. Time is kept in integer microseconds and all
//! randomness comes from named, seeded streams, so every run is
//! reproducible.

pub mod analytics;
pub mod channel;
pub mod error;
pub mod harness;
pub mod interference;
pub mod power;
pub mod protocols;
pub mod rng;
pub mod time;
pub mod timing;

pub use error::{Error, Result};
pub use power::PowerDbm;
pub use time::{Duration, TimePoint};
