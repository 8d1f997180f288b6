//! Scenario files.
//!
//! A scenario is a TOML document. Only `seed` and `trials` are required;
//! every section has defaults:
//!
//! ```toml
//! seed = 7
//! trials = 100000
//! horizon_us = 200000        # length of each generated trace
//! start_window_us = 20000    # handshake start drawn uniformly from [0, this)
//! output = "out.csv"
//!
//! [interference]
//! preset = "oven"            # oven | bluetooth | wifi-heavy | wifi-light | silent
//! power_dbm = -55
//! idle = { dist = "exponential", mean = 2000 }   # optional overrides
//! busy = { dist = "uniform", lo = 200, hi = 1500 }
//! hit_probability = 1.0
//!
//! [channel]                  # noise floor, jitter, capture margin, sensitivity
//! [timing]                   # any TimingModel field, in microseconds
//!
//! [link]
//! tx_power = "sweep"         # or a fixed power in dBm
//! sweep_low_dbm = -25
//! sweep_high_dbm = 0
//! loss_table = [[-25.0, 0.2], [-15.0, 0.0], [0.0, 0.0]]
//! path_loss_db = 60
//! base_loss = 0.0            # ambient loss with a fixed tx_power
//!
//! [handshake]                # defaults for every protocol entry
//! payload_bytes = 5
//! r_noise_dbm = -94
//! cca_before_first = true
//! cca_threshold_dbm = -77
//!
//! [[protocols]]
//! protocol = "jam3"          # nway | ack2 | ack-train | jam2 | ack3 | jam3 | jamb | ackb
//! t_jam = 2000
//! delta_r = 7
//! cca_before_first = false   # per-entry handshake overrides are allowed
//! ```
//!
//! Overrides given as `dotted.path=value` are applied to the document
//! before it is interpreted; array elements are addressed by index, as in
//! `protocols.0.t_jam=3000`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::interference::{DurationDist, InterferenceSource, Preset, DEFAULT_INTERFERENCE_DBM};
use crate::power::PowerDbm;
use crate::protocols::{HandshakeConfig, LinkTable, Protocol, TxPowerPolicy};
use crate::time::Duration;
use crate::timing::{make_timing_model, TimingModel, TimingOverrides};

/// A validated experiment: every config runs `trials` times against the
/// same interference source.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub seed: u64,
    pub trials: u64,
    pub horizon: Duration,
    pub start_window: Duration,
    pub source_label: String,
    pub source: InterferenceSource,
    pub channel: ChannelParams,
    pub timing: TimingModel,
    /// Link and handshake settings shared by generated configs; its
    /// protocol is a placeholder.
    pub defaults: HandshakeConfig,
    pub configs: Vec<HandshakeConfig>,
    pub output: Option<PathBuf>,
}

impl Scenario {
    /// An empty scenario against `preset` with default channel and timing.
    pub fn new(seed: u64, trials: u64, preset: Preset) -> Self {
        Scenario {
            seed,
            trials,
            horizon: Duration::from_micros(DEFAULT_HORIZON_US),
            start_window: Duration::from_micros(DEFAULT_START_WINDOW_US),
            source_label: preset.name().to_string(),
            source: preset.source(PowerDbm::new(DEFAULT_INTERFERENCE_DBM)),
            channel: ChannelParams::default(),
            timing: TimingModel::default(),
            defaults: HandshakeConfig {
                tx_power: TxPowerPolicy::sweep(),
                ..HandshakeConfig::new(Protocol::Ack3)
            },
            configs: Vec::new(),
            output: None,
        }
    }

    /// A config for `protocol` with this scenario's link and handshake
    /// settings.
    pub fn config(&self, protocol: Protocol) -> HandshakeConfig {
        HandshakeConfig {
            protocol,
            ..self.defaults.clone()
        }
    }

    /// Same scenario against another preset.
    pub fn with_preset(&self, preset: Preset) -> Self {
        let power = self.source.rx_power;
        Scenario {
            source_label: preset.name().to_string(),
            source: preset.source(power),
            ..self.clone()
        }
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Scenario::parse(&text, path, overrides)
    }

    /// Parses a scenario document; `origin` only labels parse errors.
    pub fn parse(text: &str, origin: &Path, overrides: &[String]) -> Result<Self> {
        let table: Table = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            source: Box::new(e),
        })?;
        let mut doc = Value::Table(table);
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        Scenario::from_value(doc, origin)
    }

    fn from_value(doc: Value, origin: &Path) -> Result<Self> {
        let raw: RawScenario = doc.try_into().map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            source: Box::new(e),
        })?;
        raw.build(origin)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if self.horizon.is_zero() {
            return Err(Error::config("horizon_us", "must be positive"));
        }
        if self.start_window >= self.horizon {
            return Err(Error::config("start_window_us", "must be shorter than the horizon"));
        }
        self.source.validate()?;
        self.channel.validate()?;
        self.defaults.validate(&self.timing).map_err(|e| e.under("handshake"))?;
        for (i, cfg) in self.configs.iter().enumerate() {
            cfg.validate(&self.timing).map_err(|e| e.under(&format!("protocols[{i}]")))?;
        }
        Ok(())
    }
}

pub const DEFAULT_HORIZON_US: u64 = 200_000;
pub const DEFAULT_START_WINDOW_US: u64 = 20_000;

/// Applies one `dotted.path=value` edit. The value is read as a TOML value
/// when it parses as one and as a bare string otherwise.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override `{spec}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::InvalidArgument(format!("override `{spec}` has an empty key")));
    }
    set_path(doc, &keys, parse_value(raw.trim()))
        .map_err(|msg| Error::InvalidArgument(format!("override `{spec}`: {msg}")))
}

fn set_path(slot: &mut Value, keys: &[&str], value: Value) -> std::result::Result<(), &'static str> {
    let Some((key, rest)) = keys.split_first() else {
        *slot = value;
        return Ok(());
    };
    let child = match slot {
        Value::Table(t) => t.entry(key.to_string()).or_insert_with(|| Value::Table(Table::new())),
        Value::Array(items) => {
            let idx: usize = key.parse().map_err(|_| "array index expected")?;
            items.get_mut(idx).ok_or("array index out of range")?
        }
        _ => return Err("path runs through a non-table value"),
    };
    set_path(child, rest, value)
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    seed: u64,
    trials: u64,
    #[serde(default = "default_horizon")]
    horizon_us: u64,
    #[serde(default = "default_start_window")]
    start_window_us: u64,
    output: Option<PathBuf>,
    #[serde(default)]
    interference: RawInterference,
    #[serde(default)]
    channel: ChannelParams,
    #[serde(default)]
    timing: TimingOverrides,
    #[serde(default)]
    link: RawLink,
    #[serde(default)]
    handshake: RawHandshake,
    #[serde(default)]
    protocols: Vec<Table>,
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON_US
}

fn default_start_window() -> u64 {
    DEFAULT_START_WINDOW_US
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawInterference {
    preset: Preset,
    power_dbm: f64,
    busy: Option<DurationDist>,
    idle: Option<DurationDist>,
    hit_probability: Option<f64>,
}

impl Default for RawInterference {
    fn default() -> Self {
        RawInterference {
            preset: Preset::Silent,
            power_dbm: DEFAULT_INTERFERENCE_DBM,
            busy: None,
            idle: None,
            hit_probability: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTxPower {
    Fixed(f64),
    Named(String),
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawLink {
    tx_power: RawTxPower,
    sweep_low_dbm: i32,
    sweep_high_dbm: i32,
    loss_table: LinkTable,
    path_loss_db: f64,
    base_loss: f64,
}

impl Default for RawLink {
    fn default() -> Self {
        RawLink {
            tx_power: RawTxPower::Named("sweep".into()),
            sweep_low_dbm: -25,
            sweep_high_dbm: 0,
            loss_table: LinkTable::default(),
            path_loss_db: 60.0,
            base_loss: 0.0,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawHandshake {
    payload_bytes: u64,
    r_noise_dbm: f64,
    cca_before_first: bool,
    cca_threshold_dbm: f64,
}

impl Default for RawHandshake {
    fn default() -> Self {
        let d = HandshakeConfig::new(Protocol::Ack3);
        RawHandshake {
            payload_bytes: d.payload_bytes,
            r_noise_dbm: d.r_noise.dbm(),
            cca_before_first: d.cca_before_first,
            cca_threshold_dbm: d.cca_threshold.dbm(),
        }
    }
}

/// Handshake keys allowed inside a `[[protocols]]` entry.
const ENTRY_HANDSHAKE_KEYS: [&str; 4] = ["payload_bytes", "r_noise_dbm", "cca_before_first", "cca_threshold_dbm"];

#[derive(Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case", deny_unknown_fields)]
enum RawProtocol {
    Nway {
        n: u32,
    },
    Ack2,
    AckTrain {
        trains: u32,
    },
    Jam2 {
        t_jam: u64,
    },
    Ack3,
    Jam3 {
        t_jam: u64,
        delta_r: f64,
    },
    Jamb {
        receivers: u32,
        #[serde(default = "default_slots")]
        slots: u32,
        #[serde(default = "default_t_slot")]
        t_slot: u64,
        #[serde(default = "default_t_settle")]
        t_settle: u64,
        #[serde(default = "default_t_jam")]
        t_jam: u64,
    },
    Ackb {
        receivers: u32,
    },
}

fn default_slots() -> u32 {
    16
}
fn default_t_slot() -> u64 {
    1000
}
fn default_t_settle() -> u64 {
    169
}
fn default_t_jam() -> u64 {
    2000
}

impl From<RawProtocol> for Protocol {
    fn from(raw: RawProtocol) -> Self {
        let us = Duration::from_micros;
        match raw {
            RawProtocol::Nway { n } => Protocol::NWay { n },
            RawProtocol::Ack2 => Protocol::AckTrain { trains: 1 },
            RawProtocol::AckTrain { trains } => Protocol::AckTrain { trains },
            RawProtocol::Jam2 { t_jam } => Protocol::Jam2 { t_jam: us(t_jam) },
            RawProtocol::Ack3 => Protocol::Ack3,
            RawProtocol::Jam3 { t_jam, delta_r } => Protocol::Jam3 {
                t_jam: us(t_jam),
                delta_r,
            },
            RawProtocol::Jamb {
                receivers,
                slots,
                t_slot,
                t_settle,
                t_jam,
            } => Protocol::JamB {
                receivers,
                slots,
                t_slot: us(t_slot),
                t_settle: us(t_settle),
                t_jam: us(t_jam),
            },
            RawProtocol::Ackb { receivers } => Protocol::AckB { receivers },
        }
    }
}

impl RawScenario {
    fn build(self, origin: &Path) -> Result<Scenario> {
        let mut source = self.interference.preset.source(PowerDbm::new(self.interference.power_dbm));
        if let Some(busy) = self.interference.busy {
            source.busy = busy;
        }
        if let Some(idle) = self.interference.idle {
            source.idle = idle;
        }
        if let Some(hit) = self.interference.hit_probability {
            source.hit_probability = hit;
        }
        let customised = self.interference.busy.is_some()
            || self.interference.idle.is_some()
            || self.interference.hit_probability.is_some();
        let source_label = if customised {
            format!("{}*", self.interference.preset.name())
        } else {
            self.interference.preset.name().to_string()
        };

        let tx_power = match self.link.tx_power {
            RawTxPower::Fixed(dbm) => TxPowerPolicy::Fixed(PowerDbm::new(dbm)),
            RawTxPower::Named(s) if s == "sweep" => TxPowerPolicy::Sweep {
                low: self.link.sweep_low_dbm,
                high: self.link.sweep_high_dbm,
                table: self.link.loss_table,
            },
            RawTxPower::Named(s) => {
                return Err(Error::config("link.tx_power", format!("expected \"sweep\" or dBm, got `{s}`")))
            }
        };

        let make = |protocol: Protocol, hs: &RawHandshake| HandshakeConfig {
            protocol,
            payload_bytes: hs.payload_bytes,
            r_noise: PowerDbm::new(hs.r_noise_dbm),
            tx_power: tx_power.clone(),
            path_loss_db: self.link.path_loss_db,
            base_loss: self.link.base_loss,
            cca_before_first: hs.cca_before_first,
            cca_threshold: PowerDbm::new(hs.cca_threshold_dbm),
        };
        let defaults = make(Protocol::Ack3, &self.handshake);
        let mut configs = Vec::with_capacity(self.protocols.len());
        for (i, mut entry) in self.protocols.into_iter().enumerate() {
            let at = format!("protocols[{i}]");
            let Ok(Value::Table(mut hs_table)) = Value::try_from(&self.handshake) else {
                unreachable!("handshake defaults serialise to a table")
            };
            for key in ENTRY_HANDSHAKE_KEYS {
                if let Some(v) = entry.remove(key) {
                    hs_table.insert(key.to_string(), v);
                }
            }
            let hs: RawHandshake = Value::Table(hs_table).try_into().map_err(|e| Error::config(&at, e.to_string()))?;
            let protocol: RawProtocol = Value::Table(entry)
                .try_into()
                .map_err(|e| Error::config(&at, e.to_string()))?;
            configs.push(make(protocol.into(), &hs));
        }

        let scenario = Scenario {
            seed: self.seed,
            trials: self.trials,
            horizon: Duration::from_micros(self.horizon_us),
            start_window: Duration::from_micros(self.start_window_us),
            source_label,
            source,
            channel: self.channel,
            timing: make_timing_model(&self.timing)?,
            defaults,
            configs,
            output: self.output,
        };
        scenario.validate().map_err(|e| match e {
            Error::InvalidConfig { .. } => e,
            other => Error::config(origin.display().to_string(), other.to_string()),
        })?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, overrides: &[&str]) -> Result<Scenario> {
        let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        Scenario::parse(text, Path::new("test.toml"), &ov)
    }

    const BASIC: &str = r#"
        seed = 3
        trials = 10

        [interference]
        preset = "oven"
        power_dbm = -55

        [[protocols]]
        protocol = "jam2"
        t_jam = 2000

        [[protocols]]
        protocol = "nway"
        n = 4
        cca_before_first = false

        [[protocols]]
        protocol = "jamb"
        receivers = 6
    "#;

    #[test]
    fn parses_protocol_list() {
        let s = parse(BASIC, &[]).unwrap();
        assert_eq!(s.seed, 3);
        assert_eq!(s.source_label, "oven");
        assert_eq!(s.configs.len(), 3);
        assert_eq!(
            s.configs[0].protocol,
            Protocol::Jam2 {
                t_jam: Duration::from_micros(2000)
            }
        );
        assert!(s.configs[0].cca_before_first);
        assert!(!s.configs[1].cca_before_first);
        assert_eq!(s.configs[2].protocol, Protocol::jamb(6));
        assert!(matches!(s.configs[0].tx_power, TxPowerPolicy::Sweep { low: -25, high: 0, .. }));
        assert_eq!(s.horizon, Duration::from_micros(DEFAULT_HORIZON_US));
    }

    #[test]
    fn overrides_edit_nested_and_indexed_values() {
        let s = parse(
            BASIC,
            &["trials=99", "interference.preset=bluetooth", "protocols.0.t_jam=3000", "link.tx_power=0"],
        )
        .unwrap();
        assert_eq!(s.trials, 99);
        assert_eq!(s.source_label, "bluetooth");
        assert_eq!(
            s.configs[0].protocol,
            Protocol::Jam2 {
                t_jam: Duration::from_micros(3000)
            }
        );
        assert_eq!(s.configs[0].tx_power, TxPowerPolicy::Fixed(PowerDbm::new(0.0)));
    }

    #[test]
    fn validation_errors_name_the_field() {
        let err = parse(BASIC, &["protocols.0.t_jam=5"]).unwrap_err();
        match err {
            Error::InvalidConfig { path, .. } => assert_eq!(path, "protocols[0].t_jam"),
            other => panic!("unexpected {other}"),
        }
        let err = parse(BASIC, &["protocols.2.receivers=20"]).unwrap_err();
        assert!(err.to_string().starts_with("protocols[2].receivers"), "{err}");
        let err = parse(BASIC, &["trials=0"]).unwrap_err();
        assert!(err.to_string().starts_with("trials"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys_and_presets() {
        assert!(parse(BASIC, &["colour=1"]).is_err());
        assert!(parse(BASIC, &["interference.preset=toaster"]).is_err());
        assert!(parse(BASIC, &["protocols.0.protocol=jam9"]).is_err());
        assert!(parse(BASIC, &["protocols.9.t_jam=1"]).is_err());
        assert!(parse(BASIC, &["no-equals-sign"]).is_err());
    }

    #[test]
    fn custom_source_is_labelled() {
        let s = parse(
            BASIC,
            &["interference.preset=wifi-heavy", "interference.idle={ dist = \"exponential\", mean = 900 }"],
        )
        .unwrap();
        assert_eq!(s.source_label, "wifi-heavy*");
        assert_eq!(s.source.idle, DurationDist::Exponential { mean: 900 });
        // Periodic sources must keep fixed periods.
        assert!(parse(BASIC, &["interference.idle={ dist = \"exponential\", mean = 900 }"]).is_err());
    }

    #[test]
    fn minimal_file_defaults_to_silent() {
        let s = parse("seed = 1\ntrials = 1\n", &[]).unwrap();
        assert_eq!(s.source_label, "silent");
        assert!(s.configs.is_empty());
        assert!(parse("trials = 1\n", &[]).is_err());
    }
}
