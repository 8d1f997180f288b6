//! Canned experiments built on [`run_config`].

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::interference::Preset;
use crate::protocols::{Protocol, RESPONDER};
use crate::time::Duration;

use super::runner::{run_config, AggregateResult};
use super::scenario::Scenario;

/// n-way handshakes for every `n` and preset, with and without CCA before
/// the first packet. Rows are grouped by preset, then CCA setting, then n.
pub fn sweep_nway(base: &Scenario, ns: RangeInclusive<u32>, presets: &[Preset]) -> Result<AggregateResult> {
    if *ns.start() < 2 || *ns.end() > 8 {
        return Err(Error::InvalidArgument(format!(
            "n range {}..={} must lie within 2..=8",
            ns.start(),
            ns.end()
        )));
    }
    let mut rows = Vec::new();
    for &preset in presets {
        let scenario = base.with_preset(preset);
        for cca in [true, false] {
            for n in ns.clone() {
                let mut cfg = scenario.config(Protocol::NWay { n });
                cfg.cca_before_first = cca;
                rows.push(run_config(&scenario, &cfg)?);
            }
        }
    }
    Ok(AggregateResult { rows })
}

/// One point of the energy/time trade-off.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontierRow {
    pub protocol: Protocol,
    pub source: String,
    /// Mean completion time per handshake.
    pub time_us: f64,
    /// Mean transmitter-on time per handshake, all nodes.
    pub tx_us: f64,
    /// Mean transmitter-on time of the responder alone.
    pub responder_tx_us: f64,
    pub da: f64,
}

/// `t_jam` from `step` to `max` in steps of `step`.
pub fn t_jam_grid(step: Duration, max: Duration) -> Vec<Duration> {
    let step_us = step.as_micros().max(1);
    (1..=max.as_micros() / step_us)
        .map(|i| Duration::from_micros(i * step_us))
        .collect()
}

/// Jam-2 over a grid of jam lengths and ACK trains over `trains`, all under
/// one preset.
pub fn energy_time_frontier(
    base: &Scenario,
    preset: Preset,
    t_jams: &[Duration],
    trains: RangeInclusive<u32>,
) -> Result<Vec<FrontierRow>> {
    let scenario = base.with_preset(preset);
    let protocols = t_jams
        .iter()
        .map(|&t_jam| Protocol::Jam2 { t_jam })
        .chain(trains.map(|trains| Protocol::AckTrain { trains }));
    let mut rows = Vec::new();
    for protocol in protocols {
        let cfg = scenario.config(protocol);
        cfg.validate(&scenario.timing)?;
        let result = run_config(&scenario, &cfg)?;
        let s = &result.summary;
        rows.push(FrontierRow {
            protocol,
            source: result.source,
            time_us: s.mean_duration_us,
            tx_us: s.tx_us,
            responder_tx_us: s.per_node.get(&RESPONDER).map_or(0.0, |r| r.tx_us),
            da: s.da,
        });
    }
    Ok(rows)
}

/// Jam-B against Ack-B with `receivers` receivers under each preset.
pub fn jamb_compare(base: &Scenario, receivers: u32, presets: &[Preset]) -> Result<AggregateResult> {
    let mut rows = Vec::new();
    for &preset in presets {
        let scenario = base.with_preset(preset);
        for protocol in [Protocol::jamb(receivers), Protocol::AckB { receivers }] {
            let cfg = scenario.config(protocol);
            cfg.validate(&scenario.timing)?;
            rows.push(run_config(&scenario, &cfg)?);
        }
    }
    Ok(AggregateResult { rows })
}
