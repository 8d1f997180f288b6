//! Monte Carlo driver and aggregation.
//!
//! Every trial draws from four streams keyed by (seed, purpose, trial
//! index): the interference trace, the handshake start offset, the link and
//! the channel. None of them depend on which config is running, so all
//! configs of a scenario see the same traces, starts and links trial by
//! trial, which keeps comparisons between configs low-noise.

use std::collections::BTreeMap;

use crate::channel::NodeId;
use crate::error::Result;
use crate::interference::generate_trace;
use crate::protocols::{run_handshake, HandshakeConfig, Outcome, OutcomeRecord, TrialEnv};
use crate::rng::{RngStream, StreamId};
use crate::time::TimePoint;

use super::scenario::Scenario;

/// Runs one trial of `cfg` in `scenario`.
pub fn run_trial(scenario: &Scenario, cfg: &HandshakeConfig, trial: u64) -> Result<OutcomeRecord> {
    let stream = |label: &str| RngStream::new(scenario.seed, StreamId::label(label).with(trial));
    let trace = generate_trace(&scenario.source, scenario.horizon, &mut stream("trace"))?;
    let start_max = scenario.start_window.as_micros().saturating_sub(1);
    let start = TimePoint::from_micros(stream("start").uniform_u64(0, start_max));
    let link = cfg.draw_link(&mut stream("link"));
    let env = TrialEnv {
        timing: &scenario.timing,
        channel: &scenario.channel,
        trace: &trace,
        start,
        link,
    };
    Ok(run_handshake(cfg, &env, &mut stream("channel")))
}

/// Running totals over trials of one config. Merging is commutative and
/// associative, so trials may be folded in any grouping.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub trials: u64,
    pub pa: u64,
    pub na: u64,
    pub da: u64,
    pub false_positives: u64,
    /// Per-trial durations in µs, kept for percentiles.
    pub durations: Vec<u64>,
    /// Per node: summed tx and rx µs.
    pub radio: BTreeMap<NodeId, (u64, u64)>,
}

impl Tally {
    pub fn add(&mut self, rec: &OutcomeRecord) {
        self.trials += 1;
        match rec.outcome {
            Outcome::PositiveAgreement => self.pa += 1,
            Outcome::NegativeAgreement => self.na += 1,
            Outcome::Disagreement => self.da += 1,
        }
        self.false_positives += rec.false_positive as u64;
        self.durations.push(rec.duration.as_micros());
        for (&node, r) in &rec.radio {
            let e = self.radio.entry(node).or_default();
            e.0 += r.tx.as_micros();
            e.1 += r.rx.as_micros();
        }
    }

    pub fn merge(&mut self, other: Tally) {
        self.trials += other.trials;
        self.pa += other.pa;
        self.na += other.na;
        self.da += other.da;
        self.false_positives += other.false_positives;
        self.durations.extend(other.durations);
        for (node, (tx, rx)) in other.radio {
            let e = self.radio.entry(node).or_default();
            e.0 += tx;
            e.1 += rx;
        }
    }

    pub fn summarise(&self) -> Summary {
        let n = self.trials.max(1) as f64;
        let frac = |c: u64| c as f64 / n;
        let mut sorted = self.durations.clone();
        sorted.sort_unstable();
        let per_node: BTreeMap<NodeId, NodeRadio> = self
            .radio
            .iter()
            .map(|(&node, &(tx, rx))| {
                (
                    node,
                    NodeRadio {
                        tx_us: tx as f64 / n,
                        rx_us: rx as f64 / n,
                    },
                )
            })
            .collect();
        Summary {
            trials: self.trials,
            pa: frac(self.pa),
            na: frac(self.na),
            da: frac(self.da),
            false_positive: frac(self.false_positives),
            mean_duration_us: self.durations.iter().sum::<u64>() as f64 / n,
            p50_duration_us: percentile(&sorted, 0.50),
            p95_duration_us: percentile(&sorted, 0.95),
            tx_us: per_node.values().map(|r| r.tx_us).sum(),
            rx_us: per_node.values().map(|r| r.rx_us).sum(),
            per_node,
        }
    }
}

/// Nearest-rank percentile of sorted data; 0 when empty.
fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeRadio {
    pub tx_us: f64,
    pub rx_us: f64,
}

/// Per-config statistics. Fractions are of all trials.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub trials: u64,
    pub pa: f64,
    pub na: f64,
    pub da: f64,
    pub false_positive: f64,
    pub mean_duration_us: f64,
    pub p50_duration_us: u64,
    pub p95_duration_us: u64,
    /// Mean radio-on time per trial, summed over nodes.
    pub tx_us: f64,
    pub rx_us: f64,
    pub per_node: BTreeMap<NodeId, NodeRadio>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigResult {
    pub config: HandshakeConfig,
    pub source: String,
    pub summary: Summary,
}

impl ConfigResult {
    /// Parameter column: protocol parameters plus any non-default handshake
    /// setting that changes behaviour.
    pub fn params(&self) -> String {
        let mut params = self.config.protocol.params();
        if !self.config.cca_before_first {
            if !params.is_empty() {
                params.push(';');
            }
            params.push_str("cca=off");
        }
        params
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AggregateResult {
    pub rows: Vec<ConfigResult>,
}

impl AggregateResult {
    pub fn extend(&mut self, other: AggregateResult) {
        self.rows.extend(other.rows);
    }
}

pub fn run_config(scenario: &Scenario, cfg: &HandshakeConfig) -> Result<ConfigResult> {
    let mut tally = Tally::default();
    for trial in 0..scenario.trials {
        tally.add(&run_trial(scenario, cfg, trial)?);
    }
    Ok(ConfigResult {
        config: cfg.clone(),
        source: scenario.source_label.clone(),
        summary: tally.summarise(),
    })
}

pub fn run_scenario(scenario: &Scenario) -> Result<AggregateResult> {
    scenario.validate()?;
    let rows = scenario
        .configs
        .iter()
        .map(|cfg| run_config(scenario, cfg))
        .collect::<Result<_>>()?;
    Ok(AggregateResult { rows })
}
