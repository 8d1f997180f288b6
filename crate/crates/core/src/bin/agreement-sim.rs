use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use agreement_sim::analytics::{outcome_surfaces, packet_success_exponential, packet_success_periodic};
use agreement_sim::harness::{
    emit_csv, energy_time_frontier, jamb_compare, run_scenario, sweep_nway, t_jam_grid, write_frontier,
    write_results, AggregateResult, Scenario,
};
use agreement_sim::interference::Preset;
use agreement_sim::{Duration, Result};

#[derive(Parser)]
#[command(name = "agreement-sim", version, about = "Agreement handshake simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form tables: outcome surfaces over (p, n) or packet-success curves.
    Analytic {
        #[arg(long, value_enum, default_value_t = AnalyticKind::Outcomes)]
        kind: AnalyticKind,
        /// Grid resolution for p.
        #[arg(long, default_value_t = 20)]
        steps: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// n-way handshakes for n in 2..=8 under each source, with and without CCA.
    SweepNway {
        #[arg(long, default_value_t = 2)]
        n_min: u32,
        #[arg(long, default_value_t = 8)]
        n_max: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Jam-2 over a t_jam grid against ACK trains of 1..=T.
    Frontier {
        #[arg(long, default_value_t = 100)]
        t_jam_step: u64,
        #[arg(long, default_value_t = 6000)]
        t_jam_max: u64,
        #[arg(long, default_value_t = 8)]
        max_trains: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Jam-B against Ack-B under each source.
    JambCompare {
        #[arg(long, default_value_t = 6)]
        receivers: u32,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyticKind {
    Outcomes,
    PacketSuccess,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Interference preset; repeatable for sweeps.
    #[arg(long = "source")]
    sources: Vec<Preset>,
    /// Scenario edit as dotted.key=value; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

const SWEEP_DEFAULTS: &str = "seed = 1\ntrials = 10000\n";

impl Common {
    /// Flag values folded into the override list, flags last so they win.
    fn edits(&self) -> Vec<String> {
        let mut edits = self.overrides.clone();
        if let Some(seed) = self.seed {
            edits.push(format!("seed={seed}"));
        }
        if let Some(trials) = self.trials {
            edits.push(format!("trials={trials}"));
        }
        edits
    }

    fn base(&self) -> Result<Scenario> {
        Scenario::parse(SWEEP_DEFAULTS, Path::new("<defaults>"), &self.edits())
    }

    fn sources_or(&self, default: &[Preset]) -> Vec<Preset> {
        if self.sources.is_empty() {
            default.to_vec()
        } else {
            self.sources.clone()
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_table(out: Option<&Path>, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_out(out)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn analytic(kind: AnalyticKind, steps: u32, out: Option<&Path>) -> Result<()> {
    match kind {
        AnalyticKind::Outcomes => {
            let rows = outcome_surfaces(steps, 2..=8)?
                .into_iter()
                .map(|s| {
                    vec![
                        s.p.to_string(),
                        s.n.to_string(),
                        s.probs.pa.to_string(),
                        s.probs.na.to_string(),
                        s.probs.da.to_string(),
                    ]
                })
                .collect();
            write_table(out, &["p", "n", "pa", "na", "da"], rows)
        }
        AnalyticKind::PacketSuccess => {
            let us = Duration::from_micros;
            let mut rows = Vec::new();
            for t_pkt in (0..=10_000).step_by(100) {
                let p = packet_success_periodic(us(10_000), us(t_pkt))?;
                rows.push(vec!["periodic".into(), "10000".into(), t_pkt.to_string(), p.to_string()]);
                for mean in [500, 1875, 5000] {
                    let p = packet_success_exponential(us(mean), us(t_pkt))?;
                    rows.push(vec!["exponential".into(), mean.to_string(), t_pkt.to_string(), p.to_string()]);
                }
            }
            write_table(out, &["model", "idle_us", "t_pkt_us", "p_success"], rows)
        }
    }
}

fn emit(result: &AggregateResult, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => emit_csv(result, path),
        None => write_results(result, std::io::stdout().lock()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analytic { kind, steps, out } => analytic(kind, steps, out.as_deref()),
        Command::Run { scenario, common } => {
            let mut edits = common.edits();
            if let Some(source) = common.sources.last() {
                edits.push(format!("interference.preset={source}"));
            }
            let scenario = Scenario::load(&scenario, &edits)?;
            let result = run_scenario(&scenario)?;
            emit(&result, common.out.as_deref().or(scenario.output.as_deref()))
        }
        Command::SweepNway { n_min, n_max, common } => {
            let presets = common.sources_or(&Preset::INTERFERING);
            let result = sweep_nway(&common.base()?, n_min..=n_max, &presets)?;
            emit(&result, common.out.as_deref())
        }
        Command::Frontier {
            t_jam_step,
            t_jam_max,
            max_trains,
            common,
        } => {
            let base = common.base()?;
            let grid = t_jam_grid(Duration::from_micros(t_jam_step), Duration::from_micros(t_jam_max));
            let mut rows = Vec::new();
            for preset in common.sources_or(&[Preset::Oven]) {
                rows.extend(energy_time_frontier(&base, preset, &grid, 1..=max_trains)?);
            }
            write_frontier(&rows, open_out(common.out.as_deref())?)
        }
        Command::JambCompare { receivers, common } => {
            let presets = common.sources_or(&Preset::ALL);
            let result = jamb_compare(&common.base()?, receivers, &presets)?;
            emit(&result, common.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
