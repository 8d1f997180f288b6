//! Scenario files, the Monte Carlo driver, canned sweeps and CSV output.

mod csv_out;
mod runner;
mod scenario;
mod sweeps;

pub use csv_out::{emit_csv, write_frontier, write_results, RESULT_HEADER};
pub use runner::{run_config, run_scenario, run_trial, AggregateResult, ConfigResult, NodeRadio, Summary, Tally};
pub use scenario::{apply_override, Scenario, DEFAULT_HORIZON_US, DEFAULT_START_WINDOW_US};
pub use sweeps::{energy_time_frontier, jamb_compare, sweep_nway, t_jam_grid, FrontierRow};
