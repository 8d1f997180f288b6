#![allow(dead_code)]

use std::path::{Path, PathBuf};

use agreement_sim::harness::{run_scenario, write_results, Scenario};

pub const GOLDEN_SCENARIOS: [&str; 8] = ["nway", "ack2", "ack_train", "jam2", "ack3", "jam3", "jamb", "ackb"];

pub fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

pub fn scenario_path(name: &str) -> PathBuf {
    tests_dir().join("scenarios").join(format!("{name}.toml"))
}

pub fn golden_path(name: &str) -> PathBuf {
    tests_dir().join("golden").join(format!("{name}.csv"))
}

/// CSV text produced by running a scenario file.
pub fn run_to_csv(path: &Path) -> String {
    let scenario = Scenario::load(path, &[]).expect("scenario parses");
    let result = run_scenario(&scenario).expect("scenario runs");
    let mut buf = Vec::new();
    write_results(&result, &mut buf).expect("csv writes");
    String::from_utf8(buf).expect("utf-8 csv")
}

/// Compares a scenario's output with its golden file. Set `UPDATE_GOLDEN=1`
/// to rewrite the golden files instead.
pub fn check_golden(name: &str) -> Result<(), String> {
    let got = run_to_csv(&scenario_path(name));
    let golden = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &got).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let want = std::fs::read_to_string(&golden).map_err(|e| format!("{}: {e}", golden.display()))?;
    if got == want {
        Ok(())
    } else {
        Err(format!("{name}: output differs from {}\n--- got\n{got}--- want\n{want}", golden.display()))
    }
}
