//! CSV tables. Floats are written in shortest round-trip form so reruns with
//! the same seed are byte-identical.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

use super::runner::AggregateResult;
use super::sweeps::FrontierRow;

pub const RESULT_HEADER: [&str; 11] = [
    "protocol",
    "params",
    "source",
    "trials",
    "pa",
    "na",
    "da",
    "false_pos",
    "mean_duration_us",
    "tx_us",
    "rx_us",
];

pub fn write_results<W: Write>(result: &AggregateResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for row in &result.rows {
        let s = &row.summary;
        w.write_record([
            row.config.protocol.name().to_string(),
            row.params(),
            row.source.clone(),
            s.trials.to_string(),
            s.pa.to_string(),
            s.na.to_string(),
            s.da.to_string(),
            s.false_positive.to_string(),
            s.mean_duration_us.to_string(),
            s.tx_us.to_string(),
            s.rx_us.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &AggregateResult, path: &Path) -> Result<()> {
    write_results(result, std::fs::File::create(path)?)
}

pub fn write_frontier<W: Write>(rows: &[FrontierRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["protocol", "params", "source", "time_us", "tx_us", "responder_tx_us", "da"])?;
    for r in rows {
        w.write_record([
            r.protocol.name().to_string(),
            r.protocol.params(),
            r.source.clone(),
            r.time_us.to_string(),
            r.tx_us.to_string(),
            r.responder_tx_us.to_string(),
            r.da.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
