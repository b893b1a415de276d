//! CSV and metadata output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::runner::{MetricsRow, MetricsTable, TrialRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "preset,snr_db,method,rmse_deg,prob_resolution,trials,failures";
pub const CSV_FILE: &str = "results.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const TRIAL_LOG_FILE: &str = "trials.jsonl";

fn fmt6(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.6}")
    }
}

fn parse6(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::InvalidArgument(format!("bad number {s:?} in report")))
}

pub fn format_csv(table: &MetricsTable) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))?;
    for r in &table.rows {
        w.write_record([
            r.preset.clone(),
            fmt6(r.snr_db.unwrap_or(f64::INFINITY)),
            r.method.to_string(),
            fmt6(r.rmse_deg),
            r.prob_resolution.map(fmt6).unwrap_or_default(),
            r.trials.to_string(),
            r.failures.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV fields are UTF-8"))
}

pub fn parse_csv(text: &str) -> Result<MetricsTable> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::InvalidArgument(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let snr = parse6(&rec[1])?;
        rows.push(MetricsRow {
            preset: rec[0].to_string(),
            snr_db: snr.is_finite().then_some(snr),
            method: rec[2].parse()?,
            rmse_deg: parse6(&rec[3])?,
            prob_resolution: if rec[4].is_empty() {
                None
            } else {
                Some(parse6(&rec[4])?)
            },
            trials: rec[5]
                .parse()
                .map_err(|_| Error::InvalidArgument("bad trial count".into()))?,
            failures: rec[6]
                .parse()
                .map_err(|_| Error::InvalidArgument("bad failure count".into()))?,
        });
    }
    Ok(MetricsTable { rows })
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'static str,
    seed: u64,
    workers: usize,
    total_trials: usize,
    total_failures: usize,
    config: &'a ExperimentConfig,
}

/// Write `results.csv` and `metadata.json` (and the per-trial log when given)
/// into `dir`, creating it if needed.
pub fn emit_report(
    table: &MetricsTable,
    config: &ExperimentConfig,
    workers: usize,
    trials: Option<&[TrialRecord]>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("nothing to report".into()));
    }
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(CSV_FILE);
    fs::write(&csv_path, format_csv(table)?)?;
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        workers,
        total_trials: table.total_trials(),
        total_failures: table.total_failures(),
        config,
    };
    let meta_path = dir.join(METADATA_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    let mut written = vec![csv_path, meta_path];
    if let Some(trials) = trials {
        let path = dir.join(TRIAL_LOG_FILE);
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        for t in trials {
            serde_json::to_writer(&mut f, t)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        written.push(path);
    }
    Ok(written)
}
