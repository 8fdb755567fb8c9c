//! `.jsonl` record files and CSV/JSON reports, each headed by the run
//! configuration.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use seqcf_core::metrics::ReportRow;
use seqcf_core::model::NORMALIZATION;

pub const HAMMING_RULE: &str = "right-aligned, shorter side front-padded with a null item";

/// Provenance notes shared by every output header.
pub fn provenance(command: &str, config: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "normalization": NORMALIZATION,
        "hamming": HAMMING_RULE,
        "config": config,
    })
}

pub fn write_jsonl<T: Serialize>(path: &Path, run_config: &Value, records: &[T]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&json!({ "run_config": run_config }))?);
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Reads a `.jsonl` file, returning the header's run configuration if the
/// first line carries one.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Option<Value>, Vec<T>)> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            let v: Value = serde_json::from_str(line)
                .with_context(|| format!("{}:1: invalid json", path.display()))?;
            if let Some(rc) = v.get("run_config") {
                header = Some(rc.clone());
                continue;
            }
        }
        records.push(
            serde_json::from_str(line)
                .with_context(|| format!("{}:{}: invalid record", path.display(), i + 1))?,
        );
    }
    Ok((header, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub fn render_report(rows: &[ReportRow], run_config: &Value, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&json!({
                "run_config": run_config,
                "rows": rows,
            }))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut out = format!("# run_config: {}\n", serde_json::to_string(run_config)?);
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            if rows.is_empty() {
                w.write_record(seqcf_core::metrics::REPORT_COLUMNS)?;
            }
            out.push_str(std::str::from_utf8(&w.into_inner()?)?);
            Ok(out)
        }
    }
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let rows = r
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    if rows.is_empty() {
        bail!("{} holds no report rows", path.display());
    }
    Ok(rows)
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: &str, fidelity: f64, ham: Option<f64>) -> ReportRow {
        ReportRow {
            method: "gece".into(),
            setting: "un_un".into(),
            dataset: "synth".into(),
            model: "markov".into(),
            seed: seed.into(),
            k: 1,
            fidelity,
            mean_hamming: ham,
            mean_levenshtein: ham,
            valid_fraction: fidelity,
            n_users: 4,
        }
    }

    #[test]
    fn csv_round_trip_skips_header_comments() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row("0", 0.5, Some(1.0)), row("1", 1.0, None)];
        let text = render_report(&rows, &json!({"a": 1}), ReportFormat::Csv).unwrap();
        assert!(text.starts_with("# run_config: {\"a\":1}\nmethod,setting,"));
        let p = dir.path().join("r.csv");
        fs::write(&p, text).unwrap();
        assert_eq!(read_report_csv(&p).unwrap(), rows);
    }

    #[test]
    fn jsonl_header_is_separated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_jsonl(&p, &json!({"seed": 1}), &[json!({"v": 1}), json!({"v": 2})]).unwrap();
        let (header, recs): (_, Vec<Value>) = read_jsonl(&p).unwrap();
        assert_eq!(header, Some(json!({"seed": 1})));
        assert_eq!(recs.len(), 2);
    }
}
