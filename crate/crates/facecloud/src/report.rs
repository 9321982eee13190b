//! CSV and JSON report writers. Every file carries the config digest.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{AppError, AppResult};

/// CSV text whose first line is `# config <digest>`.
pub fn csv_string(digest: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(format!("# config {digest}\n").into_bytes());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_csv(path: &Path, digest: &str, header: &[&str], rows: &[Vec<String>]) -> AppResult<()> {
    fs::write(path, csv_string(digest, header, rows)).map_err(|e| AppError::io(path, e))
}

/// Reads back a CSV written by [`write_csv`], skipping the digest line.
pub fn read_csv(path: &Path) -> AppResult<(String, Vec<csv::StringRecord>)> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let digest = first.strip_prefix("# config ").ok_or_else(|| AppError::parse(path, "missing config line"))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(|e| AppError::parse(path, e))?;
    Ok((digest.to_string(), rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    fs::write(path, s).map_err(|e| AppError::io(path, e))
}

/// Shortest round-trip decimal.
pub fn num(v: f64) -> String {
    format!("{v}")
}
