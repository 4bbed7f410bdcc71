//! Result files. Floats are written in shortest round-trip form, so every
//! value re-parses to the same bits.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, Source};
use crate::error::CliError;

pub const RESULTS: &str = "results.json";
pub const SUMMARY: &str = "summary.csv";
pub const MANIFEST: &str = "manifest.json";

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn write_manifest(dir: &Path, cfg: &RunConfig, provenance: &BTreeMap<String, Source>) -> Result<(), CliError> {
    let manifest = json!({
        "tool": "dyadnet",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "provenance": provenance,
    });
    write_json(&dir.join(MANIFEST), &manifest)
}

/// CSV with a header row and one record per entry of `rows`.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn num(v: f64) -> String {
    v.to_string()
}
