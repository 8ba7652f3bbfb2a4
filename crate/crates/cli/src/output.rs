//! Atomic file output and run manifests.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rsf_core::RawTable;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Write through a sibling temporary file and rename into place, so readers
/// never see a half-written output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("moving into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    write_atomic(path, &w.into_inner()?)
}

pub fn write_table(path: &Path, table: &RawTable) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    write_atomic(path, &w.into_inner()?)
}

/// Everything needed to rerun a command: resolved configuration, command
/// arguments and the tool version. No clocks or host details, so reruns
/// reproduce it byte for byte.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub arguments: serde_json::Value,
    pub config: &'a ExperimentConfig,
    pub outputs: Vec<String>,
}

pub fn write_manifest(
    config: &ExperimentConfig,
    command: &str,
    arguments: serde_json::Value,
    outputs: &[PathBuf],
) -> anyhow::Result<PathBuf> {
    let manifest = Manifest {
        tool: "rsf",
        version: env!("CARGO_PKG_VERSION"),
        command,
        arguments,
        config,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = config.out_dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}
