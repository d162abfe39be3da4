//! Batch experiments over the featsr pipeline: configuration, seeded trial
//! execution, manifests and reports.

pub mod config;
pub mod manifest;
pub mod report;
pub mod runner;
pub mod seeds;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use config::RunConfig;
use manifest::{compare, Entry, Manifest};
use runner::Record;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration problems:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("replay differs from the manifest:\n{}", .0.join("\n"))]
    ReplayMismatch(Vec<String>),
}

impl CliError {
    /// 1 for configuration errors, 2 for everything that failed while
    /// running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Reads a config file and applies `key=value` overrides on top.
pub fn load_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut entries = BTreeMap::new();
    let mut problems = Vec::new();
    if let Some(p) = path {
        match fs::read_to_string(p) {
            Ok(text) => match config::parse_lines(&text) {
                Ok(e) => entries = e,
                Err(p) => problems.extend(p),
            },
            Err(e) => problems.push(format!("{}: {e}", p.display())),
        }
    }
    for s in sets {
        match s.split_once('=') {
            Some((k, v)) => {
                entries.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => problems.push(format!("--set {s}: expected key=value")),
        }
    }
    match config::validate(&entries) {
        Ok(c) if problems.is_empty() => Ok(c),
        Ok(_) => Err(CliError::Config(problems)),
        Err(p) => {
            problems.extend(p);
            Err(CliError::Config(problems))
        }
    }
}

/// Runs `cfg` and writes its reports and manifest to `run.output`.
pub fn run(cfg: &RunConfig) -> Result<(Vec<Record>, Manifest), CliError> {
    fs::create_dir_all(&cfg.output)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.output.display())))?;
    let records = runner::run_all(cfg, &|_, _| None)?;
    let manifest = Manifest::new(cfg, &records);
    report::write_run(&cfg.output, &records, &manifest)?;
    Ok((records, manifest))
}

/// Re-executes a manifest and checks every record against it. Only
/// execution keys (worker count, output directory) may be overridden.
pub fn replay(manifest: &Manifest, overrides: &BTreeMap<String, String>) -> Result<Vec<Record>, CliError> {
    let cfg = manifest.run_config(overrides)?;
    let records = runner::run_all(&cfg, &|cell, variant| manifest.generations(cell, variant))?;
    let replayed: Vec<Entry> = records.iter().map(Entry::from_record).collect();
    let problems = compare(&manifest.entries, &replayed);
    if problems.is_empty() {
        Ok(records)
    } else {
        Err(CliError::ReplayMismatch(problems))
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Manifest::parse(&text)
}
