//! Run manifests: the full config, its hash, and one line per record with
//! every seed and the values a replay must reproduce.
//!
//! ```text
//! # featsr-manifest 1
//! hash    <sha256 of the result-determining config>
//! config  <key>=<value>
//! search  <variant> <benchmark> <trial> <alpha> <seed> <generations> <best mse> <recovered|-> <front sha256> <wall s>
//! extract <benchmark> <trial> <alpha> <seed> <efr> <dcg1> <dcg2> <library sha256>
//! ```
//!
//! Fields are tab-separated; floats use the shortest round-trip form.

use std::collections::BTreeMap;
use std::io::Write;

use sha2::{Digest, Sha256};

use crate::config::{self, RunConfig};
use crate::runner::{Cell, Record, Variant};
use crate::CliError;

const MAGIC: &str = "# featsr-manifest 1";

fn sha(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Search {
        variant: Variant,
        cell: Cell,
        generations: usize,
        best_mse: f64,
        recovered: Option<String>,
        front_hash: String,
        wall_secs: f64,
    },
    Extract {
        cell: Cell,
        efr: f64,
        dcg1: f64,
        dcg2: f64,
        library_hash: String,
    },
}

impl Entry {
    pub fn from_record(r: &Record) -> Entry {
        match r {
            Record::Search(s) => Entry::Search {
                variant: s.variant,
                cell: s.cell.clone(),
                generations: s.generations,
                best_mse: s.outcome.best_mse,
                recovered: s.recovered_expr.clone(),
                front_hash: sha(&s.front),
                wall_secs: s.outcome.wall_time.as_secs_f64(),
            },
            Record::Extract(e) => Entry::Extract {
                cell: e.cell.clone(),
                efr: e.efr,
                dcg1: e.dcg1,
                dcg2: e.dcg2,
                library_hash: sha(&e.library),
            },
        }
    }

    pub fn cell(&self) -> &Cell {
        match self {
            Entry::Search { cell, .. } | Entry::Extract { cell, .. } => cell,
        }
    }

    pub fn line(&self) -> String {
        match self {
            Entry::Search {
                variant,
                cell,
                generations,
                best_mse,
                recovered,
                front_hash,
                wall_secs,
            } => format!(
                "search\t{}\t{}\t{}\t{:e}\t{}\t{generations}\t{best_mse:e}\t{}\t{front_hash}\t{wall_secs:.3}",
                variant.name(),
                cell.benchmark,
                cell.trial,
                cell.alpha,
                cell.seed,
                recovered.as_deref().unwrap_or("-"),
            ),
            Entry::Extract {
                cell,
                efr,
                dcg1,
                dcg2,
                library_hash,
            } => format!(
                "extract\t{}\t{}\t{:e}\t{}\t{efr:e}\t{dcg1:e}\t{dcg2:e}\t{library_hash}",
                cell.benchmark, cell.trial, cell.alpha, cell.seed,
            ),
        }
    }

    /// The line without wall time: what a replay must match.
    pub fn identity(&self) -> String {
        match self {
            Entry::Search { .. } => {
                let l = self.line();
                l[..l.rfind('\t').expect("search lines have fields")].to_string()
            }
            Entry::Extract { .. } => self.line(),
        }
    }

    fn parse(fields: &[&str]) -> Result<Entry, String> {
        fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad {what} `{s}`"))
        }
        let cell = |f: &[&str]| -> Result<Cell, String> {
            Ok(Cell {
                benchmark: f[0].to_string(),
                trial: num(f[1], "trial")?,
                alpha: num(f[2], "alpha")?,
                seed: num(f[3], "seed")?,
            })
        };
        match fields {
            ["search", v, rest @ ..] if rest.len() == 9 => Ok(Entry::Search {
                variant: Variant::from_name(v).ok_or_else(|| format!("unknown variant `{v}`"))?,
                cell: cell(&rest[..4])?,
                generations: num(rest[4], "generations")?,
                best_mse: num(rest[5], "mse")?,
                recovered: (rest[6] != "-").then(|| rest[6].to_string()),
                front_hash: rest[7].to_string(),
                wall_secs: num(rest[8], "wall time")?,
            }),
            ["extract", rest @ ..] if rest.len() == 8 => Ok(Entry::Extract {
                cell: cell(&rest[..4])?,
                efr: num(rest[4], "efr")?,
                dcg1: num(rest[5], "dcg1")?,
                dcg2: num(rest[6], "dcg2")?,
                library_hash: rest[7].to_string(),
            }),
            _ => Err(format!("unrecognized record `{}`", fields.join("\t"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub hash: String,
    /// Every config key as run, including execution-only keys.
    pub config: BTreeMap<String, String>,
    pub entries: Vec<Entry>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, records: &[Record]) -> Manifest {
        Manifest {
            hash: cfg.hash(),
            config: cfg.entries.clone(),
            entries: records.iter().map(Entry::from_record).collect(),
        }
    }

    pub fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "hash\t{}", self.hash)?;
        for (k, v) in &self.config {
            writeln!(out, "config\t{k}={v}")?;
        }
        for e in &self.entries {
            writeln!(out, "{}", e.line())?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Manifest, CliError> {
        let bad = |line: usize, msg: String| CliError::Manifest(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, MAGIC)) => {}
            _ => return Err(bad(1, "not a featsr manifest".into())),
        }
        let mut hash = None;
        let mut config = BTreeMap::new();
        let mut entries = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [""] => {}
                ["hash", h] => hash = Some(h.to_string()),
                ["config", kv] => {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| bad(i + 1, format!("bad config line `{kv}`")))?;
                    config.insert(k.to_string(), v.to_string());
                }
                f => entries.push(Entry::parse(f).map_err(|m| bad(i + 1, m))?),
            }
        }
        Ok(Manifest {
            hash: hash.ok_or_else(|| CliError::Manifest("missing hash line".into()))?,
            config,
            entries,
        })
    }

    /// Rebuilds the run config, checking it against the recorded hash.
    pub fn run_config(&self, overrides: &BTreeMap<String, String>) -> Result<RunConfig, CliError> {
        let mut entries = self.config.clone();
        for (k, v) in overrides {
            if !config::EXECUTION_KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(vec![format!(
                    "{k}: only execution keys ({}) may change on replay",
                    config::EXECUTION_KEYS.join(", ")
                )]));
            }
            entries.insert(k.clone(), v.clone());
        }
        let cfg = config::validate(&entries).map_err(CliError::Config)?;
        if cfg.hash() != self.hash {
            return Err(CliError::Manifest(format!(
                "config hash {} does not match recorded {}",
                cfg.hash(),
                self.hash
            )));
        }
        Ok(cfg)
    }

    /// Generation count recorded for a search cell.
    pub fn generations(&self, cell: &Cell, variant: Variant) -> Option<usize> {
        self.entries.iter().find_map(|e| match e {
            Entry::Search {
                variant: v,
                cell: c,
                generations,
                ..
            } if *v == variant && c == cell => Some(*generations),
            _ => None,
        })
    }
}

/// Lines of `expected` whose replayed counterpart differs or is missing.
pub fn compare(expected: &[Entry], replayed: &[Entry]) -> Vec<String> {
    let mut problems = Vec::new();
    if expected.len() != replayed.len() {
        problems.push(format!(
            "{} records recorded, {} replayed",
            expected.len(),
            replayed.len()
        ));
    }
    for (a, b) in expected.iter().zip(replayed) {
        if a.identity() != b.identity() {
            problems.push(format!("recorded: {}\nreplayed: {}", a.identity(), b.identity()));
        }
    }
    problems
}
