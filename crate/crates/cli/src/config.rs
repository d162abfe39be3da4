//! Flat `key=value` run configuration.
//!
//! Keys carry a section prefix (`run.`, `fmn.`, `gp.`). Blank lines and
//! lines starting with `#` are ignored. Every problem in a file is collected
//! before anything runs.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use featsr::data::{registry, Benchmark};
use featsr::expr::{BinaryOp, UnaryOp};
use featsr::fmn::FmnConfig;
use featsr::gp::GpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    FmnExtract,
    SrBaseline,
    Fepysr,
    NoiseSweep,
    MinMse,
    OdeCase,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::FmnExtract,
        Mode::SrBaseline,
        Mode::Fepysr,
        Mode::NoiseSweep,
        Mode::MinMse,
        Mode::OdeCase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::FmnExtract => "fmn-extract",
            Mode::SrBaseline => "sr-baseline",
            Mode::Fepysr => "fepysr",
            Mode::NoiseSweep => "noise-sweep",
            Mode::MinMse => "min-mse",
            Mode::OdeCase => "ode-case",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
                format!("unknown mode `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    /// Resolved benchmarks, in registry order. Empty for `ode-case`.
    pub benchmarks: Vec<&'static Benchmark>,
    pub trials: usize,
    pub noise: Vec<f64>,
    pub seed: u64,
    pub output: PathBuf,
    pub num_experiments: usize,
    pub num_workers: usize,
    /// Features injected into the search (top-K).
    pub pysr_num: usize,
    /// `None` picks the depth from each dataset's arity.
    pub net_depth: Option<usize>,
    pub fmn: FmnConfig,
    pub gp: GpConfig,
    /// Every key as written after defaults are applied, sorted.
    pub entries: BTreeMap<String, String>,
}

/// Keys that change how a run executes but not what it computes; they are
/// left out of the config hash.
pub const EXECUTION_KEYS: [&str; 2] = ["run.num_workers", "run.output"];

/// Defaults for every recognized key.
pub fn defaults() -> BTreeMap<String, String> {
    let f = FmnConfig::default();
    let g = GpConfig::default();
    let pairs: Vec<(&str, String)> = vec![
        ("run.benchmark", "Nguyen-1".into()),
        ("run.mode", "fepysr".into()),
        ("run.trials", "10".into()),
        ("run.noise", "0".into()),
        ("run.seed", "0".into()),
        ("run.output", "out".into()),
        ("run.num_experiments", "16".into()),
        ("run.num_workers", "8".into()),
        ("run.pysr_num", "4".into()),
        ("fmn.batch_size", f.batch_size.to_string()),
        ("fmn.learning_rate", f.learning_rate.to_string()),
        ("fmn.epochs", f.epochs.to_string()),
        ("fmn.net_depth", f.depth.to_string()),
        ("fmn.lambda1", f.lambda1.to_string()),
        ("fmn.lambda2", f.lambda2.to_string()),
        ("fmn.init_scale", f.init_scale.to_string()),
        ("gp.population", g.population.to_string()),
        ("gp.iterations", g.iterations.to_string()),
        ("gp.tournament", g.tournament.to_string()),
        ("gp.max_complexity", g.max_complexity.to_string()),
        ("gp.parsimony", g.parsimony.to_string()),
        (
            "gp.time_budget",
            g.time_budget.map_or("0".into(), |d| d.as_secs_f64().to_string()),
        ),
        ("gp.refine_constants", g.refine_constants.to_string()),
        (
            "gp.unary_ops",
            g.unary_ops.iter().map(|o| o.name()).collect::<Vec<_>>().join(","),
        ),
        (
            "gp.binary_ops",
            g.binary_ops.iter().map(|o| o.name()).collect::<Vec<_>>().join(","),
        ),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Reads `key=value` lines; the result still needs [`validate`].
pub fn parse_lines(text: &str) -> Result<BTreeMap<String, String>, Vec<String>> {
    let mut out = BTreeMap::new();
    let mut problems = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                out.insert(k.trim().to_string(), v.trim().to_string());
            }
            _ => problems.push(format!("line {}: expected key=value, got `{line}`", i + 1)),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(problems)
    }
}

struct Reader<'a> {
    entries: &'a BTreeMap<String, String>,
    problems: Vec<String>,
}

impl Reader<'_> {
    fn get<T: FromStr>(&mut self, key: &str) -> Option<T> {
        let raw = &self.entries[key];
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.problems.push(format!("{key}: cannot read `{raw}`"));
                None
            }
        }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.problems.push(msg.into());
        }
    }
}

/// Benchmarks matching a comma-separated list of names or glob patterns.
pub fn select_benchmarks(selector: &str) -> Result<Vec<&'static Benchmark>, Vec<String>> {
    let mut problems = Vec::new();
    let mut picked = vec![false; registry().len()];
    for part in selector.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match glob::Pattern::new(part) {
            Ok(p) => {
                let mut hit = false;
                for (i, b) in registry().iter().enumerate() {
                    if p.matches(&b.name) {
                        picked[i] = true;
                        hit = true;
                    }
                }
                if !hit {
                    problems.push(format!("run.benchmark: unknown benchmark `{part}`"));
                }
            }
            Err(e) => problems.push(format!("run.benchmark: bad pattern `{part}`: {e}")),
        }
    }
    if problems.is_empty() && !picked.contains(&true) {
        problems.push("run.benchmark: no benchmark selected".into());
    }
    if problems.is_empty() {
        Ok(registry()
            .iter()
            .zip(picked)
            .filter(|(_, p)| *p)
            .map(|(b, _)| b)
            .collect())
    } else {
        Err(problems)
    }
}

fn list<T>(raw: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| s.to_string()))
        .collect()
}

/// Applies `overrides` on top of the defaults and validates the result,
/// listing every problem found.
pub fn validate(overrides: &BTreeMap<String, String>) -> Result<RunConfig, Vec<String>> {
    let mut entries = defaults();
    let mut problems = Vec::new();
    for (k, v) in overrides {
        if entries.contains_key(k) {
            entries.insert(k.clone(), v.clone());
        } else {
            problems.push(format!("{k}: unknown key"));
        }
    }
    let mut r = Reader {
        entries: &entries,
        problems,
    };

    let mode: Option<Mode> = match entries["run.mode"].parse() {
        Ok(m) => Some(m),
        Err(e) => {
            r.problems.push(format!("run.mode: {e}"));
            None
        }
    };
    let benchmarks = if mode == Some(Mode::OdeCase) {
        Vec::new()
    } else {
        match select_benchmarks(&entries["run.benchmark"]) {
            Ok(b) => b,
            Err(p) => {
                r.problems.extend(p);
                Vec::new()
            }
        }
    };
    let trials: Option<usize> = r.get("run.trials");
    r.check(trials.is_none_or(|t| t >= 1), "run.trials: must be >= 1");
    let noise = match list(&entries["run.noise"], |s| s.parse::<f64>().ok()) {
        Ok(v) => {
            r.check(!v.is_empty(), "run.noise: need at least one level");
            r.check(
                v.iter().all(|a| a.is_finite() && *a >= 0.0),
                "run.noise: levels must be finite and >= 0",
            );
            v
        }
        Err(bad) => {
            r.problems.push(format!("run.noise: cannot read `{bad}`"));
            Vec::new()
        }
    };
    let seed: Option<u64> = r.get("run.seed");
    let output = PathBuf::from(&entries["run.output"]);
    let num_experiments: Option<usize> = r.get("run.num_experiments");
    r.check(num_experiments.is_none_or(|v| v >= 1), "run.num_experiments: must be >= 1");
    let num_workers: Option<usize> = r.get("run.num_workers");
    r.check(num_workers.is_none_or(|v| v >= 1), "run.num_workers: must be >= 1");
    let pysr_num: Option<usize> = r.get("run.pysr_num");
    r.check(pysr_num.is_none_or(|v| v >= 1), "run.pysr_num: must be >= 1");

    let net_depth = if entries["fmn.net_depth"] == "auto" {
        Some(None)
    } else {
        r.get::<usize>("fmn.net_depth").map(Some)
    };
    let mut fmn = FmnConfig::default();
    if let Some(v) = r.get("fmn.batch_size") {
        fmn.batch_size = v;
    }
    if let Some(v) = r.get("fmn.learning_rate") {
        fmn.learning_rate = v;
    }
    if let Some(v) = r.get("fmn.epochs") {
        fmn.epochs = v;
    }
    if let Some(v) = r.get("fmn.lambda1") {
        fmn.lambda1 = v;
    }
    if let Some(v) = r.get("fmn.lambda2") {
        fmn.lambda2 = v;
    }
    if let Some(v) = r.get("fmn.init_scale") {
        fmn.init_scale = v;
    }
    if let Some(Some(d)) = net_depth {
        fmn.depth = d;
    }
    if let Err(e) = fmn.validate() {
        r.problems.push(format!("fmn: {e}"));
    }

    let mut gp = GpConfig::default();
    if let Some(v) = r.get("gp.population") {
        gp.population = v;
    }
    if let Some(v) = r.get("gp.iterations") {
        gp.iterations = v;
    }
    if let Some(v) = r.get("gp.tournament") {
        gp.tournament = v;
    }
    if let Some(v) = r.get("gp.max_complexity") {
        gp.max_complexity = v;
    }
    if let Some(v) = r.get("gp.parsimony") {
        gp.parsimony = v;
    }
    if let Some(v) = r.get::<f64>("gp.time_budget") {
        if v.is_finite() && v >= 0.0 {
            gp.time_budget = (v > 0.0).then(|| Duration::from_secs_f64(v));
        } else {
            r.problems.push("gp.time_budget: must be >= 0 seconds (0 = none)".into());
        }
    }
    if let Some(v) = r.get("gp.refine_constants") {
        gp.refine_constants = v;
    }
    match list(&entries["gp.unary_ops"], UnaryOp::from_name) {
        Ok(v) => gp.unary_ops = v,
        Err(bad) => r.problems.push(format!("gp.unary_ops: unknown operator `{bad}`")),
    }
    match list(&entries["gp.binary_ops"], BinaryOp::from_name) {
        Ok(v) => gp.binary_ops = v,
        Err(bad) => r.problems.push(format!("gp.binary_ops: unknown operator `{bad}`")),
    }
    if let Err(e) = gp.validate() {
        r.problems.push(format!("gp: {e}"));
    }

    let problems = r.problems;
    if !problems.is_empty() {
        return Err(problems);
    }
    Ok(RunConfig {
        mode: mode.unwrap(),
        benchmarks,
        trials: trials.unwrap(),
        noise,
        seed: seed.unwrap(),
        output,
        num_experiments: num_experiments.unwrap(),
        num_workers: num_workers.unwrap(),
        pysr_num: pysr_num.unwrap(),
        net_depth: net_depth.unwrap(),
        fmn,
        gp,
        entries,
    })
}

impl RunConfig {
    /// Canonical text of the keys that determine results, one per line.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| !EXECUTION_KEYS.contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Hex SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// FMN settings for a dataset of `arity` inputs.
    pub fn fmn_for(&self, arity: usize) -> FmnConfig {
        FmnConfig {
            depth: self.net_depth.unwrap_or_else(|| FmnConfig::default_depth(arity)),
            ..self.fmn.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<RunConfig, Vec<String>> {
        validate(&parse_lines(text).unwrap())
    }

    #[test]
    fn table_names_are_keys() {
        let c = cfg("fmn.batch_size=50\nfmn.learning_rate=0.5\nfmn.epochs=100\nfmn.net_depth=4\n\
                     run.num_experiments=16\nrun.num_workers=8\nrun.pysr_num=4\n")
        .unwrap();
        assert_eq!(c.fmn.batch_size, 50);
        assert_eq!(c.fmn.learning_rate, 0.5);
        assert_eq!(c.fmn.epochs, 100);
        assert_eq!(c.net_depth, Some(4));
        assert_eq!((c.num_experiments, c.num_workers, c.pysr_num), (16, 8, 4));
    }

    #[test]
    fn every_problem_is_listed() {
        let p = cfg("run.trials=0\nrun.noise=0,-1\nrun.mode=bogus\nrun.benchmark=Nope-7\nfoo.bar=1\ngp.population=x\n")
            .unwrap_err();
        assert_eq!(p.len(), 6, "{p:?}");
    }

    #[test]
    fn globs_and_lists_select_in_registry_order() {
        let c = cfg("run.benchmark=Nguyen-1?,Nguyen-2").unwrap();
        let names: Vec<_> = c.benchmarks.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, ["Nguyen-2", "Nguyen-10", "Nguyen-11", "Nguyen-12", "Nguyen-1c"]);
    }

    #[test]
    fn hash_ignores_execution_keys() {
        let a = cfg("run.num_workers=1\nrun.output=a").unwrap();
        let b = cfg("run.num_workers=7\nrun.output=b").unwrap();
        let c = cfg("run.seed=1").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn malformed_lines_are_reported() {
        assert_eq!(parse_lines("# c\n\nnovalue\n=3\n").unwrap_err().len(), 2);
    }
}
