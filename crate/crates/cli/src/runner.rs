//! Executes the cells of a run: one (benchmark, trial, noise level) each.

use std::time::Instant;

use featsr::data::{add_noise, generate, tyson_generate, Benchmark, Dataset, TysonConfig};
use featsr::expr::{EvalDomain, Expr};
use featsr::features::{run_stage1, write_library, AugmentedDataset, FeatureLibrary, Stage1Config};
use featsr::fmn::TrainTrace;
use featsr::gp::{search, write_front, GpConfig, ParetoFront};
use featsr::metrics::{dcg1, dcg2, efr, judge, judge_on, RankedFeatures, TrialOutcome, TOLERANT_TOL};
use rayon::prelude::*;

use crate::config::{Mode, RunConfig};
use crate::seeds::{trial_seed, TrialSeeds};
use crate::CliError;

/// Which search a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    /// Raw inputs only.
    Baseline,
    /// Raw inputs plus the top mined features.
    Features,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "sr-baseline",
            Variant::Features => "fepysr",
        }
    }

    pub fn from_name(s: &str) -> Option<Variant> {
        [Variant::Baseline, Variant::Features].into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub benchmark: String,
    pub trial: usize,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SearchRecord {
    pub cell: Cell,
    pub variant: Variant,
    pub generations: usize,
    pub outcome: TrialOutcome,
    /// Inlined form of the lowest-MSE front entry, over raw variables.
    pub best_expr: String,
    pub recovered_expr: Option<String>,
    /// Front file contents.
    pub front: String,
}

#[derive(Debug, Clone)]
pub struct ExtractRecord {
    pub cell: Cell,
    pub efr: f64,
    pub dcg1: f64,
    pub dcg2: f64,
    pub top: Vec<String>,
    /// Library file contents, with validity marks.
    pub library: String,
    pub traces: Vec<TrainTrace>,
}

#[derive(Debug, Clone)]
pub enum Record {
    Search(SearchRecord),
    Extract(ExtractRecord),
}

impl Record {
    pub fn cell(&self) -> &Cell {
        match self {
            Record::Search(s) => &s.cell,
            Record::Extract(e) => &e.cell,
        }
    }
}

/// What one cell computes.
struct Target<'a> {
    data: Dataset,
    truth: Expr,
    judge: Judge<'a>,
}

enum Judge<'a> {
    Registry(&'a Benchmark),
    /// Probe box from the data, looser tolerance.
    Box(EvalDomain),
}

/// Recorded generation counts to replay, keyed by variant.
pub type Replay<'a> = dyn Fn(&Cell, Variant) -> Option<usize> + Sync + 'a;

/// Every cell of `cfg`, in report order.
pub fn cells(cfg: &RunConfig) -> Vec<Cell> {
    let names: Vec<String> = if cfg.mode == Mode::OdeCase {
        vec!["Tyson".into()]
    } else {
        cfg.benchmarks.iter().map(|b| b.name.clone()).collect()
    };
    let mut out = Vec::new();
    for name in &names {
        for trial in 0..cfg.trials {
            for &alpha in &cfg.noise {
                out.push(Cell {
                    benchmark: name.clone(),
                    trial,
                    alpha,
                    seed: trial_seed(cfg.seed, name, trial),
                });
            }
        }
    }
    out
}

fn target(cfg: &RunConfig, cell: &Cell, seeds: &TrialSeeds) -> Result<Target<'static>, CliError> {
    let (data, truth, judge) = if cfg.mode == Mode::OdeCase {
        let tc = TysonConfig::default();
        let data = tyson_generate(&tc).map_err(|e| CliError::Runtime(e.to_string()))?;
        let intervals = data
            .x
            .columns()
            .into_iter()
            .map(|c| {
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        let dom = EvalDomain::new(intervals, EvalDomain::DEFAULT_PROBES, seeds.judge)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        (data, tc.truth(), Judge::Box(dom))
    } else {
        let b = cfg
            .benchmarks
            .iter()
            .find(|b| b.name == cell.benchmark)
            .ok_or_else(|| CliError::Runtime(format!("benchmark {} not in run", cell.benchmark)))?;
        let data = generate(b, seeds.data).map_err(|e| CliError::Runtime(format!("{}: {e}", b.name)))?;
        (data, b.truth.clone(), Judge::Registry(b))
    };
    Ok(Target {
        data: add_noise(&data, cell.alpha, seeds.noise),
        truth,
        judge,
    })
}

/// The (possibly noisy) dataset a cell trains on. Depends only on the
/// benchmark, noise level and trial seed, never on the mode.
pub fn dataset(cfg: &RunConfig, cell: &Cell) -> Result<Dataset, CliError> {
    Ok(target(cfg, cell, &TrialSeeds::new(cell.seed))?.data)
}

fn stage1(cfg: &RunConfig, data: &Dataset, seeds: &TrialSeeds) -> Result<featsr::features::Stage1Output, CliError> {
    let s1 = Stage1Config {
        fmn: cfg.fmn_for(data.dim()),
        num_experiments: cfg.num_experiments,
        num_workers: cfg.num_workers,
        pysr_num: cfg.pysr_num,
        base_seed: seeds.stage1,
    };
    run_stage1(&s1, data).map_err(|e| CliError::Runtime(format!("{}: {e}", data.provenance.benchmark)))
}

fn library_text(lib: &FeatureLibrary, valid: &[bool]) -> String {
    let mut buf = Vec::new();
    write_library(lib, Some(valid), &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("library text is UTF-8")
}

fn extract(cfg: &RunConfig, cell: &Cell, t: &Target, seeds: &TrialSeeds) -> Result<ExtractRecord, CliError> {
    let out = stage1(cfg, &t.data, seeds)?;
    let dom = match &t.judge {
        Judge::Registry(b) => b.domain(seeds.judge),
        Judge::Box(d) => d.clone(),
    };
    let valid: Vec<bool> = out
        .library
        .entries
        .iter()
        .map(|e| featsr::features::is_valid_feature(&e.expr, &t.truth, &dom))
        .collect();
    let ranked = RankedFeatures::from_library(&out.library, &t.truth, &dom)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(ExtractRecord {
        cell: cell.clone(),
        efr: efr(&ranked),
        dcg1: dcg1(&ranked),
        dcg2: dcg2(&ranked),
        top: out.library.entries.iter().take(cfg.pysr_num).map(|e| e.text.clone()).collect(),
        library: library_text(&out.library, &valid),
        traces: out.traces,
    })
}

fn run_search(
    cfg: &RunConfig,
    cell: &Cell,
    variant: Variant,
    t: &Target,
    aug: &AugmentedDataset,
    seeds: &TrialSeeds,
    replay: &Replay<'_>,
) -> Result<SearchRecord, CliError> {
    let gp = match replay(cell, variant) {
        Some(g) => GpConfig {
            iterations: g,
            time_budget: None,
            seed: seeds.search,
            ..cfg.gp.clone()
        },
        None => GpConfig {
            seed: seeds.search,
            ..cfg.gp.clone()
        },
    };
    let start = Instant::now();
    let result = search(aug.x.view(), aug.y.view(), &gp)
        .map_err(|e| CliError::Runtime(format!("{} trial {}: {e}", cell.benchmark, cell.trial)))?;
    let wall_time = start.elapsed();
    let inlined: Vec<Expr> = result.front.entries().map(|c| aug.inline(&c.expr)).collect();
    let recovery = match &t.judge {
        Judge::Registry(b) => judge(&inlined, b, seeds.judge),
        Judge::Box(dom) => judge_on(&inlined, &t.truth, dom, TOLERANT_TOL),
    };
    let raw = &aug.base.names;
    let best = best_entry(&result.front).map(|c| aug.inline(&c.expr).render(raw).to_string());
    let mut front = Vec::new();
    write_front(&result.front, &aug.names, raw, &|e| aug.inline(e), &mut front).expect("writing to memory");
    Ok(SearchRecord {
        cell: cell.clone(),
        variant,
        generations: result.generations,
        recovered_expr: recovery.as_ref().map(|r| r.expr.render(raw).to_string()),
        outcome: TrialOutcome {
            benchmark: cell.benchmark.clone(),
            seed: cell.seed,
            best_mse: result.front.best_mse(),
            wall_time,
            recovery,
        },
        best_expr: best.unwrap_or_default(),
        front: String::from_utf8(front).expect("front text is UTF-8"),
    })
}

fn best_entry(front: &ParetoFront) -> Option<&featsr::gp::Candidate> {
    front.entries().min_by(|a, b| a.mse.total_cmp(&b.mse))
}

/// Runs one cell; search modes return one record per variant.
pub fn run_cell(cfg: &RunConfig, cell: &Cell, replay: &Replay<'_>) -> Result<Vec<Record>, CliError> {
    let seeds = TrialSeeds::new(cell.seed);
    let t = target(cfg, cell, &seeds)?;
    let raw = || featsr::features::augment(&t.data, &[]).map_err(|e| CliError::Runtime(e.to_string()));
    let variants: &[Variant] = match cfg.mode {
        Mode::FmnExtract | Mode::NoiseSweep => {
            return Ok(vec![Record::Extract(extract(cfg, cell, &t, &seeds)?)]);
        }
        Mode::SrBaseline => &[Variant::Baseline],
        Mode::Fepysr => &[Variant::Features],
        Mode::MinMse | Mode::OdeCase => &[Variant::Baseline, Variant::Features],
    };
    let mut out = Vec::new();
    for &v in variants {
        let aug = match v {
            Variant::Baseline => raw()?,
            Variant::Features => stage1(cfg, &t.data, &seeds)?.augmented,
        };
        out.push(Record::Search(run_search(cfg, cell, v, &t, &aug, &seeds, replay)?));
    }
    Ok(out)
}

/// Runs every cell on a pool of `run.num_workers` threads. Records come back
/// in cell order whatever the scheduling.
pub fn run_all(cfg: &RunConfig, replay: &Replay<'_>) -> Result<Vec<Record>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.num_workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let cells = cells(cfg);
    let results: Vec<Result<Vec<Record>, CliError>> =
        pool.install(|| cells.par_iter().map(|c| run_cell(cfg, c, replay)).collect());
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
