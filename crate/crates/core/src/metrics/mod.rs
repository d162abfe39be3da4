//! Recovery judging, feature-ranking scores and min-MSE summaries.

use std::time::Duration;

use thiserror::Error;

use crate::data::Benchmark;
use crate::expr::{equivalent, snap_constants, EvalDomain, Expr};
use crate::features::{is_valid_feature, FeatureLibrary};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no outcomes")]
    Empty,
    #[error("ranked list holds {0} entries, more than 10")]
    TooMany(usize),
    #[error("frequencies must be positive and non-increasing")]
    BadFrequencies,
    #[error("validity mask has {mask} flags for {entries} entries")]
    MaskLength { mask: usize, entries: usize },
    #[error("every trial of side {0} recovered the target; nothing to compare")]
    AllRecovered(char),
    #[error("outcomes mix benchmarks {0} and {1}")]
    MixedBenchmarks(String, String),
}

/// Constants this close to an integer or half-integer are snapped before
/// judging.
pub const SNAP_TOL: f64 = 1e-4;
pub const STRICT_TOL: f64 = 1e-9;
pub const TOLERANT_TOL: f64 = 1e-6;

/// How an equivalence verdict was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub probes: usize,
    pub domain_seed: u64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// The snapped expression that matched the ground truth.
    pub expr: Expr,
    pub certificate: Certificate,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub benchmark: String,
    pub seed: u64,
    pub best_mse: f64,
    pub wall_time: Duration,
    pub recovery: Option<Recovery>,
}

impl TrialOutcome {
    pub fn recovered(&self) -> bool {
        self.recovery.is_some()
    }
}

/// Wall time is ignored: replays must compare equal.
impl PartialEq for TrialOutcome {
    fn eq(&self, other: &Self) -> bool {
        self.benchmark == other.benchmark
            && self.seed == other.seed
            && self.best_mse.to_bits() == other.best_mse.to_bits()
            && self.recovery == other.recovery
    }
}

/// The first candidate that matches `b`'s ground truth after snapping.
pub fn judge(candidates: &[Expr], b: &Benchmark, domain_seed: u64) -> Option<Recovery> {
    let dom = b.domain(domain_seed);
    let rel_tol = if b.constant_tolerant { TOLERANT_TOL } else { STRICT_TOL };
    judge_on(candidates, &b.truth, &dom, rel_tol)
}

pub fn judge_on(candidates: &[Expr], truth: &Expr, dom: &EvalDomain, rel_tol: f64) -> Option<Recovery> {
    candidates.iter().find_map(|c| {
        let snapped = snap_constants(c, SNAP_TOL);
        matches!(equivalent(&snapped, truth, dom, rel_tol), Ok(true)).then(|| Recovery {
            expr: snapped,
            certificate: Certificate {
                probes: dom.probes,
                domain_seed: dom.seed,
                rel_tol,
            },
        })
    })
}

pub fn recovery_rate(outcomes: &[TrialOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hit = outcomes.iter().filter(|o| o.recovered()).count();
    Ok(hit as f64 / outcomes.len() as f64)
}

/// Top features with their frequencies and validity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeatures {
    entries: Vec<(Expr, usize)>,
    valid: Vec<bool>,
}

impl RankedFeatures {
    pub const MAX: usize = 10;

    pub fn new(entries: Vec<(Expr, usize)>, valid: Vec<bool>) -> Result<Self, MetricsError> {
        if entries.is_empty() {
            return Err(MetricsError::Empty);
        }
        if entries.len() > Self::MAX {
            return Err(MetricsError::TooMany(entries.len()));
        }
        if valid.len() != entries.len() {
            return Err(MetricsError::MaskLength {
                mask: valid.len(),
                entries: entries.len(),
            });
        }
        let ok = entries.iter().all(|e| e.1 > 0) && entries.windows(2).all(|w| w[0].1 >= w[1].1);
        if !ok {
            return Err(MetricsError::BadFrequencies);
        }
        Ok(RankedFeatures { entries, valid })
    }

    /// The library's first ten entries, judged against `truth`.
    pub fn from_library(lib: &FeatureLibrary, truth: &Expr, dom: &EvalDomain) -> Result<Self, MetricsError> {
        let entries: Vec<(Expr, usize)> = lib
            .entries
            .iter()
            .take(Self::MAX)
            .map(|e| (e.expr.clone(), e.frequency))
            .collect();
        let valid = entries
            .iter()
            .map(|(e, _)| is_valid_feature(e, truth, dom))
            .collect();
        Self::new(entries, valid)
    }

    pub fn entries(&self) -> &[(Expr, usize)] {
        &self.entries
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    fn ranked(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        self.entries
            .iter()
            .zip(&self.valid)
            .enumerate()
            .map(|(i, ((_, f), &v))| (((i + 2) as f64).log2(), *f as f64, v))
    }
}

/// Share of top-10 frequency carried by valid features.
pub fn efr(r: &RankedFeatures) -> f64 {
    let total: f64 = r.ranked().map(|(_, f, _)| f).sum();
    let valid: f64 = r.ranked().filter(|t| t.2).map(|(_, f, _)| f).sum();
    valid / total
}

/// Rank-discounted count of valid features.
pub fn dcg1(r: &RankedFeatures) -> f64 {
    r.ranked().filter(|t| t.2).map(|(d, _, _)| 1.0 / d).sum()
}

/// Rank-discounted frequency of valid features.
pub fn dcg2(r: &RankedFeatures) -> f64 {
    r.ranked().filter(|t| t.2).map(|(d, f, _)| f / d).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseComparison {
    pub min_a: f64,
    pub min_b: f64,
    /// `min_a / min_b`; below 1 means side `a` came closer.
    pub ratio: f64,
}

/// Minimum best-MSE of each side over its unrecovered trials.
pub fn min_mse_comparison(a: &[TrialOutcome], b: &[TrialOutcome]) -> Result<MseComparison, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty);
    }
    let name = &a[0].benchmark;
    if let Some(o) = a.iter().chain(b).find(|o| &o.benchmark != name) {
        return Err(MetricsError::MixedBenchmarks(name.clone(), o.benchmark.clone()));
    }
    let min = |side: &[TrialOutcome], label: char| {
        side.iter()
            .filter(|o| !o.recovered())
            .map(|o| o.best_mse)
            .reduce(f64::min)
            .ok_or(MetricsError::AllRecovered(label))
    };
    let min_a = min(a, 'a')?;
    let min_b = min(b, 'b')?;
    Ok(MseComparison {
        min_a,
        min_b,
        ratio: min_a / min_b,
    })
}
