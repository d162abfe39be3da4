//! Benchmark registry, samplers, noise injection and dataset files.

mod io;
mod registry;
mod tyson;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::expr::{eval_point, EvalDomain, Expr};

pub use io::{read_dataset, write_dataset};
pub use registry::{lookup, registry};
pub use tyson::{tyson_generate, Segment, TysonConfig};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{benchmark}: ground truth undefined on the even grid at rows {rows:?}")]
    GridDomain { benchmark: String, rows: Vec<usize> },
    #[error("{benchmark}: no finite target after {tries} resamples of row {row}")]
    ResampleExhausted {
        benchmark: String,
        row: usize,
        tries: usize,
    },
    #[error("invalid Tyson configuration: {0}")]
    TysonConfig(String),
    #[error("state became non-finite at t = {time}")]
    Diverged { time: f64 },
    #[error("dataset file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-variable sampling rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// `n` points drawn uniformly from `[lo, hi)`.
    Uniform { lo: f64, hi: f64, n: usize },
    /// `n` evenly spaced points from `lo` to `hi` inclusive.
    Even { lo: f64, hi: f64, n: usize },
}

impl Sampling {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Sampling::Uniform { lo, hi, .. } | Sampling::Even { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn count(&self) -> usize {
        match *self {
            Sampling::Uniform { n, .. } | Sampling::Even { n, .. } => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Standard,
    Recover,
    Unrecover,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub name: String,
    pub variables: Vec<String>,
    pub truth: Expr,
    pub sampling: Vec<Sampling>,
    /// Ground truth carries a constant that cannot be snapped, so recovery
    /// is judged with the looser tolerance.
    pub constant_tolerant: bool,
    pub suite: Suite,
}

impl Benchmark {
    pub fn arity(&self) -> usize {
        self.variables.len()
    }

    /// Probe domain over the benchmark's sampling box.
    pub fn domain(&self, seed: u64) -> EvalDomain {
        let intervals = self.sampling.iter().map(|s| s.bounds()).collect();
        EvalDomain::new(intervals, EvalDomain::DEFAULT_PROBES, seed)
            .expect("registry sampling boxes are non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub benchmark: String,
    pub seed: u64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub names: Vec<String>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

const MAX_RESAMPLES: usize = 10_000;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Samples a dataset for `b`. Uniform rows whose target is undefined are
/// redrawn; undefined points on an even grid are an error.
pub fn generate(b: &Benchmark, seed: u64) -> Result<Dataset, DataError> {
    let d = b.arity();
    let n = b.sampling.iter().map(Sampling::count).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<f64>::zeros((n, d));
    let mut y = Array1::<f64>::zeros(n);
    let grids: Vec<Option<Vec<f64>>> = b
        .sampling
        .iter()
        .map(|s| match *s {
            Sampling::Even { lo, hi, n } => Some(linspace(lo, hi, n)),
            Sampling::Uniform { .. } => None,
        })
        .collect();
    let mut bad_rows = Vec::new();
    let mut point = vec![0.0; d];
    for row in 0..n {
        let mut tries = 0;
        loop {
            for (j, s) in b.sampling.iter().enumerate() {
                point[j] = match (s, &grids[j]) {
                    (_, Some(g)) => g[row.min(g.len() - 1)],
                    (Sampling::Uniform { lo, hi, .. }, None) => rng.random_range(*lo..*hi),
                    (Sampling::Even { .. }, None) => unreachable!(),
                };
            }
            let v = eval_point(&b.truth, &point);
            if v.is_finite() {
                y[row] = v;
                break;
            }
            let has_uniform = grids.iter().any(Option::is_none);
            if !has_uniform {
                bad_rows.push(row);
                break;
            }
            tries += 1;
            if tries >= MAX_RESAMPLES {
                return Err(DataError::ResampleExhausted {
                    benchmark: b.name.clone(),
                    row,
                    tries,
                });
            }
        }
        for j in 0..d {
            x[[row, j]] = point[j];
        }
    }
    if !bad_rows.is_empty() {
        return Err(DataError::GridDomain {
            benchmark: b.name.clone(),
            rows: bad_rows,
        });
    }
    Ok(Dataset {
        x,
        y,
        names: b.variables.clone(),
        provenance: Provenance {
            benchmark: b.name.clone(),
            seed,
            noise: 0.0,
        },
    })
}

pub fn rms(y: &Array1<f64>) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt()
}

/// Adds i.i.d. Gaussian noise with standard deviation `alpha * rms(y)`.
/// `alpha = 0` leaves the targets bit-identical.
pub fn add_noise(ds: &Dataset, alpha: f64, seed: u64) -> Dataset {
    assert!(alpha >= 0.0, "noise level must be non-negative");
    let mut out = ds.clone();
    out.provenance.noise = alpha;
    if alpha == 0.0 {
        return out;
    }
    let sigma = alpha * rms(&ds.y);
    let normal = Normal::new(0.0, sigma).expect("finite standard deviation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.y.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    out
}
