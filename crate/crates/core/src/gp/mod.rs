//! Evolutionary symbolic regression over expression trees.
//!
//! A fixed-size population, split into islands, evolves by tournament
//! selection; each offspring replaces the oldest member of its island. The
//! best candidate per complexity goes to a Pareto front, whose members
//! migrate back into every island each generation. Constants are refitted
//! by Nelder–Mead.

mod mutate;
mod optimize;
mod program;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use ndarray::{ArrayView1, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{parse, BinaryOp, Expr, UnaryOp};

pub use mutate::{crossover, mutate, MutationKind};
pub use optimize::nelder_mead;
use program::{Data, Program};

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("search needs at least 10 rows, got {0}")]
    TooFewRows(usize),
    #[error("search needs at least one input column")]
    NoColumns,
    #[error("{x} input rows but {y} targets")]
    Shape { x: usize, y: usize },
    #[error("every initial candidate has infinite error; the data look degenerate")]
    Degenerate,
    #[error("front line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Relative odds of each edit kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationWeights {
    pub node_replace: f64,
    pub subtree_graft: f64,
    pub subtree_delete: f64,
    pub constant_perturb: f64,
    pub crossover: f64,
}

impl Default for MutationWeights {
    fn default() -> Self {
        MutationWeights {
            node_replace: 1.0,
            subtree_graft: 2.0,
            subtree_delete: 1.0,
            constant_perturb: 0.5,
            crossover: 0.5,
        }
    }
}

impl MutationWeights {
    fn as_array(&self) -> [f64; 5] {
        [
            self.node_replace,
            self.subtree_graft,
            self.subtree_delete,
            self.constant_perturb,
            self.crossover,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub population: usize,
    /// Generations; each generation produces `population` offspring.
    pub iterations: usize,
    pub tournament: usize,
    pub unary_ops: Vec<UnaryOp>,
    pub binary_ops: Vec<BinaryOp>,
    pub max_complexity: usize,
    pub weights: MutationWeights,
    pub refine_constants: bool,
    /// Selection fitness is `mse + parsimony * complexity`.
    pub parsimony: f64,
    /// Checked between generations, so it never splits one.
    pub time_budget: Option<Duration>,
    /// Stop once the front holds a candidate at or below this error.
    pub early_stop_mse: Option<f64>,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population: 200,
            iterations: 40 * 200,
            tournament: 5,
            unary_ops: vec![UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Exp, UnaryOp::Sqrt],
            binary_ops: vec![BinaryOp::Mul, BinaryOp::Add, BinaryOp::Sub, BinaryOp::Div],
            max_complexity: 40,
            weights: MutationWeights::default(),
            refine_constants: true,
            parsimony: 1e-5,
            time_budget: Some(Duration::from_secs(120)),
            early_stop_mse: Some(1e-26),
            seed: 0,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        let mut problems = Vec::new();
        if self.population < 2 {
            problems.push("population must be >= 2".to_string());
        }
        if self.max_complexity < 3 {
            problems.push("max complexity must be >= 3".to_string());
        }
        if self.tournament < 1 {
            problems.push("tournament size must be >= 1".to_string());
        }
        if !(self.parsimony >= 0.0) {
            problems.push("parsimony must be >= 0".to_string());
        }
        let w = self.weights.as_array();
        if w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            problems.push("mutation weights must be >= 0 with a positive sum".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GpError::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub expr: Expr,
    /// Training MSE; +inf when any row is undefined.
    pub mse: f64,
    pub complexity: usize,
    /// Offspring counter at birth.
    pub age: u64,
}

/// Best candidate per complexity. Every kept entry strictly beats all
/// simpler ones: for c1 < c2 in the front, mse(c1) > mse(c2).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoFront {
    entries: BTreeMap<usize, Candidate>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `c` unless a candidate at most as complex is at least as
    /// good; drops entries `c` now dominates. Returns whether it was kept.
    pub fn offer(&mut self, c: Candidate) -> bool {
        if !c.mse.is_finite() {
            return false;
        }
        if self
            .entries
            .range(..=c.complexity)
            .any(|(_, e)| e.mse <= c.mse)
        {
            return false;
        }
        let worse: Vec<usize> = self
            .entries
            .range(c.complexity + 1..)
            .filter(|(_, e)| e.mse >= c.mse)
            .map(|(k, _)| *k)
            .collect();
        for k in worse {
            self.entries.remove(&k);
        }
        self.entries.insert(c.complexity, c);
        true
    }

    /// Entries by increasing complexity.
    pub fn entries(&self) -> impl Iterator<Item = &Candidate> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best_mse(&self) -> f64 {
        self.entries
            .values()
            .map(|c| c.mse)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_consistent(&self) -> bool {
        let v: Vec<&Candidate> = self.entries.values().collect();
        v.windows(2).all(|w| w[0].mse > w[1].mse)
            && self.entries.iter().all(|(k, c)| *k == c.complexity && c.mse.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Iterations,
    TimeBudget,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub front: ParetoFront,
    /// Completed generations. Re-running with `iterations` set to this and
    /// no time budget reproduces the front exactly.
    pub generations: usize,
    pub evaluations: u64,
    /// Best front MSE after initialization and after each generation.
    pub best_history: Vec<f64>,
    pub stop: StopReason,
}

struct Member {
    expr: Expr,
    mse: f64,
    loss: f64,
}

fn member(expr: Expr, mse: f64, parsimony: f64) -> Member {
    let loss = mse + parsimony * expr.complexity() as f64;
    Member { expr, mse, loss }
}

fn tournament<'a>(pop: &'a [Member], k: usize, rng: &mut impl Rng) -> &'a Member {
    let picks: Vec<usize> = (0..k).map(|_| rng.random_range(0..pop.len())).collect();
    if rng.random_bool(0.9) {
        let best = picks
            .iter()
            .min_by(|a, b| pop[**a].loss.total_cmp(&pop[**b].loss))
            .unwrap();
        &pop[*best]
    } else {
        &pop[picks[rng.random_range(0..picks.len())]]
    }
}

/// Chance per generation that a member's constants are refitted.
const REFINE_RATE: f64 = 0.1;
/// Nelder–Mead evaluation budget per refit, per constant.
const REFINE_EVALS: usize = 80;
/// Generations without a better island best before that island is reseeded.
const STALL_GENERATIONS: usize = 100;
/// Target members per island; the population is split into
/// `population / ISLAND_SIZE` islands (at least one).
const ISLAND_SIZE: usize = 25;

/// Island `i` of `k` over a population of `n` covers this index range.
fn island_range(i: usize, k: usize, n: usize) -> std::ops::Range<usize> {
    i * n / k..(i + 1) * n / k
}

/// A random tree of depth 1 to 4.
fn random_member(cfg: &GpConfig, arity: usize, rng: &mut impl Rng) -> Expr {
    let depth = rng.random_range(1..=4);
    mutate::random_tree(cfg, arity, depth, rng)
}

pub fn search(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cfg: &GpConfig,
) -> Result<SearchResult, GpError> {
    cfg.validate()?;
    if x.nrows() != y.len() {
        return Err(GpError::Shape {
            x: x.nrows(),
            y: y.len(),
        });
    }
    if x.ncols() == 0 {
        return Err(GpError::NoColumns);
    }
    if x.nrows() < 10 {
        return Err(GpError::TooFewRows(x.nrows()));
    }
    let start = Instant::now();
    let data = Data::new(x, y);
    let arity = data.d;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stack = Vec::new();
    let mut evaluations = 0u64;
    let mut age = 0u64;
    let mut front = ParetoFront::new();
    let mut eval = |e: &Expr, evaluations: &mut u64| {
        *evaluations += 1;
        Program::compile(e).mse(&data, &mut stack)
    };
    let offer = |front: &mut ParetoFront, e: &Expr, mse: f64, age: &mut u64| {
        front.offer(Candidate {
            complexity: e.complexity(),
            expr: e.clone(),
            mse,
            age: *age,
        });
        *age += 1;
    };

    let n = cfg.population;
    let islands = (n / ISLAND_SIZE).max(1);
    let mut pop: Vec<Member> = Vec::with_capacity(n);
    for _ in 0..n {
        let e = random_member(cfg, arity, &mut rng);
        let m = eval(&e, &mut evaluations);
        offer(&mut front, &e, m, &mut age);
        pop.push(member(e, m, cfg.parsimony));
    }
    if pop.iter().all(|m| !m.mse.is_finite()) {
        return Err(GpError::Degenerate);
    }
    let kinds = WeightedIndex::new(cfg.weights.as_array()).expect("validated weights");
    let mut rings: Vec<usize> = (0..islands).map(|i| island_range(i, islands, n).start).collect();
    let island_best = |pop: &[Member], i: usize| {
        pop[island_range(i, islands, n)]
            .iter()
            .map(|m| m.mse)
            .fold(f64::INFINITY, f64::min)
    };
    let mut stalled: Vec<(f64, usize)> = (0..islands).map(|i| (island_best(&pop, i), 0)).collect();
    let mut best_history = vec![front.best_mse()];
    let mut generations = 0;
    let mut stop = StopReason::Iterations;
    let early = |front: &ParetoFront| cfg.early_stop_mse.is_some_and(|t| front.best_mse() <= t);

    if early(&front) {
        stop = StopReason::EarlyStop;
    }
    while stop == StopReason::Iterations && generations < cfg.iterations {
        if cfg.time_budget.is_some_and(|b| start.elapsed() >= b) {
            stop = StopReason::TimeBudget;
            break;
        }
        for (i, ring) in rings.iter_mut().enumerate() {
            let range = island_range(i, islands, n);
            for _ in range.clone() {
                let isl = &pop[range.clone()];
                let kind = MutationKind::ALL[kinds.sample(&mut rng)];
                let child = if kind == MutationKind::Crossover {
                    let a = &tournament(isl, cfg.tournament, &mut rng).expr;
                    let b = &tournament(isl, cfg.tournament, &mut rng).expr;
                    crossover(a, b, cfg.max_complexity, &mut rng)
                } else {
                    let parent = &tournament(isl, cfg.tournament, &mut rng).expr;
                    mutate(parent, kind, cfg, arity, &mut rng)
                };
                let child = mutate::fold_constants(&child);
                let m = eval(&child, &mut evaluations);
                if !m.is_finite() {
                    continue;
                }
                offer(&mut front, &child, m, &mut age);
                pop[*ring] = member(child, m, cfg.parsimony);
                *ring = if *ring + 1 == range.end { range.start } else { *ring + 1 };
            }
        }
        if cfg.refine_constants {
            for m in pop.iter_mut() {
                if m.expr.constant_count() == 0 || !rng.random_bool(REFINE_RATE) {
                    continue;
                }
                let budget = REFINE_EVALS * (m.expr.constant_count() + 1);
                let (e, v) = optimize::refine(&m.expr, &data, budget);
                evaluations += budget as u64;
                if v < m.mse {
                    offer(&mut front, &e, v, &mut age);
                    *m = member(e, v, cfg.parsimony);
                }
            }
        }
        // Each island receives one front member and the tournament winner
        // of another island.
        let elite: Vec<&Candidate> = front.entries().collect();
        for (i, ring) in rings.iter_mut().enumerate() {
            let range = island_range(i, islands, n);
            let c = elite[rng.random_range(0..elite.len())];
            let mut incoming = vec![member(c.expr.clone(), c.mse, cfg.parsimony)];
            if islands > 1 {
                let j = (i + rng.random_range(1..islands)) % islands;
                let w = tournament(&pop[island_range(j, islands, n)], cfg.tournament, &mut rng);
                incoming.push(member(w.expr.clone(), w.mse, cfg.parsimony));
            }
            for m in incoming {
                pop[*ring] = m;
                *ring = if *ring + 1 == range.end { range.start } else { *ring + 1 };
            }
        }
        debug_assert!(front.is_consistent());
        generations += 1;
        for (i, st) in stalled.iter_mut().enumerate() {
            let best = island_best(&pop, i);
            if best < st.0 {
                *st = (best, generations);
            } else if generations - st.1 >= STALL_GENERATIONS {
                // Stuck: reseed the island; the front keeps what was found.
                for m in pop[island_range(i, islands, n)].iter_mut() {
                    let e = random_member(cfg, arity, &mut rng);
                    let v = eval(&e, &mut evaluations);
                    *m = member(e, v, cfg.parsimony);
                }
                *st = (f64::INFINITY, generations);
            }
        }
        best_history.push(front.best_mse());
        if early(&front) {
            stop = StopReason::EarlyStop;
        }
    }
    Ok(SearchResult {
        front,
        generations,
        evaluations,
        best_history,
        stop,
    })
}

/// Refits the constants of `e` to `(x, y)`; the result never fits worse.
pub fn refine_constants(e: &Expr, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Expr {
    let data = Data::new(x, y);
    let budget = 400 * (e.constant_count() + 1);
    optimize::refine(e, &data, budget).0
}

/// Training MSE of `e`; +inf when any row is undefined.
pub fn mse(e: &Expr, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    program::mse(e, &Data::new(x, y))
}

/// One line per entry: `complexity<TAB>mse<TAB>column form<TAB>inlined`.
/// `inline` rewrites augmented columns into base-variable expressions.
pub fn write_front(
    front: &ParetoFront,
    column_names: &[String],
    raw_names: &[String],
    inline: &dyn Fn(&Expr) -> Expr,
    out: &mut impl Write,
) -> std::io::Result<()> {
    for c in front.entries() {
        writeln!(
            out,
            "{}\t{:e}\t{}\t{}",
            c.complexity,
            c.mse,
            c.expr.render(column_names),
            inline(&c.expr).render(raw_names)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontRecord {
    pub complexity: usize,
    pub mse: f64,
    pub column_form: String,
    pub inlined: Expr,
}

/// Reads what [`write_front`] wrote, parsing the inlined forms.
pub fn read_front(input: impl BufRead, raw_names: &[String]) -> Result<Vec<FrontRecord>, GpError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| GpError::Format { line: line_no, msg };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        out.push(FrontRecord {
            complexity: f[0].parse().map_err(|_| err(format!("bad complexity {:?}", f[0])))?,
            mse: f[1].parse().map_err(|_| err(format!("bad mse {:?}", f[1])))?,
            column_form: f[2].to_string(),
            inlined: parse(f[3], raw_names).map_err(|e| err(e.to_string()))?,
        });
    }
    Ok(out)
}
