//! Feature mapping network.
//!
//! Each layer holds heterogeneous units. A unary unit computes `f(w . y)`,
//! a binary unit `f(w1 . y, w2 . y)`, where `y` is the layer input: the raw
//! variables followed by every earlier unit output (dense concatenation).
//! The prediction is a bias-free linear read-out of the final channels.
//! Training minimizes `mse + l1 * sum|w| + l2 * sum cos(w1, w2)` with
//! normalized gradient steps, and weights that would feed an exp output
//! straight into another exp unit are pinned at zero.

mod gradcheck;
mod snapshot;
mod train;

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use gradcheck::{gradient_check, GradCheck, GRAD_FLOOR};
pub use snapshot::{read_snapshot, write_snapshot};
pub use train::{train, Incident, TrainTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FmnError {
    #[error("invalid FMN configuration: {0}")]
    Config(String),
    #[error("input has {found} column(s), model expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("every batch of epoch {epoch} produced non-finite values; training aborted")]
    Collapsed { epoch: usize },
    #[error("model has not been trained")]
    Untrained,
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// Unit primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitOp {
    Square,
    Sin,
    Cos,
    Exp,
    Add,
    Mul,
}

impl UnitOp {
    pub const ALL: [UnitOp; 6] = [
        UnitOp::Square,
        UnitOp::Sin,
        UnitOp::Cos,
        UnitOp::Exp,
        UnitOp::Add,
        UnitOp::Mul,
    ];

    pub fn is_binary(self) -> bool {
        matches!(self, UnitOp::Add | UnitOp::Mul)
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitOp::Square => "square",
            UnitOp::Sin => "sin",
            UnitOp::Cos => "cos",
            UnitOp::Exp => "exp",
            UnitOp::Add => "add",
            UnitOp::Mul => "mul",
        }
    }

    pub fn from_name(s: &str) -> Option<UnitOp> {
        UnitOp::ALL.into_iter().find(|op| op.name() == s)
    }

    pub(crate) fn code(self) -> u8 {
        UnitOp::ALL.iter().position(|o| *o == self).unwrap() as u8
    }

    pub(crate) fn from_code(c: u8) -> Option<UnitOp> {
        UnitOp::ALL.get(c as usize).copied()
    }

    #[inline]
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            UnitOp::Square => a * a,
            UnitOp::Sin => a.sin(),
            UnitOp::Cos => a.cos(),
            UnitOp::Exp => a.min(EXP_CAP).exp(),
            UnitOp::Add => a + b,
            UnitOp::Mul => a * b,
        }
    }

    /// Partial derivatives with respect to both inputs.
    #[inline]
    fn derivative(self, a: f64, b: f64) -> (f64, f64) {
        match self {
            UnitOp::Square => (2.0 * a, 0.0),
            UnitOp::Sin => (a.cos(), 0.0),
            UnitOp::Cos => (-a.sin(), 0.0),
            UnitOp::Exp => (if a < EXP_CAP { a.exp() } else { 0.0 }, 0.0),
            UnitOp::Add => (1.0, 1.0),
            UnitOp::Mul => (b, a),
        }
    }
}

/// Exp units saturate above this argument (derivative 0 there). Square and
/// product units compound magnitudes across dense layers, so an exp fed by
/// them overflows on [-3,3] inputs even with the exp-nesting mask.
pub const EXP_CAP: f64 = 30.0;

/// How gradient steps are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Each unit (both branches of a binary unit together) and the read-out
    /// vector are scaled by their own gradient norm.
    PerUnit,
    /// One norm over every trainable weight.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmnConfig {
    pub depth: usize,
    /// Units of every layer, in order.
    pub roster: Vec<UnitOp>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Sparsity coefficient.
    pub lambda1: f64,
    /// Contrastive coefficient for binary units.
    pub lambda2: f64,
    /// Normalization floor.
    pub eps: f64,
    /// Half-width of the uniform initialization interval.
    pub init_scale: f64,
    pub normalization: Normalization,
    pub seed: u64,
}

impl Default for FmnConfig {
    fn default() -> Self {
        let roster = UnitOp::ALL.iter().chain(UnitOp::ALL.iter()).copied().collect();
        FmnConfig {
            depth: 4,
            roster,
            learning_rate: 0.5,
            epochs: 100,
            batch_size: 50,
            lambda1: 0.08,
            lambda2: 0.001,
            eps: 1e-8,
            init_scale: 1.0,
            normalization: Normalization::PerUnit,
            seed: 0,
        }
    }
}

impl FmnConfig {
    /// Three layers for one input variable, four otherwise.
    pub fn default_depth(arity: usize) -> usize {
        if arity <= 1 {
            3
        } else {
            4
        }
    }

    pub fn validate(&self) -> Result<(), FmnError> {
        let mut problems = Vec::new();
        if self.depth < 1 {
            problems.push("depth must be >= 1".to_string());
        }
        if self.roster.is_empty() {
            problems.push("roster must not be empty".to_string());
        }
        if !(self.learning_rate > 0.0) {
            problems.push("learning rate must be > 0".to_string());
        }
        if self.batch_size < 1 {
            problems.push("batch size must be >= 1".to_string());
        }
        if !(self.lambda1 >= 0.0) {
            problems.push("lambda1 must be >= 0".to_string());
        }
        if !(self.lambda2 >= 0.0) {
            problems.push("lambda2 must be >= 0".to_string());
        }
        if !(self.eps > 0.0) {
            problems.push("eps must be > 0".to_string());
        }
        if !(self.init_scale > 0.0) {
            problems.push("init scale must be > 0".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(FmnError::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub op: UnitOp,
    pub w1: Vec<f64>,
    /// Second branch; empty for unary units.
    pub w2: Vec<f64>,
    /// Forbidden input channels (exp units only); empty means unmasked.
    pub mask: Vec<bool>,
}

impl Unit {
    fn apply_mask(&mut self) {
        for (w, &m) in self.w1.iter_mut().zip(&self.mask) {
            if m {
                *w = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub units: Vec<Unit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmnModel {
    pub config: FmnConfig,
    pub arity: usize,
    pub layers: Vec<Layer>,
    pub regression: Vec<f64>,
    pub trained: bool,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    pub rows: usize,
    /// Channel-major activations: raw inputs, then unit outputs.
    pub channels: Vec<Vec<f64>>,
    /// Pre-activations per layer and unit: (w1 . y, w2 . y).
    pre: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    pub yhat: Vec<f64>,
    /// False when any activation or prediction is NaN or infinite.
    pub finite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub l2: f64,
    pub sparse: f64,
    pub contrast: f64,
}

/// Gradients shaped like the model's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub units: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    pub regression: Vec<f64>,
}

fn dot_rows(w: &[f64], channels: &[Vec<f64>], rows: usize) -> Vec<f64> {
    let mut z = vec![0.0; rows];
    for (wh, ch) in w.iter().zip(channels) {
        if *wh != 0.0 {
            for (zr, v) in z.iter_mut().zip(ch) {
                *zr += wh * v;
            }
        }
    }
    z
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `cos(a, b)`, or `None` when either norm is below `eps`.
fn cosine(a: &[f64], b: &[f64], eps: f64) -> Option<(f64, f64, f64)> {
    let na = norm(a);
    let nb = norm(b);
    if na < eps || nb < eps {
        return None;
    }
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((d / (na * nb), na, nb))
}

impl FmnModel {
    /// Random model for `arity` inputs; weights i.i.d. uniform on
    /// `[-init_scale, init_scale]` from the config seed.
    pub fn init(config: &FmnConfig, arity: usize) -> Result<FmnModel, FmnError> {
        config.validate()?;
        if arity < 1 {
            return Err(FmnError::Config("arity must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let s = config.init_scale;
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-s..=s)).collect() };
        let mut layers = Vec::with_capacity(config.depth);
        let mut width = arity;
        for _ in 0..config.depth {
            let units = config
                .roster
                .iter()
                .map(|&op| Unit {
                    op,
                    w1: draw(width),
                    w2: if op.is_binary() { draw(width) } else { Vec::new() },
                    mask: Vec::new(),
                })
                .collect::<Vec<_>>();
            width += units.len();
            layers.push(Layer { units });
        }
        let regression = draw(width);
        let mut model = FmnModel {
            config: config.clone(),
            arity,
            layers,
            regression,
            trained: false,
        };
        let masks = model.build_exp_mask();
        for (layer, lm) in model.layers.iter_mut().zip(masks) {
            for (unit, m) in layer.units.iter_mut().zip(lm) {
                unit.mask = m;
                unit.apply_mask();
            }
        }
        Ok(model)
    }

    /// Input width of layer `i` (0-based); `width(depth)` is the read-out width.
    pub fn width(&self, layer: usize) -> usize {
        self.arity + self.layers[..layer].iter().map(|l| l.units.len()).sum::<usize>()
    }

    /// Channels produced by exp units.
    pub fn exp_channels(&self) -> Vec<bool> {
        let mut out = vec![false; self.arity];
        for layer in &self.layers {
            out.extend(layer.units.iter().map(|u| u.op == UnitOp::Exp));
        }
        out
    }

    /// Per layer and unit, the forbidden input channels: for exp units every
    /// channel that is an earlier exp output; other units get no mask.
    pub fn build_exp_mask(&self) -> Vec<Vec<Vec<bool>>> {
        let exp_channels = self.exp_channels();
        self.layers
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                let w = self.width(i);
                layer
                    .units
                    .iter()
                    .map(|u| {
                        if u.op == UnitOp::Exp {
                            exp_channels[..w].to_vec()
                        } else {
                            Vec::new()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Forward pass over the rows of `x` (n x arity).
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Cache, FmnError> {
        if x.ncols() != self.arity {
            return Err(FmnError::Arity {
                expected: self.arity,
                found: x.ncols(),
            });
        }
        let channels = x.columns().into_iter().map(|c| c.to_vec()).collect();
        Ok(self.forward_channels(channels, x.nrows()))
    }

    pub(crate) fn forward_channels(&self, mut channels: Vec<Vec<f64>>, rows: usize) -> Cache {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut finite = true;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = self.width(i);
            let mut lp = Vec::with_capacity(layer.units.len());
            let mut outs = Vec::with_capacity(layer.units.len());
            for unit in &layer.units {
                let z1 = dot_rows(&unit.w1, &channels[..w], rows);
                let z2 = if unit.op.is_binary() {
                    dot_rows(&unit.w2, &channels[..w], rows)
                } else {
                    Vec::new()
                };
                let out: Vec<f64> = (0..rows)
                    .map(|r| unit.op.apply(z1[r], z2.get(r).copied().unwrap_or(0.0)))
                    .collect();
                finite &= out.iter().all(|v| v.is_finite());
                outs.push(out);
                lp.push((z1, z2));
            }
            channels.extend(outs);
            pre.push(lp);
        }
        let yhat = dot_rows(&self.regression, &channels, rows);
        finite &= yhat.iter().all(|v| v.is_finite());
        Cache {
            rows,
            channels,
            pre,
            yhat,
            finite,
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, FmnError> {
        Ok(self.forward(x)?.yhat)
    }

    fn weight_groups(&self) -> impl Iterator<Item = &Unit> {
        self.layers.iter().flat_map(|l| l.units.iter())
    }

    pub fn loss(&self, cache: &Cache, y: &[f64]) -> LossBreakdown {
        let n = cache.rows.max(1) as f64;
        let l2 = cache
            .yhat
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let abs_sum: f64 = self
            .weight_groups()
            .flat_map(|u| u.w1.iter().chain(u.w2.iter()))
            .chain(self.regression.iter())
            .map(|w| w.abs())
            .sum();
        let cos_sum: f64 = self
            .weight_groups()
            .filter(|u| u.op.is_binary())
            .filter_map(|u| cosine(&u.w1, &u.w2, self.config.eps).map(|c| c.0))
            .sum();
        let sparse = self.config.lambda1 * abs_sum;
        let contrast = self.config.lambda2 * cos_sum;
        LossBreakdown {
            total: l2 + sparse + contrast,
            l2,
            sparse,
            contrast,
        }
    }

    /// Exact gradients of the total loss; masked entries are zero.
    pub fn backward(&self, cache: &Cache, y: &[f64]) -> Gradients {
        let rows = cache.rows;
        let n = rows.max(1) as f64;
        let total_width = cache.channels.len();
        let dyhat: Vec<f64> = cache
            .yhat
            .iter()
            .zip(y)
            .map(|(p, t)| 2.0 * (p - t) / n)
            .collect();
        let mut dch = vec![vec![0.0; rows]; total_width];
        let l1 = self.config.lambda1;
        let regression: Vec<f64> = (0..total_width)
            .map(|h| {
                let g: f64 = dyhat.iter().zip(&cache.channels[h]).map(|(a, b)| a * b).sum();
                g + l1 * sign(self.regression[h])
            })
            .collect();
        for (h, &w) in self.regression.iter().enumerate() {
            if w != 0.0 {
                for (d, g) in dch[h].iter_mut().zip(&dyhat) {
                    *d += w * g;
                }
            }
        }

        let mut units: Vec<Vec<(Vec<f64>, Vec<f64>)>> = self
            .layers
            .iter()
            .map(|l| Vec::with_capacity(l.units.len()))
            .collect();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let w = self.width(i);
            let mut grads = Vec::with_capacity(layer.units.len());
            for (j, unit) in layer.units.iter().enumerate() {
                let (z1, z2) = &cache.pre[i][j];
                let dout = &dch[w + j];
                let mut dz1 = vec![0.0; rows];
                let mut dz2 = vec![0.0; if unit.op.is_binary() { rows } else { 0 }];
                for r in 0..rows {
                    let b = z2.get(r).copied().unwrap_or(0.0);
                    let (da, db) = unit.op.derivative(z1[r], b);
                    dz1[r] = dout[r] * da;
                    if unit.op.is_binary() {
                        dz2[r] = dout[r] * db;
                    }
                }
                let mut g1: Vec<f64> = (0..w)
                    .map(|h| dz1.iter().zip(&cache.channels[h]).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let mut g2: Vec<f64> = if unit.op.is_binary() {
                    (0..w)
                        .map(|h| dz2.iter().zip(&cache.channels[h]).map(|(a, b)| a * b).sum::<f64>())
                        .collect()
                } else {
                    Vec::new()
                };
                // Propagate into this layer's inputs.
                let (lower, _) = dch.split_at_mut(w);
                for (h, d) in lower.iter_mut().enumerate() {
                    let a = unit.w1[h];
                    let b = unit.w2.get(h).copied().unwrap_or(0.0);
                    if a != 0.0 {
                        for (dr, z) in d.iter_mut().zip(&dz1) {
                            *dr += a * z;
                        }
                    }
                    if b != 0.0 {
                        for (dr, z) in d.iter_mut().zip(&dz2) {
                            *dr += b * z;
                        }
                    }
                }
                for (g, wv) in g1.iter_mut().zip(&unit.w1) {
                    *g += l1 * sign(*wv);
                }
                for (g, wv) in g2.iter_mut().zip(&unit.w2) {
                    *g += l1 * sign(*wv);
                }
                if unit.op.is_binary() {
                    if let Some((c, n1, n2)) = cosine(&unit.w1, &unit.w2, self.config.eps) {
                        let l2 = self.config.lambda2;
                        for h in 0..w {
                            g1[h] += l2 * (unit.w2[h] / (n1 * n2) - c * unit.w1[h] / (n1 * n1));
                            g2[h] += l2 * (unit.w1[h] / (n1 * n2) - c * unit.w2[h] / (n2 * n2));
                        }
                    }
                }
                for (g, &m) in g1.iter_mut().zip(&unit.mask) {
                    if m {
                        *g = 0.0;
                    }
                }
                grads.push((g1, g2));
            }
            units[i] = grads;
        }
        Gradients { units, regression }
    }

    /// One normalized descent step; re-applies the exp mask.
    pub fn step(&mut self, grads: &Gradients) {
        let eta = self.config.learning_rate;
        let eps = self.config.eps;
        let global = match self.config.normalization {
            Normalization::Global => {
                let sq: f64 = grads
                    .units
                    .iter()
                    .flatten()
                    .flat_map(|(a, b)| a.iter().chain(b.iter()))
                    .chain(grads.regression.iter())
                    .map(|g| g * g)
                    .sum();
                Some(sq.sqrt())
            }
            Normalization::PerUnit => None,
        };
        for (layer, lg) in self.layers.iter_mut().zip(&grads.units) {
            for (unit, (g1, g2)) in layer.units.iter_mut().zip(lg) {
                let nrm = global.unwrap_or_else(|| {
                    (g1.iter().chain(g2.iter()).map(|g| g * g).sum::<f64>()).sqrt()
                });
                let scale = eta / (nrm + eps);
                for (w, g) in unit.w1.iter_mut().zip(g1) {
                    *w -= scale * g;
                }
                for (w, g) in unit.w2.iter_mut().zip(g2) {
                    *w -= scale * g;
                }
                unit.apply_mask();
            }
        }
        let nrm = global.unwrap_or_else(|| norm(&grads.regression));
        let scale = eta / (nrm + eps);
        for (w, g) in self.regression.iter_mut().zip(&grads.regression) {
            *w -= scale * g;
        }
    }
}
