//! Feature tracing from trained networks, cross-run aggregation into a
//! frequency-ranked library, and dataset augmentation.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use thiserror::Error;

use crate::data::Dataset;
use crate::expr::{equivalent, evaluate, simplify, EvalDomain, EvalError, Expr, UnaryOp};
use crate::fmn::{train, FmnConfig, FmnError, FmnModel, TrainTrace, UnitOp};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("model has not been trained")]
    Untrained,
    #[error("feature library is empty")]
    EmptyLibrary,
    #[error("top-K must be >= 1")]
    ZeroK,
    #[error("feature {0} is undefined on every row")]
    AllNan(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("extraction run {run}: {source}")]
    Run { run: usize, source: FmnError },
    #[error("worker pool: {0}")]
    Pool(String),
}

fn lowest_argmax(w: &[f64]) -> usize {
    let mut best = 0;
    for (h, v) in w.iter().enumerate() {
        if v.abs() > w[best].abs() {
            best = h;
        }
    }
    best
}

fn apply_unit(op: UnitOp, a: Expr, b: Option<Expr>) -> Expr {
    match op {
        UnitOp::Square => Expr::unary(UnaryOp::Square, a),
        UnitOp::Sin => Expr::unary(UnaryOp::Sin, a),
        UnitOp::Cos => Expr::unary(UnaryOp::Cos, a),
        UnitOp::Exp => Expr::unary(UnaryOp::Exp, a),
        UnitOp::Add => Expr::add(a, b.expect("binary unit")),
        UnitOp::Mul => Expr::mul(a, b.expect("binary unit")),
    }
}

/// One feature per unit, in layer-unit order: the unit's op applied to the
/// symbolic channel behind its largest |weight| (lowest index on ties).
/// Binary units resolve each branch on its own.
pub fn extract_run(model: &FmnModel) -> Result<Vec<Expr>, FeatureError> {
    if !model.trained {
        return Err(FeatureError::Untrained);
    }
    let mut channels: Vec<Expr> = (0..model.arity).map(Expr::Var).collect();
    let mut out = Vec::new();
    for layer in &model.layers {
        let mut produced = Vec::with_capacity(layer.units.len());
        for unit in &layer.units {
            let a = channels[lowest_argmax(&unit.w1)].clone();
            let b = unit
                .op
                .is_binary()
                .then(|| channels[lowest_argmax(&unit.w2)].clone());
            produced.push(apply_unit(unit.op, a, b));
        }
        out.extend(produced.iter().cloned());
        channels.extend(produced);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub expr: Expr,
    pub frequency: usize,
    pub first_run: usize,
    /// Rendering under the library's names; the last ordering key.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLibrary {
    pub entries: Vec<LibraryEntry>,
    pub total: usize,
}

fn library_order(a: &LibraryEntry, b: &LibraryEntry) -> Ordering {
    b.frequency
        .cmp(&a.frequency)
        .then(a.expr.complexity().cmp(&b.expr.complexity()))
        .then_with(|| a.text.cmp(&b.text))
        .then_with(|| a.expr.canonical_cmp(&b.expr))
}

/// Simplifies every extracted feature and counts structurally identical
/// canonical forms across runs.
pub fn aggregate(runs: &[Vec<Expr>], names: &[String]) -> FeatureLibrary {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut entries: Vec<LibraryEntry> = Vec::new();
    let mut total = 0;
    for (run, features) in runs.iter().enumerate() {
        for f in features {
            total += 1;
            let canon = simplify(f);
            let key = canon.key();
            match index.get(&key) {
                Some(&i) => entries[i].frequency += 1,
                None => {
                    index.insert(key, entries.len());
                    entries.push(LibraryEntry {
                        text: canon.render(names).to_string(),
                        expr: canon,
                        frequency: 1,
                        first_run: run,
                    });
                }
            }
        }
    }
    entries.sort_by(library_order);
    FeatureLibrary { entries, total }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub features: Vec<Expr>,
    /// Set when the library held fewer than K entries.
    pub warning: Option<String>,
}

pub fn select_top(lib: &FeatureLibrary, k: usize) -> Result<Selection, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroK);
    }
    if lib.entries.is_empty() {
        return Err(FeatureError::EmptyLibrary);
    }
    let warning = (lib.entries.len() < k).then(|| {
        format!(
            "library has {} feature(s), fewer than the {k} requested",
            lib.entries.len()
        )
    });
    Ok(Selection {
        features: lib.entries.iter().take(k).map(|e| e.expr.clone()).collect(),
        warning,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub base: Dataset,
    pub features: Vec<Expr>,
    /// Surviving rows: base columns, then one column per feature.
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    /// Base names followed by `f1..fK`.
    pub names: Vec<String>,
    /// Per feature, the fraction of base rows where it is finite.
    pub finite_fraction: Vec<f64>,
    pub dropped_rows: usize,
    pub diagnostics: Vec<String>,
}

impl AugmentedDataset {
    /// Replaces feature columns in `e` with the feature expressions,
    /// giving a closed form over the base variables.
    pub fn inline(&self, e: &Expr) -> Expr {
        let d = self.base.dim();
        e.substitute(&|i| (i >= d).then(|| self.features[i - d].clone()))
    }
}

/// Appends one column per feature and drops rows where any feature is not
/// finite. More than 10% of rows lost to one feature produces a diagnostic.
pub fn augment(ds: &Dataset, features: &[Expr]) -> Result<AugmentedDataset, FeatureError> {
    let n = ds.len();
    let mut cols = Vec::with_capacity(features.len());
    let mut keep = vec![true; n];
    let mut finite_fraction = Vec::with_capacity(features.len());
    let mut diagnostics = Vec::new();
    for f in features {
        let v = evaluate(f, ds.x.view())?;
        let finite = v.iter().filter(|x| x.is_finite()).count();
        let text = f.render(&ds.names).to_string();
        if finite == 0 && n > 0 {
            return Err(FeatureError::AllNan(text));
        }
        let frac = if n == 0 { 1.0 } else { finite as f64 / n as f64 };
        if frac < 0.9 {
            diagnostics.push(format!(
                "feature {text} is undefined on {} of {n} rows",
                n - finite
            ));
        }
        for (k, x) in keep.iter_mut().zip(v.iter()) {
            *k &= x.is_finite();
        }
        finite_fraction.push(frac);
        cols.push(v);
    }
    let rows: Vec<usize> = (0..n).filter(|&r| keep[r]).collect();
    let d = ds.dim();
    let mut x = Array2::zeros((rows.len(), d + features.len()));
    for (out_r, &r) in rows.iter().enumerate() {
        for c in 0..d {
            x[[out_r, c]] = ds.x[[r, c]];
        }
        for (k, col) in cols.iter().enumerate() {
            x[[out_r, d + k]] = col[r];
        }
    }
    let y = ds.y.select(Axis(0), &rows);
    let mut names = ds.names.clone();
    names.extend((1..=features.len()).map(|k| format!("f{k}")));
    Ok(AugmentedDataset {
        base: ds.clone(),
        features: features.to_vec(),
        x,
        y,
        names,
        finite_fraction,
        dropped_rows: n - rows.len(),
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Config {
    pub fmn: FmnConfig,
    pub num_experiments: usize,
    pub num_workers: usize,
    /// Features injected into the dataset (top-K).
    pub pysr_num: usize,
    /// Run `i` trains with seed `base_seed + i`.
    pub base_seed: u64,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            fmn: FmnConfig::default(),
            num_experiments: 16,
            num_workers: 8,
            pysr_num: 4,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stage1Output {
    pub library: FeatureLibrary,
    pub augmented: AugmentedDataset,
    pub traces: Vec<TrainTrace>,
    pub runs: Vec<Vec<Expr>>,
    pub warnings: Vec<String>,
}

/// Trains `num_experiments` networks on up to `num_workers` threads,
/// aggregates their features and injects the top `pysr_num`. The result
/// does not depend on the worker count.
pub fn run_stage1(cfg: &Stage1Config, ds: &Dataset) -> Result<Stage1Output, FeatureError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.num_workers.max(1))
        .build()
        .map_err(|e| FeatureError::Pool(e.to_string()))?;
    let results: Vec<Result<(Vec<Expr>, TrainTrace), FeatureError>> = pool.install(|| {
        (0..cfg.num_experiments)
            .into_par_iter()
            .map(|i| {
                let fc = FmnConfig {
                    seed: cfg.base_seed.wrapping_add(i as u64),
                    ..cfg.fmn.clone()
                };
                let (model, trace) = train(&fc, ds.x.view(), ds.y.view())
                    .map_err(|source| FeatureError::Run { run: i, source })?;
                Ok((extract_run(&model)?, trace))
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        let (f, t) = r?;
        runs.push(f);
        traces.push(t);
    }
    let library = aggregate(&runs, &ds.names);
    let selection = select_top(&library, cfg.pysr_num)?;
    let augmented = augment(ds, &selection.features)?;
    let mut warnings: Vec<String> = selection.warning.into_iter().collect();
    warnings.extend(augmented.diagnostics.iter().cloned());
    Ok(Stage1Output {
        library,
        augmented,
        traces,
        runs,
        warnings,
    })
}

/// A feature is valid for a target when its canonical form is a non-leaf
/// subtree of the simplified target, or matches one numerically on `dom`.
pub fn is_valid_feature(feature: &Expr, target: &Expr, dom: &EvalDomain) -> bool {
    let f = simplify(feature);
    if f.is_leaf() {
        return false;
    }
    let t = simplify(target);
    let subs: Vec<&Expr> = t.subtrees().into_iter().filter(|s| !s.is_leaf()).collect();
    subs.iter().any(|s| **s == f)
        || subs
            .iter()
            .any(|s| equivalent(&f, s, dom, 1e-6).unwrap_or(false))
}

/// One line per entry: `expr<TAB>frequency<TAB>valid`, where `valid` is `-`
/// when no validity flags are given.
pub fn write_library(
    lib: &FeatureLibrary,
    valid: Option<&[bool]>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    for (i, e) in lib.entries.iter().enumerate() {
        let flag = match valid.and_then(|v| v.get(i)) {
            Some(true) => "1",
            Some(false) => "0",
            None => "-",
        };
        writeln!(out, "{}\t{}\t{flag}", e.text, e.frequency)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::fmn::{Layer, Unit};

    fn names() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    fn p(s: &str) -> Expr {
        parse(s, &names()).unwrap()
    }

    fn unit(op: UnitOp, w1: Vec<f64>, w2: Vec<f64>) -> Unit {
        Unit {
            op,
            w1,
            w2,
            mask: Vec::new(),
        }
    }

    fn model(layers: Vec<Vec<Unit>>) -> FmnModel {
        let cfg = FmnConfig {
            depth: layers.len(),
            roster: layers[0].iter().map(|u| u.op).collect(),
            ..FmnConfig::default()
        };
        let width = 2 + layers.iter().map(|l| l.len()).sum::<usize>();
        FmnModel {
            config: cfg,
            arity: 2,
            layers: layers.into_iter().map(|units| Layer { units }).collect(),
            regression: vec![0.0; width],
            trained: true,
        }
    }

    #[test]
    fn unary_unit_takes_largest_magnitude() {
        let m = model(vec![vec![unit(UnitOp::Sin, vec![0.1, -0.9], vec![])]]);
        assert_eq!(extract_run(&m).unwrap(), vec![p("sin(y)")]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let m = model(vec![vec![unit(UnitOp::Cos, vec![-0.5, 0.5], vec![])]]);
        assert_eq!(extract_run(&m).unwrap(), vec![p("cos(x)")]);
    }

    #[test]
    fn second_layer_reads_earlier_features() {
        let m = model(vec![
            vec![unit(UnitOp::Sin, vec![0.1, -0.9], vec![])],
            vec![unit(UnitOp::Square, vec![0.0, 0.2, 0.7], vec![])],
        ]);
        assert_eq!(
            extract_run(&m).unwrap(),
            vec![p("sin(y)"), p("square(sin(y))")]
        );
    }

    #[test]
    fn binary_unit_resolves_each_branch() {
        let m = model(vec![
            vec![unit(UnitOp::Square, vec![1.0, 0.0], vec![])],
            vec![unit(UnitOp::Add, vec![0.8, 0.1, 0.2], vec![0.1, 0.0, -0.6])],
        ]);
        assert_eq!(
            extract_run(&m).unwrap(),
            vec![p("square(x)"), p("x + square(x)")]
        );
    }

    #[test]
    fn untrained_model_is_rejected() {
        let mut m = model(vec![vec![unit(UnitOp::Sin, vec![1.0, 0.0], vec![])]]);
        m.trained = false;
        assert!(matches!(extract_run(&m), Err(FeatureError::Untrained)));
    }

    #[test]
    fn canonical_forms_collide() {
        let lib = aggregate(&[vec![p("x*x")], vec![p("square(x)")]], &names());
        assert_eq!(lib.entries.len(), 1);
        assert_eq!(lib.entries[0].expr, p("square(x)"));
        assert_eq!(lib.entries[0].frequency, 2);
        assert_eq!(lib.total, 2);
    }

    #[test]
    fn equal_frequency_and_complexity_fall_back_to_render_order() {
        let lib = aggregate(&[vec![p("sin(x)"), p("square(x)")]], &names());
        let sel = select_top(&lib, 1).unwrap();
        // Both have complexity 2; "sin(x)" < "square(x)".
        assert_eq!(sel.features, vec![p("sin(x)")]);
        assert!(sel.warning.is_none());
    }

    #[test]
    fn short_library_warns() {
        let lib = aggregate(&[vec![p("sin(x)")]], &names());
        let sel = select_top(&lib, 4).unwrap();
        assert_eq!(sel.features.len(), 1);
        assert!(sel.warning.is_some());
        let empty = aggregate(&[vec![]], &names());
        assert!(matches!(select_top(&empty, 4), Err(FeatureError::EmptyLibrary)));
    }

    #[test]
    fn validity_by_subtree_or_equivalence() {
        let target = p("sin(x) + sin(y^2)");
        let dom = EvalDomain::uniform(2, 0.0, 1.0, 1).unwrap();
        assert!(is_valid_feature(&p("sin(x)"), &target, &dom));
        assert!(is_valid_feature(&p("y*y"), &target, &dom));
        assert!(is_valid_feature(&p("sin(square(y))"), &target, &dom));
        assert!(!is_valid_feature(&p("sin(y)"), &target, &dom));
        assert!(!is_valid_feature(&p("x"), &target, &dom));
        // Equivalent to a subtree without being structurally equal.
        assert!(is_valid_feature(&p("cos(x - 1.5707963267948966)"), &target, &dom));
    }

    #[test]
    fn library_export_lines() {
        let lib = aggregate(&[vec![p("sin(x)"), p("sin(x)"), p("exp(y)")]], &names());
        let mut buf = Vec::new();
        write_library(&lib, Some(&[true, false]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sin(x)\t2\t1\nexp(y)\t1\t0\n");
    }
}
