use std::time::Duration;

use featsr::data::{generate, lookup};
use featsr::expr::{equivalent, eval_point, evaluate, parse, EvalDomain, Expr};
use featsr::features::augment;
use featsr::gp::{crossover, mse, read_front, refine_constants, search, write_front, GpConfig, GpError};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

fn p(s: &str) -> Expr {
    parse(s, &names()).unwrap()
}

fn grid(n: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, 1), |(r, _)| lo + (hi - lo) * r as f64 / (n - 1) as f64)
}

fn quick(seed: u64) -> GpConfig {
    GpConfig {
        population: 100,
        iterations: 60,
        time_budget: None,
        seed,
        ..GpConfig::default()
    }
}

#[test]
fn identity_target_is_found_exactly() {
    let x = grid(20, -1.0, 1.0);
    let y = x.column(0).to_owned();
    let dom = EvalDomain::uniform(1, -1.0, 1.0, 0).unwrap();
    for seed in 0..10 {
        let r = search(x.view(), y.view(), &quick(seed)).unwrap();
        let hit = r
            .front
            .entries()
            .any(|c| c.mse < 1e-20 && equivalent(&c.expr, &Expr::Var(0), &dom, 1e-9).unwrap());
        assert!(hit, "seed {seed}");
    }
}

#[test]
fn constant_target_fits_a_single_constant() {
    let x = grid(20, -1.0, 1.0);
    let y = Array1::from_elem(20, 3.5);
    let r = search(x.view(), y.view(), &quick(1)).unwrap();
    let first = r.front.entries().next().unwrap();
    assert_eq!(first.complexity, 1);
    match first.expr {
        Expr::Const(c) => assert!((c - 3.5).abs() <= 1e-6, "{c}"),
        ref e => panic!("expected a constant, got {e:?}"),
    }
}

#[test]
fn refit_matches_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((30, 1), |_| rng.random_range(-2.0..2.0));
    let y = x.column(0).mapv(|v| 2.0 * v);
    // Least squares for y = c x: c = sum(xy) / sum(x^2).
    let c_star = x.column(0).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
        / x.column(0).iter().map(|a| a * a).sum::<f64>();
    let fit = refine_constants(&p("0.3 * x"), x.view(), y.view());
    let c = fit.constants()[0];
    assert!((c - c_star).abs() <= 1e-6 && (c - 2.0).abs() <= 1e-6, "{c}");
}

#[test]
fn refit_sine_frequency_matches_grid_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Array2<f64> = Array2::from_shape_fn((50, 1), |_| rng.random_range(0.1..4.0));
    let y = x.column(0).mapv(|v: f64| (1.5 * v).sin());
    let loss = |c: f64| {
        x.column(0)
            .iter()
            .zip(&y)
            .map(|(v, t)| ((c * v).sin() - t).powi(2))
            .sum::<f64>()
    };
    // Fine grid over [1, 2].
    let oracle = (0..=100_000)
        .map(|i| 1.0 + i as f64 / 100_000.0)
        .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
        .unwrap();
    let fit = refine_constants(&p("sin(1.4 * x)"), x.view(), y.view());
    let c = fit.constants()[0];
    assert!((c - oracle).abs() <= 1e-3 && (c - 1.5).abs() <= 1e-3, "{c} vs {oracle}");
    assert!(mse(&fit, x.view(), y.view()) <= mse(&p("sin(1.4 * x)"), x.view(), y.view()));
}

#[test]
fn front_is_consistent_and_history_monotone() {
    let b = lookup("Nguyen-5").unwrap();
    let ds = generate(b, 2).unwrap();
    let r = search(ds.x.view(), ds.y.view(), &quick(2)).unwrap();
    assert!(r.front.is_consistent());
    let entries: Vec<_> = r.front.entries().collect();
    for w in entries.windows(2) {
        assert!(w[0].complexity < w[1].complexity && w[0].mse > w[1].mse);
    }
    for w in r.best_history.windows(2) {
        assert!(w[1] <= w[0]);
    }
    assert_eq!(r.best_history.len(), r.generations + 1);
    // Every reported expression is finite on all training rows.
    for c in entries {
        let v = evaluate(&c.expr, ds.x.view()).unwrap();
        assert!(v.iter().all(|v| v.is_finite()));
        assert_eq!(c.complexity, c.expr.complexity());
    }
}

#[test]
fn same_seed_same_front() {
    let b = lookup("Nguyen-3").unwrap();
    let ds = generate(b, 3).unwrap();
    let a = search(ds.x.view(), ds.y.view(), &quick(9)).unwrap();
    let c = search(ds.x.view(), ds.y.view(), &quick(9)).unwrap();
    assert_eq!(a.front, c.front);
    assert_eq!(a.evaluations, c.evaluations);
}

#[test]
fn budgeted_run_replays_by_generation_count() {
    let b = lookup("Nguyen-7").unwrap();
    let ds = generate(b, 4).unwrap();
    let timed = GpConfig {
        iterations: usize::MAX,
        time_budget: Some(Duration::from_millis(300)),
        early_stop_mse: None,
        ..quick(4)
    };
    let a = search(ds.x.view(), ds.y.view(), &timed).unwrap();
    assert!(a.generations > 0);
    let replay = GpConfig {
        iterations: a.generations,
        time_budget: None,
        ..timed
    };
    let c = search(ds.x.view(), ds.y.view(), &replay).unwrap();
    assert_eq!(a.front, c.front);
    assert_eq!(a.best_history, c.best_history);
}

#[test]
fn inlined_forms_agree_with_column_forms() {
    let b = lookup("Nguyen-12").unwrap();
    let ds = generate(b, 0).unwrap();
    let aug = augment(&ds, &[p("x^2"), p("y^2")]).unwrap();
    let r = search(aug.x.view(), aug.y.view(), &quick(0)).unwrap();
    let dom = EvalDomain::uniform(2, 0.0, 1.0, 1).unwrap();
    for c in r.front.entries() {
        let inl = aug.inline(&c.expr);
        assert!(inl.max_var().is_none_or(|v| v < 2));
        for row in 0..aug.x.nrows() {
            let col = eval_point(&c.expr, aug.x.row(row).as_slice().unwrap());
            let raw = eval_point(&inl, ds.x.row(row).as_slice().unwrap());
            assert!((col - raw).abs() <= 1e-9 * (1.0 + col.abs()), "{col} vs {raw}");
        }
        let lifted = c.expr.substitute(&|i| (i >= 2).then(|| [p("x^2"), p("y^2")][i - 2].clone()));
        assert!(equivalent(&lifted, &inl, &dom, 1e-9).unwrap());
    }
}

#[test]
fn front_file_round_trips() {
    let b = lookup("Nguyen-12").unwrap();
    let ds = generate(b, 1).unwrap();
    let aug = augment(&ds, &[p("x^2")]).unwrap();
    let r = search(aug.x.view(), aug.y.view(), &quick(1)).unwrap();
    let mut buf = Vec::new();
    write_front(&r.front, &aug.names, &ds.names, &|e| aug.inline(e), &mut buf).unwrap();
    let back = read_front(&buf[..], &ds.names).unwrap();
    assert_eq!(back.len(), r.front.len());
    for (rec, c) in back.iter().zip(r.front.entries()) {
        assert_eq!(rec.complexity, c.complexity);
        assert_eq!(rec.mse.to_bits(), c.mse.to_bits());
        assert_eq!(rec.column_form, c.expr.render(&aug.names).to_string());
        assert_eq!(rec.inlined, aug.inline(&c.expr));
    }
    assert!(read_front(&b"1\t2\n"[..], &ds.names).is_err());
}

#[test]
fn bad_inputs_are_rejected() {
    let x = grid(20, -1.0, 1.0);
    let nan = Array1::from_elem(20, f64::NAN);
    assert_eq!(search(x.view(), nan.view(), &quick(0)).unwrap_err(), GpError::Degenerate);
    let small = grid(5, 0.0, 1.0);
    let y = Array1::zeros(5);
    assert_eq!(search(small.view(), y.view(), &quick(0)).unwrap_err(), GpError::TooFewRows(5));
    let y20 = Array1::zeros(19);
    assert!(matches!(search(x.view(), y20.view(), &quick(0)), Err(GpError::Shape { .. })));
    let bad = GpConfig {
        population: 1,
        ..quick(0)
    };
    assert!(matches!(search(x.view(), x.column(0), &bad), Err(GpError::Config(_))));
}

/// Root label of every node, as a sorted multiset.
fn labels(e: &Expr) -> Vec<String> {
    let mut out: Vec<String> = e
        .subtrees()
        .into_iter()
        .map(|s| match s {
            Expr::Var(i) => format!("v{i}"),
            Expr::Const(c) => format!("c{}", c.to_bits()),
            Expr::Unary(op, _) => format!("u{op:?}"),
            Expr::Binary(op, _, _) => format!("b{op:?}"),
        })
        .collect();
    out.sort();
    out
}

const POOL: [&str; 8] = [
    "x",
    "sin(x) + y",
    "x * y - 2.5",
    "exp(cos(x)) / (y + 1)",
    "sqrt(x * x + y * y)",
    "(x - y) * (x + y) * 3",
    "cos(sin(cos(y)))",
    "x + x + x + x + y",
];

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn crossover_only_reuses_parent_nodes(i in 0usize..8, j in 0usize..8, cap in 3usize..20, seed in any::<u64>()) {
        let (a, b) = (p(POOL[i]), p(POOL[j]));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let child = crossover(&a, &b, cap, &mut rng);
        prop_assert!(child.complexity() <= cap.max(a.complexity()));
        if child.complexity() > cap {
            prop_assert_eq!(&child, &a);
        }
        let mut pool = labels(&a);
        pool.extend(labels(&b));
        for l in labels(&child) {
            let k = pool.iter().position(|x| *x == l);
            prop_assert!(k.is_some(), "{} not in parents", l);
            pool.swap_remove(k.unwrap());
        }
    }
}
