use featsr::data::{generate, lookup, read_dataset, registry, write_dataset, Sampling, Suite};
use featsr::expr::{equivalent, eval_point, parse, simplify, EvalDomain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn registry_covers_every_suite() {
    let r = registry();
    let standard = r.iter().filter(|b| b.suite == Suite::Standard).count();
    assert_eq!(standard, 57);
    assert!(standard >= 51);
    assert_eq!(r.iter().filter(|b| b.suite == Suite::Recover).count(), 36);
    assert_eq!(r.iter().filter(|b| b.suite == Suite::Unrecover).count(), 29);
    let mut names: Vec<_> = r.iter().map(|b| b.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), r.len());
}

#[test]
fn ground_truths_round_trip_through_text() {
    for b in registry() {
        assert_eq!(b.sampling.len(), b.arity(), "{}", b.name);
        let text = b.truth.render(&b.variables).to_string();
        assert_eq!(parse(&text, &b.variables).unwrap(), b.truth, "{}: {text}", b.name);
    }
}

#[test]
fn ground_truths_are_finite_on_their_domains() {
    for b in registry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut finite = 0;
        for _ in 0..10_000 {
            let p: Vec<f64> = b
                .sampling
                .iter()
                .map(|s| {
                    let (lo, hi) = s.bounds();
                    rng.random_range(lo..hi)
                })
                .collect();
            if eval_point(&b.truth, &p).is_finite() {
                finite += 1;
            }
        }
        assert!(finite >= 9_900, "{}: {finite}/10000 finite", b.name);
    }
}

#[test]
fn simplification_preserves_meaning_and_never_grows() {
    for b in registry() {
        let s = simplify(&b.truth);
        assert_eq!(simplify(&s), s, "{} not idempotent", b.name);
        assert!(
            s.complexity() <= b.truth.complexity(),
            "{}: {} -> {}",
            b.name,
            b.truth.complexity(),
            s.complexity()
        );
        let dom = b.domain(5);
        assert_eq!(equivalent(&b.truth, &s, &dom, 1e-9), Ok(true), "{}: {s}", b.name);
    }
}

#[test]
fn table_examples() {
    let n12 = lookup("Nguyen-12").unwrap();
    assert_eq!(n12.truth, parse("x^4 - x^3 + 0.5*y^2 - y", &n12.variables).unwrap());
    assert_eq!(n12.sampling[0], Sampling::Uniform { lo: 0.0, hi: 1.0, n: 20 });
    let l22 = lookup("Livermore-22").unwrap();
    assert_eq!(l22.truth, parse("exp(-0.5*x^2)", &l22.variables).unwrap());
    assert_eq!(l22.sampling[0], Sampling::Uniform { lo: -3.0, hi: 3.0, n: 100 });
    assert!(lookup("Constant-1").unwrap().constant_tolerant);
    assert!(!lookup("Constant-3").unwrap().constant_tolerant);
    assert!(lookup("Livermore-1").unwrap().constant_tolerant);
    assert!(!lookup("Nguyen-12").unwrap().constant_tolerant);
}

#[test]
fn even_grid_and_uniform_sampling() {
    let r1 = generate(lookup("R-1").unwrap(), 0).unwrap();
    assert_eq!(r1.x[[0, 0]], -5.0);
    assert_eq!(r1.x[[99, 0]], 5.0);
    assert!((r1.x[[1, 0]] - r1.x[[0, 0]] - 10.0 / 99.0).abs() < 1e-12);

    let b = lookup("Nguyen-9").unwrap();
    let a = generate(b, 1).unwrap();
    let c = generate(b, 2).unwrap();
    assert_ne!(a.x, c.x);
    for ds in [&a, &c] {
        assert!(ds.x.iter().all(|v| (0.0..1.0).contains(v)));
    }
    assert_eq!(generate(b, 1).unwrap(), a);
}

#[test]
fn nguyen_eight_squares_back_to_input() {
    let ds = generate(lookup("Nguyen-8").unwrap(), 3).unwrap();
    for (row, y) in ds.x.rows().into_iter().zip(ds.y.iter()) {
        assert!(y.is_finite());
        assert!((y * y - row[0]).abs() < 1e-12);
    }
}

#[test]
fn grid_domain_violation_lists_rows() {
    use featsr::data::{Benchmark, DataError};
    let b = Benchmark {
        name: "log-grid".into(),
        variables: vec!["x".into()],
        truth: parse("log(x)", &["x".to_string()]).unwrap(),
        sampling: vec![Sampling::Even { lo: -1.0, hi: 1.0, n: 5 }],
        constant_tolerant: false,
        suite: Suite::Standard,
    };
    match generate(&b, 0) {
        Err(DataError::GridDomain { rows, .. }) => assert_eq!(rows, vec![0, 1, 2]),
        other => panic!("expected grid error, got {other:?}"),
    }
}

#[test]
fn dataset_file_round_trip_is_lossless() {
    let ds = generate(lookup("Jin-6").unwrap(), 9).unwrap();
    let mut buf = Vec::new();
    write_dataset(&ds, &mut buf).unwrap();
    let back = read_dataset(buf.as_slice()).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn equivalence_is_symmetric_on_fixture_pairs() {
    let r = registry();
    let dom = EvalDomain::uniform(4, 0.1, 2.0, 3).unwrap();
    for (i, a) in r.iter().enumerate().step_by(3) {
        for b in r.iter().skip(i % 7).step_by(11) {
            let ab = equivalent(&a.truth, &b.truth, &dom, 1e-6);
            let ba = equivalent(&b.truth, &a.truth, &dom, 1e-6);
            assert_eq!(ab.is_ok(), ba.is_ok());
            if let (Ok(x), Ok(y)) = (ab, ba) {
                assert_eq!(x, y, "{} vs {}", a.name, b.name);
            }
        }
    }
}
