use std::collections::BTreeMap;
use std::fs;
use std::process::Command;

use featsr_cli::config::{self, Mode};
use featsr_cli::manifest::{Entry, Manifest};
use featsr_cli::runner::{cells, dataset};
use featsr_cli::{replay, run, CliError};

fn cfg(pairs: &[(&str, &str)], out: &std::path::Path) -> config::RunConfig {
    let mut e: BTreeMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    e.insert("run.output".into(), out.display().to_string());
    config::validate(&e).unwrap()
}

const FAST: [(&str, &str); 5] = [
    ("run.num_experiments", "2"),
    ("run.num_workers", "2"),
    ("fmn.epochs", "5"),
    ("gp.population", "50"),
    ("gp.iterations", "40"),
];

#[test]
fn fepysr_smoke_run_reports_every_trial() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = FAST.to_vec();
    pairs.extend([("run.mode", "fepysr"), ("run.benchmark", "Nguyen-1"), ("run.trials", "10")]);
    let c = cfg(&pairs, dir.path());
    let (records, manifest) = run(&c).unwrap();
    assert_eq!(records.len(), 10);
    assert_eq!(manifest.entries.len(), 10);
    let outcomes = fs::read_to_string(dir.path().join("outcomes.tsv")).unwrap();
    assert_eq!(outcomes.lines().count(), 11);
    let summary = fs::read_to_string(dir.path().join("summary.tsv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(&row[..4], ["fepysr", "Nguyen-1", "0", "10"]);
    assert!(dir.path().join("summary.txt").exists());
    assert_eq!(fs::read_dir(dir.path().join("fronts")).unwrap().count(), 10);
    let text = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert_eq!(Manifest::parse(&text).unwrap().hash, c.hash());
}

#[test]
fn baseline_and_features_modes_share_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let base = [("run.benchmark", "Nguyen-12,Jin-1"), ("run.trials", "3"), ("run.noise", "0,0.1")];
    let mut a = base.to_vec();
    a.push(("run.mode", "sr-baseline"));
    let mut b = base.to_vec();
    b.push(("run.mode", "fepysr"));
    let (ca, cb) = (cfg(&a, dir.path()), cfg(&b, dir.path()));
    assert_ne!(ca.hash(), cb.hash());
    let (xa, xb) = (cells(&ca), cells(&cb));
    assert_eq!(xa, xb);
    assert_eq!(xa.len(), 12);
    for c in &xa {
        assert_eq!(dataset(&ca, c).unwrap(), dataset(&cb, c).unwrap());
    }
    // Different trials draw different data.
    assert_ne!(dataset(&ca, &xa[0]).unwrap().x, dataset(&ca, &xa[2]).unwrap().x);
}

#[test]
fn noise_sweep_grid_has_a_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = FAST.to_vec();
    pairs.extend([
        ("run.mode", "noise-sweep"),
        ("run.benchmark", "Nguyen-9"),
        ("run.trials", "1"),
        ("run.noise", "0,0.02,0.04,0.06,0.08,0.1,0.2"),
    ]);
    let c = cfg(&pairs, dir.path());
    assert_eq!(c.mode, Mode::NoiseSweep);
    run(&c).unwrap();
    let grid = fs::read_to_string(dir.path().join("grid.tsv")).unwrap();
    assert_eq!(grid.lines().count(), 8);
    assert_eq!(fs::read_dir(dir.path().join("libraries")).unwrap().count(), 7);
    let trace = fs::read_to_string(dir.path().join("traces").join("Nguyen-9_t0_a0.tsv")).unwrap();
    // header + 2 runs x 5 epochs
    assert_eq!(trace.lines().count(), 11);
}

#[test]
fn tampered_manifest_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = FAST.to_vec();
    pairs.extend([("run.mode", "sr-baseline"), ("run.benchmark", "Nguyen-3"), ("run.trials", "2")]);
    let (_, mut manifest) = run(&cfg(&pairs, dir.path())).unwrap();
    assert!(replay(&manifest, &BTreeMap::new()).is_ok());
    if let Entry::Search { best_mse, .. } = &mut manifest.entries[1] {
        *best_mse = f64::from_bits(best_mse.to_bits() ^ 1);
    }
    assert!(matches!(replay(&manifest, &BTreeMap::new()), Err(CliError::ReplayMismatch(_))));
    let over = BTreeMap::from([("run.seed".to_string(), "5".to_string())]);
    assert!(matches!(replay(&manifest, &over), Err(CliError::Config(_))));
}

fn featsr(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_featsr")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn exit_codes() {
    let (code, out, _) = featsr(&["bench", "--filter", "Nguyen-1?"]);
    assert_eq!(code, 0);
    assert!(out.contains("Nguyen-12"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "run.trials=0\nrun.benchmark=Nope\nrun.mode=x\n").unwrap();
    let (code, _, err) = featsr(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    for key in ["run.trials", "run.benchmark", "run.mode"] {
        assert!(err.contains(key), "{err}");
    }

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = format!("run.output={}/sub", blocker.display());
    let (code, _, _) = featsr(&["run", "--set", "run.trials=1", "--set", &out]);
    assert_eq!(code, 2);
}

#[test]
fn judge_subcommand_reads_fronts() {
    let dir = tempfile::tempdir().unwrap();
    let front = dir.path().join("front.tsv");
    fs::write(&front, "1\t1e0\tx\tx\n5\t0e0\tx + x*x + x*x*x\tx + x*x + x*x*x\n").unwrap();
    let (code, out, _) = featsr(&["judge", front.to_str().unwrap(), "--benchmark", "Nguyen-1"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("recovered"), "{out}");
    fs::write(&front, "1\t1e0\tx\tx\n").unwrap();
    let (_, out, _) = featsr(&["judge", front.to_str().unwrap(), "--benchmark", "Nguyen-1"]);
    assert!(out.starts_with("not recovered"), "{out}");
}

#[test]
fn report_aggregates_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = FAST.to_vec();
    pairs.extend([("run.mode", "sr-baseline"), ("run.benchmark", "Nguyen-1"), ("run.trials", "2")]);
    run(&cfg(&pairs, dir.path())).unwrap();
    let m = dir.path().join("manifest.txt");
    let agg = dir.path().join("agg");
    let (code, out, _) = featsr(&["report", m.to_str().unwrap(), m.to_str().unwrap(), "--output", agg.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    let tsv = fs::read_to_string(agg.join("summary.tsv")).unwrap();
    let row: Vec<&str> = tsv.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(&row[..4], ["sr-baseline", "Nguyen-1", "0", "4"]);
}
