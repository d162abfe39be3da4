use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use featsr::data::{lookup, registry, Suite};
use featsr::gp::read_front;
use featsr::metrics::judge;
use featsr_cli::{config, load_config, read_manifest, replay, report, run, CliError};

#[derive(Parser)]
#[command(name = "featsr", version, about = "Feature-mining symbolic regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List registered benchmarks.
    Bench {
        /// Only names matching this list of names or glob patterns.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Execute a run config, or replay a manifest.
    Run {
        /// key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra key=value settings, applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Re-execute this manifest and verify every record.
        #[arg(long, conflicts_with = "config")]
        replay: Option<PathBuf>,
        /// Worker count override (allowed on replay).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-judge a stored Pareto front against a benchmark's ground truth.
    Judge {
        front: PathBuf,
        #[arg(long)]
        benchmark: String,
        /// Seed of the probe domain.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Aggregate the records of one or more manifests.
    Report {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Also write summary tables (text and TSV) here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the default config.
    Defaults,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench { filter } => {
            let list: Vec<_> = match filter {
                Some(f) => config::select_benchmarks(&f).map_err(CliError::Config)?,
                None => registry().iter().collect(),
            };
            let mut t = report::Table::new(&["name", "suite", "vars", "sampling", "truth"]);
            for b in list {
                let suite = match b.suite {
                    Suite::Standard => "standard",
                    Suite::Recover => "recover",
                    Suite::Unrecover => "unrecover",
                };
                let sampling: Vec<String> = b.sampling.iter().map(|s| format!("{s:?}")).collect();
                t.push(vec![
                    b.name.clone(),
                    suite.into(),
                    b.variables.join(","),
                    sampling.join(" "),
                    b.truth.render(&b.variables).to_string(),
                ]);
            }
            print!("{}", t.to_text());
        }
        Command::Run {
            config,
            mut sets,
            replay: replay_path,
            workers,
        } => {
            if let Some(w) = workers {
                sets.push(format!("run.num_workers={w}"));
            }
            if let Some(path) = replay_path {
                let manifest = read_manifest(&path)?;
                let overrides: BTreeMap<String, String> = sets
                    .iter()
                    .filter_map(|s| s.split_once('='))
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .collect();
                let records = replay(&manifest, &overrides)?;
                println!("replay matches: {} records identical", records.len());
            } else {
                let cfg = load_config(config.as_deref(), &sets)?;
                let (_, manifest) = run(&cfg)?;
                let entries = &manifest.entries;
                let summary = report::summary(entries);
                if !summary.rows.is_empty() {
                    print!("{}", summary.to_text());
                }
                let grid = report::metric_grid(entries);
                if !grid.rows.is_empty() {
                    print!("{}", grid.to_text());
                }
                println!("wrote {}", cfg.output.display());
            }
        }
        Command::Judge { front, benchmark, seed } => {
            let b = lookup(&benchmark)
                .ok_or_else(|| CliError::Config(vec![format!("unknown benchmark `{benchmark}`")]))?;
            let file = File::open(&front).map_err(|e| CliError::Io(format!("{}: {e}", front.display())))?;
            let records = read_front(BufReader::new(file), &b.variables)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", front.display())))?;
            let cands: Vec<_> = records.iter().map(|r| r.inlined.clone()).collect();
            match judge(&cands, b, seed) {
                Some(r) => println!(
                    "recovered: {} (probes {}, seed {}, rel_tol {:e})",
                    r.expr.render(&b.variables),
                    r.certificate.probes,
                    r.certificate.domain_seed,
                    r.certificate.rel_tol
                ),
                None => println!("not recovered ({} front entries checked)", cands.len()),
            }
        }
        Command::Report { manifests, output } => {
            let ms = manifests.iter().map(|p| read_manifest(p)).collect::<Result<Vec<_>, _>>()?;
            let tables = report::aggregate(&ms, &mut std::io::stdout().lock())
                .map_err(|e| CliError::Io(e.to_string()))?;
            if let Some(dir) = output {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                for (stem, t) in &tables {
                    t.save(&dir, stem)?;
                }
            }
        }
        Command::Defaults => {
            for (k, v) in config::defaults() {
                println!("{k}={v}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
