//! Tables written twice: aligned text for people, TSV for tools.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use featsr::metrics::{min_mse_comparison, MetricsError, TrialOutcome};

use crate::manifest::{Entry, Manifest};
use crate::runner::{Record, Variant};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Table {
        Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut s = self.headers.join("\t");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join("\t"));
            s.push('\n');
        }
        s
    }

    /// Columns padded to their widest cell, two spaces apart.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut s = line(&self.headers);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        s.push_str(&line(&rule));
        for r in &self.rows {
            s.push_str(&line(r));
        }
        s
    }

    /// Writes `<stem>.txt` and `<stem>.tsv` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), CliError> {
        write(&dir.join(format!("{stem}.txt")), &self.to_text())?;
        write(&dir.join(format!("{stem}.tsv")), &self.to_tsv())
    }
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn alpha_key(a: f64) -> String {
    format!("{a}")
}

/// Per-trial search outcomes.
pub fn outcomes(entries: &[Entry]) -> Table {
    let mut t = Table::new(&[
        "variant", "benchmark", "trial", "alpha", "seed", "generations", "best_mse", "recovered", "wall_s",
    ]);
    for e in entries {
        if let Entry::Search {
            variant,
            cell,
            generations,
            best_mse,
            recovered,
            wall_secs,
            ..
        } = e
        {
            t.push(vec![
                variant.name().into(),
                cell.benchmark.clone(),
                cell.trial.to_string(),
                alpha_key(cell.alpha),
                cell.seed.to_string(),
                generations.to_string(),
                format!("{best_mse:.3e}"),
                recovered.clone().unwrap_or_else(|| "-".into()),
                format!("{wall_secs:.1}"),
            ]);
        }
    }
    t
}

/// Recovery rate and mean best MSE per (variant, benchmark, alpha).
pub fn summary(entries: &[Entry]) -> Table {
    let mut groups: BTreeMap<(Variant, String, String), (usize, usize, f64)> = BTreeMap::new();
    for e in entries {
        if let Entry::Search {
            variant,
            cell,
            best_mse,
            recovered,
            ..
        } = e
        {
            let g = groups
                .entry((*variant, cell.benchmark.clone(), alpha_key(cell.alpha)))
                .or_insert((0, 0, 0.0));
            g.0 += 1;
            g.1 += usize::from(recovered.is_some());
            g.2 += best_mse;
        }
    }
    let mut t = Table::new(&["variant", "benchmark", "alpha", "trials", "recovered", "rate", "mean_best_mse"]);
    for ((v, b, a), (n, hit, mse)) in groups {
        t.push(vec![
            v.name().into(),
            b,
            a,
            n.to_string(),
            hit.to_string(),
            format!("{:.2}", hit as f64 / n as f64),
            format!("{:.3e}", mse / n as f64),
        ]);
    }
    t
}

/// Mean EFR / DCG-1 / DCG-2 per (benchmark, alpha).
pub fn metric_grid(entries: &[Entry]) -> Table {
    let mut groups: BTreeMap<(String, u64), (String, usize, [f64; 3])> = BTreeMap::new();
    for e in entries {
        if let Entry::Extract {
            cell, efr, dcg1, dcg2, ..
        } = e
        {
            let g = groups
                .entry((cell.benchmark.clone(), cell.alpha.to_bits()))
                .or_insert((alpha_key(cell.alpha), 0, [0.0; 3]));
            g.1 += 1;
            g.2[0] += efr;
            g.2[1] += dcg1;
            g.2[2] += dcg2;
        }
    }
    let mut t = Table::new(&["benchmark", "alpha", "runs", "efr", "dcg1", "dcg2"]);
    for ((b, _), (a, n, s)) in groups {
        let m = |v: f64| format!("{:.4}", v / n as f64);
        t.push(vec![b, a, n.to_string(), m(s[0]), m(s[1]), m(s[2])]);
    }
    t
}

/// Lowest best-MSE of each variant per benchmark and noise level.
pub fn min_mse(records: &[Record]) -> Result<Table, CliError> {
    let mut groups: BTreeMap<(String, u64), (String, Vec<TrialOutcome>, Vec<TrialOutcome>)> = BTreeMap::new();
    for r in records {
        if let Record::Search(s) = r {
            let g = groups
                .entry((s.cell.benchmark.clone(), s.cell.alpha.to_bits()))
                .or_insert((alpha_key(s.cell.alpha), Vec::new(), Vec::new()));
            match s.variant {
                Variant::Baseline => g.1.push(s.outcome.clone()),
                Variant::Features => g.2.push(s.outcome.clone()),
            }
        }
    }
    let mut t = Table::new(&["benchmark", "alpha", "min_mse_baseline", "min_mse_features", "ratio"]);
    for ((b, _), (a, base, feat)) in groups {
        // Undefined when every trial of a side recovered the target.
        let cells = match min_mse_comparison(&base, &feat) {
            Ok(c) => [c.min_a, c.min_b, c.ratio].map(|v| format!("{v:.3e}")),
            Err(MetricsError::AllRecovered(_)) => ["-".to_string(), "-".to_string(), "-".to_string()],
            Err(e) => return Err(CliError::Runtime(e.to_string())),
        };
        let [x, y, z] = cells;
        t.push(vec![b, a, x, y, z]);
    }
    Ok(t)
}

/// Top features and scores per extraction cell.
pub fn features(records: &[Record]) -> Table {
    let mut t = Table::new(&["benchmark", "trial", "alpha", "efr", "dcg1", "dcg2", "top_features"]);
    for r in records {
        if let Record::Extract(e) = r {
            t.push(vec![
                e.cell.benchmark.clone(),
                e.cell.trial.to_string(),
                alpha_key(e.cell.alpha),
                format!("{:.4}", e.efr),
                format!("{:.4}", e.dcg1),
                format!("{:.4}", e.dcg2),
                e.top.join(", "),
            ]);
        }
    }
    t
}

fn cell_stem(benchmark: &str, trial: usize, alpha: f64) -> String {
    format!("{benchmark}_t{trial}_a{alpha}")
}

/// Everything a run leaves behind in `dir`.
pub fn write_run(dir: &Path, records: &[Record], manifest: &Manifest) -> Result<(), CliError> {
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())));
    mkdir(dir)?;
    let mut buf = Vec::new();
    manifest.write(&mut buf).expect("writing to memory");
    write(&dir.join("manifest.txt"), &String::from_utf8(buf).expect("UTF-8"))?;
    let entries = &manifest.entries;
    let searches = records.iter().any(|r| matches!(r, Record::Search(_)));
    if searches {
        outcomes(entries).save(dir, "outcomes")?;
        summary(entries).save(dir, "summary")?;
        if records.iter().any(|r| matches!(r, Record::Search(s) if s.variant == Variant::Baseline))
            && records.iter().any(|r| matches!(r, Record::Search(s) if s.variant == Variant::Features))
        {
            min_mse(records)?.save(dir, "min_mse")?;
        }
        mkdir(&dir.join("fronts"))?;
    } else {
        features(records).save(dir, "features")?;
        metric_grid(entries).save(dir, "grid")?;
        mkdir(&dir.join("libraries"))?;
        mkdir(&dir.join("traces"))?;
    }
    for r in records {
        match r {
            Record::Search(s) => {
                let stem = format!("{}_{}", s.variant.name(), cell_stem(&s.cell.benchmark, s.cell.trial, s.cell.alpha));
                write(&dir.join("fronts").join(format!("{stem}.tsv")), &s.front)?;
            }
            Record::Extract(e) => {
                let stem = cell_stem(&e.cell.benchmark, e.cell.trial, e.cell.alpha);
                write(&dir.join("libraries").join(format!("{stem}.tsv")), &e.library)?;
                let mut t = String::from("run\tepoch\ttotal\tl2\tsparse\tcontrast\n");
                for (run, trace) in e.traces.iter().enumerate() {
                    for (epoch, l) in trace.epochs.iter().enumerate() {
                        t.push_str(&format!(
                            "{run}\t{epoch}\t{:e}\t{:e}\t{:e}\t{:e}\n",
                            l.total, l.l2, l.sparse, l.contrast
                        ));
                    }
                }
                write(&dir.join("traces").join(format!("{stem}.tsv")), &t)?;
            }
        }
    }
    Ok(())
}

/// Aggregates the records of several manifests into `out`.
pub fn aggregate(manifests: &[Manifest], out: &mut impl Write) -> std::io::Result<Vec<(&'static str, Table)>> {
    let entries: Vec<Entry> = manifests.iter().flat_map(|m| m.entries.iter().cloned()).collect();
    let mut tables = Vec::new();
    let s = summary(&entries);
    if !s.rows.is_empty() {
        writeln!(out, "{}", s.to_text())?;
        tables.push(("summary", s));
    }
    let g = metric_grid(&entries);
    if !g.rows.is_empty() {
        writeln!(out, "{}", g.to_text())?;
        tables.push(("grid", g));
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::Cell;

    #[test]
    fn text_columns_align() {
        let mut t = Table::new(&["a", "long_header"]);
        t.push(vec!["wide cell".into(), "1".into()]);
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a          long_header");
        assert_eq!(lines[1], "---------  -----------");
        assert_eq!(lines[2], "wide cell  1");
        assert_eq!(t.to_tsv(), "a\tlong_header\nwide cell\t1\n");
    }

    #[test]
    fn summary_counts_recoveries() {
        let mk = |trial, rec: bool| Entry::Search {
            variant: Variant::Features,
            cell: Cell {
                benchmark: "B".into(),
                trial,
                alpha: 0.0,
                seed: trial as u64,
            },
            generations: 1,
            best_mse: 1.0,
            recovered: rec.then(|| "x".into()),
            front_hash: String::new(),
            wall_secs: 0.0,
        };
        let t = summary(&[mk(0, true), mk(1, false), mk(2, true), mk(3, true)]);
        assert_eq!(t.rows, vec![vec!["fepysr", "B", "0", "4", "3", "0.75", "1.000e0"]]);
    }
}
