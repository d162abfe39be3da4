//! Plain-text dataset files.
//!
//! ```text
//! # featsr-dataset 1
//! # benchmark: Nguyen-12
//! # seed: 7
//! # noise: 0e0
//! x y target
//! 1.5e-1 8.2e-1 -3.1e-1
//! ```
//!
//! Numbers use the shortest decimal form that parses back to the same
//! double, so a write/read cycle is lossless.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use super::{DataError, Dataset, Provenance};

const MAGIC: &str = "# featsr-dataset 1";
const TARGET: &str = "target";

pub fn write_dataset(ds: &Dataset, out: &mut impl Write) -> Result<(), DataError> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "# benchmark: {}", ds.provenance.benchmark)?;
    writeln!(out, "# seed: {}", ds.provenance.seed)?;
    writeln!(out, "# noise: {:e}", ds.provenance.noise)?;
    writeln!(out, "{} {TARGET}", ds.names.join(" "))?;
    for (row, y) in ds.x.rows().into_iter().zip(ds.y.iter()) {
        for v in row {
            write!(out, "{v:e} ")?;
        }
        writeln!(out, "{y:e}")?;
    }
    Ok(())
}

fn format_err(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Format {
        line,
        msg: msg.into(),
    }
}

pub fn read_dataset(input: impl BufRead) -> Result<Dataset, DataError> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String), DataError> {
        match lines.next() {
            Some((i, l)) => Ok((i, l?)),
            None => Err(format_err(0, format!("missing {what}"))),
        }
    };
    let (i, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(format_err(i, "not a dataset file"));
    }
    let mut field = |key: &str| -> Result<(usize, String), DataError> {
        let (i, l) = next(key)?;
        let prefix = format!("# {key}:");
        match l.strip_prefix(&prefix) {
            Some(v) => Ok((i, v.trim().to_string())),
            None => Err(format_err(i, format!("expected `{prefix}`"))),
        }
    };
    let (_, benchmark) = field("benchmark")?;
    let (i, seed) = field("seed")?;
    let seed: u64 = seed.parse().map_err(|_| format_err(i, "bad seed"))?;
    let (i, noise) = field("noise")?;
    let noise: f64 = noise.parse().map_err(|_| format_err(i, "bad noise level"))?;
    let (i, header) = next("column header")?;
    let mut names: Vec<String> = header.split_whitespace().map(str::to_string).collect();
    if names.pop().as_deref() != Some(TARGET) {
        return Err(format_err(i, "last column must be `target`"));
    }
    let d = names.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, l) in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| format_err(i, "malformed number"))?;
        if vals.len() != d + 1 {
            return Err(format_err(
                i,
                format!("expected {} values, found {}", d + 1, vals.len()),
            ));
        }
        xs.extend_from_slice(&vals[..d]);
        ys.push(vals[d]);
    }
    let n = ys.len();
    let x = Array2::from_shape_vec((n, d), xs).expect("row lengths checked");
    Ok(Dataset {
        x,
        y: Array1::from(ys),
        names,
        provenance: Provenance {
            benchmark,
            seed,
            noise,
        },
    })
}
