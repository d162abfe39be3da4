use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{eval_point, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivError {
    #[error("interval {index} is empty or inverted: [{lo}, {hi}]")]
    BadInterval { index: usize, lo: f64, hi: f64 },
    #[error("at least 16 probes are required, got {0}")]
    TooFewProbes(usize),
    #[error("expression uses variable {needed} but the domain covers {available}")]
    UncoveredVariable { needed: usize, available: usize },
    #[error("indeterminate: an expression is undefined at every probe")]
    Indeterminate,
}

/// Probe region for the equivalence oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalDomain {
    pub intervals: Vec<(f64, f64)>,
    pub probes: usize,
    pub seed: u64,
}

impl EvalDomain {
    pub const DEFAULT_PROBES: usize = 64;

    pub fn new(intervals: Vec<(f64, f64)>, probes: usize, seed: u64) -> Result<Self, EquivError> {
        let dom = EvalDomain {
            intervals,
            probes,
            seed,
        };
        dom.validate()?;
        Ok(dom)
    }

    /// Same interval on every one of `d` variables, default probe count.
    pub fn uniform(d: usize, lo: f64, hi: f64, seed: u64) -> Result<Self, EquivError> {
        EvalDomain::new(vec![(lo, hi); d], Self::DEFAULT_PROBES, seed)
    }

    fn validate(&self) -> Result<(), EquivError> {
        for (index, &(lo, hi)) in self.intervals.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(EquivError::BadInterval { index, lo, hi });
            }
        }
        if self.probes < 16 {
            return Err(EquivError::TooFewProbes(self.probes));
        }
        Ok(())
    }

    /// Probe points, deterministic in the seed.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.probes)
            .map(|_| {
                self.intervals
                    .iter()
                    .map(|&(lo, hi)| rng.random_range(lo..hi))
                    .collect()
            })
            .collect()
    }
}

/// Sampling-based semantic equivalence.
///
/// Both expressions must be finite on at least 90% of the probes, and at
/// every probe where both are finite `|a - b| <= rel_tol * (1 + max(|a|, |b|))`.
/// Structurally identical expressions are equivalent whenever they are
/// defined anywhere, regardless of coverage.
pub fn equivalent(a: &Expr, b: &Expr, dom: &EvalDomain, rel_tol: f64) -> Result<bool, EquivError> {
    dom.validate()?;
    for e in [a, b] {
        if let Some(m) = e.max_var() {
            if m >= dom.intervals.len() {
                return Err(EquivError::UncoveredVariable {
                    needed: m + 1,
                    available: dom.intervals.len(),
                });
            }
        }
    }
    let points = dom.points();
    let va: Vec<f64> = points.iter().map(|p| eval_point(a, p)).collect();
    let vb: Vec<f64> = points.iter().map(|p| eval_point(b, p)).collect();
    let fa = va.iter().filter(|v| v.is_finite()).count();
    let fb = vb.iter().filter(|v| v.is_finite()).count();
    if fa == 0 || fb == 0 {
        return Err(EquivError::Indeterminate);
    }
    if a == b {
        return Ok(true);
    }
    let need = (0.9 * dom.probes as f64).ceil() as usize;
    if fa < need || fb < need {
        return Ok(false);
    }
    Ok(va.iter().zip(&vb).all(|(&x, &y)| {
        !(x.is_finite() && y.is_finite()) || (x - y).abs() <= rel_tol * (1.0 + x.abs().max(y.abs()))
    }))
}

/// Snaps constants within `tol` of an integer or half-integer onto it.
pub fn snap_constants(e: &Expr, tol: f64) -> Expr {
    e.map_constants(&mut |c| {
        let snapped = (c * 2.0).round() / 2.0;
        if (c - snapped).abs() <= tol {
            snapped
        } else {
            c
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn x() -> Vec<String> {
        vec!["x".into()]
    }

    fn dom() -> EvalDomain {
        EvalDomain::uniform(1, -1.0, 1.0, 7).unwrap()
    }

    #[test]
    fn expanded_square_is_equivalent() {
        let a = parse("(x+1)^2", &x()).unwrap();
        let b = parse("x^2 + 2*x + 1", &x()).unwrap();
        assert_eq!(equivalent(&a, &b, &dom(), 1e-9), Ok(true));
        assert_eq!(equivalent(&a, &a, &dom(), 1e-9), Ok(true));
    }

    #[test]
    fn small_offset_is_detected() {
        let a = parse("x^2", &x()).unwrap();
        let b = parse("x^2 + 0.01", &x()).unwrap();
        // brute force: at every probe the gap is 0.01 while the allowed slack is
        // at most 1e-9 * (1 + 1.01)
        let pts = dom().points();
        assert!(pts.iter().all(|p| 0.01 > 1e-9 * (1.0 + (p[0] * p[0] + 0.01).abs())));
        assert_eq!(equivalent(&a, &b, &dom(), 1e-9), Ok(false));
    }

    #[test]
    fn all_nan_is_indeterminate() {
        let a = parse("log(x - 5)", &x()).unwrap();
        let b = Expr::var(0);
        assert_eq!(equivalent(&a, &b, &dom(), 1e-9), Err(EquivError::Indeterminate));
        assert_eq!(equivalent(&b, &a, &dom(), 1e-9), Err(EquivError::Indeterminate));
    }

    #[test]
    fn sparse_coverage_is_not_equivalent() {
        // log(x) is undefined on half of [-1, 1]
        let a = parse("log(x)", &x()).unwrap();
        let b = parse("log(abs(x))", &x()).unwrap();
        assert_eq!(equivalent(&a, &b, &dom(), 1e-9), Ok(false));
        assert_eq!(equivalent(&a, &a, &dom(), 1e-9), Ok(true));
    }

    #[test]
    fn domain_validation() {
        assert!(matches!(
            EvalDomain::new(vec![(1.0, 1.0)], 64, 0),
            Err(EquivError::BadInterval { .. })
        ));
        assert_eq!(
            EvalDomain::new(vec![(0.0, 1.0)], 8, 0),
            Err(EquivError::TooFewProbes(8))
        );
        let e = parse("x + y", &["x".to_string(), "y".to_string()]).unwrap();
        assert!(matches!(
            equivalent(&e, &e, &dom(), 1e-9),
            Err(EquivError::UncoveredVariable { .. })
        ));
    }

    #[test]
    fn snapping_targets_integers_and_halves() {
        let e = parse("2.00003*x + 0.49996 - 0.779", &x()).unwrap();
        assert_eq!(snap_constants(&e, 1e-4).constants(), vec![2.0, 0.5, 0.779]);
    }
}
