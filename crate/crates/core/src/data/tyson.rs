//! Two-state cell-cycle switch driven by a piecewise-constant signal `S`.
//!
//! ```text
//! dX1/dt = g1 * (A1 (1 - X1) - B1 X1) / (A1 + B1)
//! dX2/dt = g2 * (A2 (1 - X2) - B2 X2) / (A2 + B2)
//! A1 = exp(s (S + a10 + a12 X2))    B1 = exp(s (b10 + b12 X2))
//! A2 = exp(s (a20 + a21 X1))        B2 = exp(s (b20 + b21 X1))
//! ```

use ndarray::{Array1, Array2};

use super::{DataError, Dataset, Provenance};
use crate::expr::{Expr, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub s: f64,
    pub duration: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TysonConfig {
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub a10: f64,
    pub a12: f64,
    pub a20: f64,
    pub a21: f64,
    pub b10: f64,
    pub b12: f64,
    pub b20: f64,
    pub b21: f64,
    pub schedule: Vec<Segment>,
    pub x1_0: f64,
    pub x2_0: f64,
    /// RK4 steps per sampling interval.
    pub substeps: usize,
}

impl Default for TysonConfig {
    fn default() -> Self {
        let seg = |s| Segment {
            s,
            duration: 20.0,
            samples: 1000,
        };
        TysonConfig {
            sigma: 1.0,
            gamma1: 1.0,
            gamma2: 1.0,
            a10: -0.15,
            a12: 0.0,
            a20: -0.15,
            a21: 0.5,
            b10: -0.4,
            b12: 1.0,
            b20: 0.0,
            b21: 0.0,
            schedule: vec![seg(0.05), seg(0.5), seg(0.25)],
            x1_0: 0.0,
            x2_0: 0.0,
            substeps: 50,
        }
    }
}

impl TysonConfig {
    fn validate(&self) -> Result<(), DataError> {
        if self.schedule.is_empty() {
            return Err(DataError::TysonConfig("empty S schedule".into()));
        }
        for (i, seg) in self.schedule.iter().enumerate() {
            if !(seg.duration > 0.0) {
                return Err(DataError::TysonConfig(format!("segment {i}: duration must be > 0")));
            }
            if seg.samples < 2 {
                return Err(DataError::TysonConfig(format!("segment {i}: need at least 2 samples")));
            }
        }
        if self.substeps == 0 {
            return Err(DataError::TysonConfig("substeps must be >= 1".into()));
        }
        Ok(())
    }

    /// Right-hand side `(dX1/dt, dX2/dt)` at signal `s`.
    pub fn rhs(&self, s: f64, x1: f64, x2: f64) -> (f64, f64) {
        let a1 = (self.sigma * (s + self.a10 + self.a12 * x2)).exp();
        let b1 = (self.sigma * (self.b10 + self.b12 * x2)).exp();
        let a2 = (self.sigma * (self.a20 + self.a21 * x1)).exp();
        let b2 = (self.sigma * (self.b20 + self.b21 * x1)).exp();
        (
            self.gamma1 * (a1 * (1.0 - x1) - b1 * x1) / (a1 + b1),
            self.gamma2 * (a2 * (1.0 - x2) - b2 * x2) / (a2 + b2),
        )
    }

    /// `dX1/dt` as an expression over `(S, X1, X2)`.
    pub fn truth(&self) -> Expr {
        let c = Expr::constant;
        let (s, x1, x2) = (Expr::var(0), Expr::var(1), Expr::var(2));
        let rate = |base: Expr| Expr::unary(UnaryOp::Exp, Expr::mul(c(self.sigma), base));
        let a1 = rate(Expr::add(
            Expr::add(s, c(self.a10)),
            Expr::mul(c(self.a12), x2.clone()),
        ));
        let b1 = rate(Expr::add(c(self.b10), Expr::mul(c(self.b12), x2)));
        let num = Expr::sub(
            Expr::mul(a1.clone(), Expr::sub(c(1.0), x1.clone())),
            Expr::mul(b1.clone(), x1),
        );
        Expr::mul(c(self.gamma1), Expr::div(num, Expr::add(a1, b1)))
    }

    fn rk4(&self, s: f64, (x1, x2): (f64, f64), h: f64) -> (f64, f64) {
        let k1 = self.rhs(s, x1, x2);
        let k2 = self.rhs(s, x1 + 0.5 * h * k1.0, x2 + 0.5 * h * k1.1);
        let k3 = self.rhs(s, x1 + 0.5 * h * k2.0, x2 + 0.5 * h * k2.1);
        let k4 = self.rhs(s, x1 + h * k3.0, x2 + h * k3.1);
        (
            x1 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            x2 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    }
}

/// Integrates across the schedule and samples each segment at
/// `k * duration / samples`, `k = 0..samples`. Columns are `(S, X1, X2)`;
/// the target is the exact `dX1/dt` at each sample.
pub fn tyson_generate(cfg: &TysonConfig) -> Result<Dataset, DataError> {
    cfg.validate()?;
    let n: usize = cfg.schedule.iter().map(|s| s.samples).sum();
    let mut x = Array2::zeros((n, 3));
    let mut y = Array1::zeros(n);
    let mut state = (cfg.x1_0, cfg.x2_0);
    let mut t0 = 0.0;
    let mut row = 0;
    for seg in &cfg.schedule {
        let dt = seg.duration / seg.samples as f64;
        let h = dt / cfg.substeps as f64;
        for k in 0..seg.samples {
            x[[row, 0]] = seg.s;
            x[[row, 1]] = state.0;
            x[[row, 2]] = state.1;
            y[row] = cfg.rhs(seg.s, state.0, state.1).0;
            row += 1;
            for j in 0..cfg.substeps {
                state = cfg.rk4(seg.s, state, h);
                if !(state.0.is_finite() && state.1.is_finite()) {
                    let time = t0 + k as f64 * dt + (j + 1) as f64 * h;
                    return Err(DataError::Diverged { time });
                }
            }
        }
        t0 += seg.duration;
    }
    Ok(Dataset {
        x,
        y,
        names: vec!["S".into(), "X1".into(), "X2".into()],
        provenance: Provenance {
            benchmark: "Tyson".into(),
            seed: 0,
            noise: 0.0,
        },
    })
}
