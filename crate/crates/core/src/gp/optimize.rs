//! Derivative-free constant fitting.

use crate::expr::Expr;

use super::program::{Data, Program};

/// Minimizes `f` from `x0` with the Nelder–Mead simplex method. Stops after
/// `max_evals` evaluations or when the simplex values agree within `ftol`
/// (absolute plus relative). Returns the best point and its value.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect()
    };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if worst.is_finite() && (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let xr = point(&centroid, &simplex[n].0, -1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = point(&centroid, &simplex[n].0, -2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = point(&centroid, &xr, 0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = point(&centroid, &simplex[n].0, 0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = point(&x0, &s.0, 0.5);
                    s.1 = eval(&s.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Jointly refits the constants of `e` to `data`. Never returns a worse fit;
/// expressions without constants come back unchanged.
pub(crate) fn refine(e: &Expr, data: &Data, max_evals: usize) -> (Expr, f64) {
    let prog = Program::compile(e);
    let mut stack = Vec::new();
    let start = prog.mse(data, &mut stack);
    if prog.consts.is_empty() {
        return (e.clone(), start);
    }
    let step: Vec<f64> = prog.consts.iter().map(|c| 0.1 * c.abs().max(0.1)).collect();
    let mut f = |c: &[f64]| prog.mse_with(c, data, &mut stack);
    let (mut best, mut val) = nelder_mead(&mut f, &prog.consts, &step, max_evals, 1e-15);
    // One restart from the optimum escapes most premature collapses.
    if val.is_finite() {
        let step2: Vec<f64> = best.iter().map(|c| 0.05 * c.abs().max(0.01)).collect();
        let (b2, v2) = nelder_mead(&mut f, &best, &step2, max_evals / 2, 1e-15);
        if v2 < val {
            best = b2;
            val = v2;
        }
    }
    if val < start {
        (e.with_constants(&best), val)
    } else {
        (e.clone(), start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    #[test]
    fn rosenbrock_minimum() {
        let f = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let (x, v) = nelder_mead(f, &[-1.2, 1.0], &[0.1, 0.1], 5000, 1e-20);
        assert!(v < 1e-12, "{v}");
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn constant_free_expression_is_unchanged() {
        let x = Array2::from_shape_fn((10, 1), |(r, _)| r as f64);
        let y = Array1::from_iter((0..10).map(|r| r as f64));
        let data = Data::new(x.view(), y.view());
        let e = Expr::Var(0);
        assert_eq!(refine(&e, &data, 100), (e, 0.0));
    }
}
