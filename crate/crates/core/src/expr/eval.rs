use ndarray::{Array1, ArrayView2};
use thiserror::Error;

use super::Expr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("expression needs {needed} column(s) but the input has {available}")]
    DimensionMismatch { needed: usize, available: usize },
}

/// Evaluates `e` at every row of `x` (shape n×d).
///
/// Out-of-domain operations (log of a non-positive value, sqrt of a negative,
/// division by zero) give NaN in that row; evaluation never aborts.
pub fn evaluate(e: &Expr, x: ArrayView2<'_, f64>) -> Result<Array1<f64>, EvalError> {
    if let Some(m) = e.max_var() {
        if m >= x.ncols() {
            return Err(EvalError::DimensionMismatch {
                needed: m + 1,
                available: x.ncols(),
            });
        }
    }
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    Ok(Array1::from(eval_columns(e, &refs, x.nrows())))
}

/// Column-major evaluation over `n` rows. Callers guarantee every referenced
/// column exists.
pub fn eval_columns(e: &Expr, cols: &[&[f64]], n: usize) -> Vec<f64> {
    match e {
        Expr::Var(i) => cols[*i][..n].to_vec(),
        Expr::Const(c) => vec![*c; n],
        Expr::Unary(op, c) => {
            let mut v = eval_columns(c, cols, n);
            for x in v.iter_mut() {
                *x = op.apply(*x);
            }
            v
        }
        Expr::Binary(op, l, r) => {
            let mut a = eval_columns(l, cols, n);
            match r.as_ref() {
                Expr::Const(c) => {
                    for x in a.iter_mut() {
                        *x = op.apply(*x, *c);
                    }
                }
                Expr::Var(i) => {
                    for (x, y) in a.iter_mut().zip(&cols[*i][..n]) {
                        *x = op.apply(*x, *y);
                    }
                }
                _ => {
                    let b = eval_columns(r, cols, n);
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x = op.apply(*x, *y);
                    }
                }
            }
            a
        }
    }
}

/// Scalar evaluation at one point.
pub fn eval_point(e: &Expr, point: &[f64]) -> f64 {
    match e {
        Expr::Var(i) => point[*i],
        Expr::Const(c) => *c,
        Expr::Unary(op, c) => op.apply(eval_point(c, point)),
        Expr::Binary(op, l, r) => op.apply(eval_point(l, point), eval_point(r, point)),
    }
}
