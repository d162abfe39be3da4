//! Postfix evaluation of expression trees over row-major data.

use ndarray::{ArrayView1, ArrayView2};

use crate::expr::{BinaryOp, Expr, UnaryOp};

/// Training rows, flattened row-major.
#[derive(Debug, Clone)]
pub(crate) struct Data {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d: usize,
    pub n: usize,
}

impl Data {
    pub fn new(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Data {
        Data {
            x: x.rows().into_iter().flat_map(|r| r.to_vec()).collect(),
            y: y.to_vec(),
            d: x.ncols(),
            n: x.nrows(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Ins {
    Var(usize),
    /// Index into the constant vector, in pre-order.
    Const(usize),
    Un(UnaryOp),
    Bin(BinaryOp),
}

#[derive(Debug, Clone)]
pub(crate) struct Program {
    code: Vec<Ins>,
    pub consts: Vec<f64>,
}

impl Program {
    /// Leaves appear in the same left-to-right order in post-order as in
    /// pre-order, so constant slots line up with `Expr::constants`.
    pub fn compile(e: &Expr) -> Program {
        fn go(e: &Expr, code: &mut Vec<Ins>, consts: &mut Vec<f64>) {
            match e {
                Expr::Var(i) => code.push(Ins::Var(*i)),
                Expr::Const(c) => {
                    code.push(Ins::Const(consts.len()));
                    consts.push(*c);
                }
                Expr::Unary(op, c) => {
                    go(c, code, consts);
                    code.push(Ins::Un(*op));
                }
                Expr::Binary(op, l, r) => {
                    go(l, code, consts);
                    go(r, code, consts);
                    code.push(Ins::Bin(*op));
                }
            }
        }
        let mut code = Vec::with_capacity(e.complexity());
        let mut consts = Vec::new();
        go(e, &mut code, &mut consts);
        Program { code, consts }
    }

    /// Mean squared error with constants `c`; +inf when any row is not
    /// finite.
    pub fn mse_with(&self, c: &[f64], data: &Data, stack: &mut Vec<f64>) -> f64 {
        let mut sum = 0.0;
        for r in 0..data.n {
            let row = &data.x[r * data.d..(r + 1) * data.d];
            stack.clear();
            for ins in &self.code {
                match *ins {
                    Ins::Var(i) => stack.push(row[i]),
                    Ins::Const(k) => stack.push(c[k]),
                    Ins::Un(op) => {
                        let v = stack.last_mut().unwrap();
                        *v = op.apply(*v);
                    }
                    Ins::Bin(op) => {
                        let b = stack.pop().unwrap();
                        let a = stack.last_mut().unwrap();
                        *a = op.apply(*a, b);
                    }
                }
            }
            let e = stack[0] - data.y[r];
            if !e.is_finite() {
                return f64::INFINITY;
            }
            sum += e * e;
        }
        let m = sum / data.n as f64;
        if m.is_finite() {
            m
        } else {
            f64::INFINITY
        }
    }

    pub fn mse(&self, data: &Data, stack: &mut Vec<f64>) -> f64 {
        self.mse_with(&self.consts, data, stack)
    }
}

pub(crate) fn mse(e: &Expr, data: &Data) -> f64 {
    Program::compile(e).mse(data, &mut Vec::new())
}
