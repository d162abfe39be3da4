use std::fmt;

use super::{BinaryOp, Expr};

/// Display adapter pairing an expression with its variable names.
///
/// Output re-parses to the identical tree: parentheses are emitted wherever
/// the grammar's left-associativity would otherwise regroup operands, and
/// constants use a shortest round-trip decimal form.
pub struct Rendered<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl<'a> Rendered<'a> {
    pub(crate) fn new(expr: &'a Expr, names: &'a [String]) -> Self {
        Rendered { expr, names }
    }
}

pub(crate) fn format_constant(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:?}")
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if c.is_sign_negative() => 0,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        Expr::Binary(BinaryOp::Pow, ..) => 3,
        _ => 4,
    }
}

fn write_expr(e: &Expr, names: &[String], f: &mut fmt::Formatter<'_>, required: u8) -> fmt::Result {
    let parens = precedence(e) < required;
    if parens {
        f.write_str("(")?;
    }
    match e {
        Expr::Var(i) => match names.get(*i) {
            Some(n) => f.write_str(n)?,
            None => write!(f, "x{i}")?,
        },
        Expr::Const(c) => f.write_str(&format_constant(*c))?,
        Expr::Unary(op, c) => {
            write!(f, "{}(", op.name())?;
            write_expr(c, names, f, 0)?;
            f.write_str(")")?;
        }
        Expr::Binary(op, l, r) => {
            let (lreq, rreq) = match op {
                BinaryOp::Add | BinaryOp::Sub => (1, 2),
                BinaryOp::Mul | BinaryOp::Div => (2, 3),
                BinaryOp::Pow => (4, 4),
            };
            write_expr(l, names, f, lreq)?;
            match op {
                BinaryOp::Pow => f.write_str("^")?,
                _ => write!(f, " {} ", op.symbol())?,
            }
            write_expr(r, names, f, rreq)?;
        }
    }
    if parens {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Rendered<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.names, f, 0)
    }
}
