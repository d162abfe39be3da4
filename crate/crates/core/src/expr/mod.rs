//! Expression trees shared by both pipeline stages.
//!
//! An [`Expr`] is an immutable tree over indexed input variables, finite
//! constants and a small operator vocabulary. The submodules provide the
//! textual grammar, NaN-propagating evaluation, canonical simplification and
//! a sampling-based semantic equivalence oracle.

mod equiv;
mod eval;
mod parse;
mod render;
mod simplify;

use std::cmp::Ordering;
use std::fmt;

pub use equiv::{equivalent, snap_constants, EquivError, EvalDomain};
pub use eval::{eval_columns, eval_point, evaluate, EvalError};
pub use parse::{parse, ParseError};
pub use render::Rendered;
pub use simplify::simplify;

/// Unary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Square,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Neg,
    Tanh,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 9] = [
        UnaryOp::Square,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sqrt,
        UnaryOp::Abs,
        UnaryOp::Neg,
        UnaryOp::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Square => "square",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Neg => "neg",
            UnaryOp::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        match name {
            "ln" => Some(UnaryOp::Log),
            _ => UnaryOp::ALL.into_iter().find(|op| op.name() == name),
        }
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            UnaryOp::Square => v * v,
            UnaryOp::Sin => v.sin(),
            UnaryOp::Cos => v.cos(),
            UnaryOp::Exp => v.exp(),
            // ln(0) = -inf and ln(<0) = NaN; both count as out of domain.
            UnaryOp::Log => {
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NAN
                }
            }
            UnaryOp::Sqrt => v.sqrt(),
            UnaryOp::Abs => v.abs(),
            UnaryOp::Neg => -v,
            UnaryOp::Tanh => v.tanh(),
        }
    }
}

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
            BinaryOp::Pow => "pow",
        }
    }

    pub fn from_name(name: &str) -> Option<BinaryOp> {
        BinaryOp::ALL
            .into_iter()
            .find(|op| op.name() == name || op.symbol() == name)
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b == 0.0 {
                    f64::NAN
                } else {
                    a / b
                }
            }
            BinaryOp::Pow => real_pow(a, b),
        }
    }
}

/// `a^b` over the reals: negative bases with exponents `p/q`, `q` odd and
/// small, take the real root, so `(-8)^(1/3) = -2` and `(-8)^(2/3) = 4`.
pub fn real_pow(a: f64, b: f64) -> f64 {
    if a >= 0.0 || b.fract() == 0.0 || !a.is_finite() || !b.is_finite() {
        return a.powf(b);
    }
    for q in [3.0f64, 5.0, 7.0, 9.0] {
        let p = b * q;
        let p_round = p.round();
        if (p - p_round).abs() < 1e-9 {
            let magnitude = (-a).powf(b);
            return if p_round.rem_euclid(2.0) == 1.0 {
                -magnitude
            } else {
                magnitude
            };
        }
    }
    f64::NAN
}

/// An expression tree.
///
/// Variables are referenced by column index; names live with the dataset and
/// are supplied when parsing or rendering.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    /// A constant leaf. Panics on NaN or infinite values, which are never
    /// stored in a tree.
    pub fn constant(value: f64) -> Expr {
        assert!(value.is_finite(), "non-finite constant {value}");
        Expr::Const(value)
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Expr {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, a, b)
    }

    /// Token count: every operator, variable and constant is one node.
    pub fn complexity(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Const(_) => 1,
            Expr::Unary(_, c) => 1 + c.complexity(),
            Expr::Binary(_, l, r) => 1 + l.complexity() + r.complexity(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Const(_) => 1,
            Expr::Unary(_, c) => 1 + c.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Const(_) => None,
            Expr::Unary(_, c) => c.max_var(),
            Expr::Binary(_, l, r) => match (l.max_var(), r.max_var()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Var(_) | Expr::Const(_))
    }

    pub fn constant_count(&self) -> usize {
        match self {
            Expr::Var(_) => 0,
            Expr::Const(_) => 1,
            Expr::Unary(_, c) => c.constant_count(),
            Expr::Binary(_, l, r) => l.constant_count() + r.constant_count(),
        }
    }

    /// Constants in pre-order.
    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Const(c) = e {
                out.push(*c);
            }
        });
        out
    }

    /// Replaces constants in pre-order with `values`.
    pub fn with_constants(&self, values: &[f64]) -> Expr {
        let mut iter = values.iter().copied();
        let out = self.map_constants(&mut |c| iter.next().unwrap_or(c));
        debug_assert!(iter.next().is_none());
        out
    }

    pub(crate) fn map_constants(&self, f: &mut impl FnMut(f64) -> f64) -> Expr {
        match self {
            Expr::Var(i) => Expr::Var(*i),
            Expr::Const(c) => {
                let v = f(*c);
                Expr::Const(if v.is_finite() { v } else { *c })
            }
            Expr::Unary(op, c) => Expr::unary(*op, c.map_constants(f)),
            Expr::Binary(op, l, r) => {
                let l = l.map_constants(f);
                let r = r.map_constants(f);
                Expr::binary(*op, l, r)
            }
        }
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Var(_) | Expr::Const(_) => {}
            Expr::Unary(_, c) => c.visit(f),
            Expr::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    /// All subtrees in pre-order, the root first.
    pub fn subtrees(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.visit(&mut |e| out.push(e));
        out
    }

    /// The `index`-th node in pre-order.
    pub fn node(&self, index: usize) -> Option<&Expr> {
        self.subtrees().into_iter().nth(index)
    }

    /// Copy of `self` with the `index`-th pre-order node replaced.
    pub fn replace_node(&self, index: usize, replacement: Expr) -> Expr {
        fn go(e: &Expr, counter: &mut usize, target: usize, rep: &mut Option<Expr>) -> Expr {
            let here = *counter;
            *counter += 1;
            if here == target {
                if let Some(r) = rep.take() {
                    // Skip the counter past the replaced subtree.
                    *counter += e.complexity() - 1;
                    return r;
                }
            }
            match e {
                Expr::Var(_) | Expr::Const(_) => e.clone(),
                Expr::Unary(op, c) => Expr::unary(*op, go(c, counter, target, rep)),
                Expr::Binary(op, l, r) => {
                    let l = go(l, counter, target, rep);
                    let r = go(r, counter, target, rep);
                    Expr::binary(*op, l, r)
                }
            }
        }
        let mut rep = Some(replacement);
        go(self, &mut 0, index, &mut rep)
    }

    /// Substitutes variables: `Var(i)` becomes `f(i)` when it returns `Some`.
    pub fn substitute(&self, f: &impl Fn(usize) -> Option<Expr>) -> Expr {
        match self {
            Expr::Var(i) => f(*i).unwrap_or(Expr::Var(*i)),
            Expr::Const(c) => Expr::Const(*c),
            Expr::Unary(op, c) => Expr::unary(*op, c.substitute(f)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.substitute(f), r.substitute(f)),
        }
    }

    /// Renders with the given variable names; indices beyond the list are
    /// printed as `x<i>`.
    pub fn render<'a>(&'a self, names: &'a [String]) -> Rendered<'a> {
        Rendered::new(self, names)
    }

    /// Name-independent rendering, used for ordering and deduplication.
    pub fn key(&self) -> String {
        Rendered::new(self, &[]).to_string()
    }

    /// The fixed total order used for canonical operand sorting: constants
    /// first (by value), then variables by index, then compound subtrees by
    /// (complexity, rendered key).
    pub fn canonical_cmp(&self, other: &Expr) -> Ordering {
        fn rank(e: &Expr) -> u8 {
            match e {
                Expr::Const(_) => 0,
                Expr::Var(_) => 1,
                _ => 2,
            }
        }
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a.total_cmp(b),
            (Expr::Var(a), Expr::Var(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)).then_with(|| {
                self.complexity()
                    .cmp(&other.complexity())
                    .then_with(|| self.key().cmp(&other.key()))
            }),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Rendered::new(self, &[]).fmt(f)
    }
}

/// Default variable names `x0, x1, ...`.
pub fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}
