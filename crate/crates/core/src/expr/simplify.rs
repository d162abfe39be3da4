//! Canonical algebraic simplification.
//!
//! Works bottom-up. Sums are flattened into (coefficient, monomial) terms,
//! like terms are merged and the survivors sorted under
//! [`Expr::canonical_cmp`]; products are flattened into a constant
//! coefficient times bases with integer exponents. Unary operators fold on
//! constants and use parity (`sin`, `tanh` odd; `cos`, `square`, `abs` even).
//! The pass repeats until nothing changes.

use super::{BinaryOp, Expr, UnaryOp};

const MAX_PASSES: usize = 16;
const MAX_INT_EXPONENT: f64 = 16.0;

pub fn simplify(e: &Expr) -> Expr {
    let mut cur = pass(e);
    for _ in 0..MAX_PASSES {
        let next = pass(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn pass(e: &Expr) -> Expr {
    match e {
        Expr::Var(_) | Expr::Const(_) => e.clone(),
        Expr::Unary(op, c) => unary(*op, pass(c)),
        Expr::Binary(op, l, r) => binary(*op, pass(l), pass(r)),
    }
}

fn unary(op: UnaryOp, c: Expr) -> Expr {
    if let Expr::Const(v) = c {
        let r = op.apply(v);
        if r.is_finite() {
            return Expr::Const(r);
        }
        return Expr::unary(op, c);
    }
    match op {
        UnaryOp::Neg => negate(c),
        UnaryOp::Sin | UnaryOp::Tanh => match c {
            Expr::Unary(UnaryOp::Neg, inner) => negate(Expr::unary(op, *inner)),
            c => Expr::unary(op, c),
        },
        UnaryOp::Cos | UnaryOp::Square | UnaryOp::Abs => match split_negation(&c) {
            Some(inner) => Expr::unary(op, inner),
            None => Expr::unary(op, c),
        },
        _ => Expr::unary(op, c),
    }
}

fn binary(op: BinaryOp, l: Expr, r: Expr) -> Expr {
    match op {
        BinaryOp::Add | BinaryOp::Sub => {
            let sign = if op == BinaryOp::Sub { -1.0 } else { 1.0 };
            let mut terms = collect_terms(&l, 1.0);
            terms.extend(collect_terms(&r, sign));
            build_sum(terms).unwrap_or_else(|| Expr::binary(op, l, r))
        }
        BinaryOp::Mul | BinaryOp::Div => {
            let original = Expr::binary(op, l, r);
            let mut p = Product::default();
            if p.absorb(&original, 1) {
                p.build()
            } else {
                original
            }
        }
        BinaryOp::Pow => pow(l, r),
    }
}

fn pow(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        (Expr::Const(a), Expr::Const(b)) => {
            let v = super::real_pow(*a, *b);
            if v.is_finite() {
                return Expr::Const(v);
            }
        }
        (_, Expr::Const(k)) if *k == 0.0 => return Expr::Const(1.0),
        (_, Expr::Const(k)) if *k == 1.0 => return l,
        (_, Expr::Const(k)) if k.fract() == 0.0 && *k > 0.0 && *k <= MAX_INT_EXPONENT => {
            let mut p = Product::default();
            if p.absorb(&l, *k as i32) {
                return p.build();
            }
        }
        _ => {}
    }
    Expr::pow(l, r)
}

fn negate(e: Expr) -> Expr {
    build_sum(collect_terms(&e, -1.0)).unwrap_or_else(|| Expr::unary(UnaryOp::Neg, e))
}

/// `Some(v)` when `e` is syntactically `-v`.
fn split_negation(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Unary(UnaryOp::Neg, inner) => Some((**inner).clone()),
        Expr::Const(c) if *c < 0.0 => Some(Expr::Const(-c)),
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => {
            let mut p = Product::default();
            if p.absorb(e, 1) && p.coef < 0.0 {
                p.coef = -p.coef;
                Some(p.build())
            } else {
                None
            }
        }
        _ => None,
    }
}

/// A sum term: coefficient times monomial, `None` meaning the constant 1.
type Term = (f64, Option<Expr>);

fn collect_terms(e: &Expr, sign: f64) -> Vec<Term> {
    let mut out = Vec::new();
    push_terms(e, sign, &mut out);
    out
}

fn push_terms(e: &Expr, sign: f64, out: &mut Vec<Term>) {
    match e {
        Expr::Binary(BinaryOp::Add, a, b) => {
            push_terms(a, sign, out);
            push_terms(b, sign, out);
        }
        Expr::Binary(BinaryOp::Sub, a, b) => {
            push_terms(a, sign, out);
            push_terms(b, -sign, out);
        }
        Expr::Unary(UnaryOp::Neg, a) => push_terms(a, -sign, out),
        Expr::Const(c) => out.push((sign * c, None)),
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => {
            let mut p = Product::default();
            if p.absorb(e, 1) {
                let coef = p.coef;
                p.coef = 1.0;
                match p.build() {
                    Expr::Const(c) => out.push((sign * coef * c, None)),
                    mono => out.push((sign * coef, Some(mono))),
                }
            } else {
                out.push((sign, Some(e.clone())));
            }
        }
        _ => out.push((sign, Some(e.clone()))),
    }
}

/// `None` when merging coefficients overflows.
fn build_sum(terms: Vec<Term>) -> Option<Expr> {
    let mut constant = 0.0;
    let mut merged: Vec<(f64, Expr)> = Vec::new();
    for (coef, mono) in terms {
        match mono {
            None => constant += coef,
            Some(m) => match merged.iter_mut().find(|(_, e)| *e == m) {
                Some(slot) => slot.0 += coef,
                None => merged.push((coef, m)),
            },
        }
    }
    if !constant.is_finite() || merged.iter().any(|(c, _)| !c.is_finite()) {
        return None;
    }
    merged.retain(|(c, _)| *c != 0.0);
    merged.sort_by(|a, b| a.1.canonical_cmp(&b.1));
    // Without a constant lead, start from the first positive term so the
    // sum never opens with a negation.
    if constant == 0.0 {
        if let Some(i) = merged.iter().position(|(c, _)| *c > 0.0) {
            let lead = merged.remove(i);
            merged.insert(0, lead);
        }
    }

    let mut acc: Option<Expr> = if constant != 0.0 {
        Some(Expr::Const(constant))
    } else {
        None
    };
    for (coef, mono) in merged {
        acc = Some(match acc {
            None => scale(coef, mono),
            Some(a) if coef < 0.0 => Expr::sub(a, scale(-coef, mono)),
            Some(a) => Expr::add(a, scale(coef, mono)),
        });
    }
    Some(acc.unwrap_or(Expr::Const(0.0)))
}

fn scale(coef: f64, e: Expr) -> Expr {
    if coef == 1.0 {
        return e;
    }
    let mut p = Product::default();
    if p.absorb(&e, 1) {
        p.coef *= coef;
        p.build()
    } else {
        Product::with_coef(coef, e)
    }
}

/// Constant coefficient times bases raised to non-zero integer exponents.
#[derive(Default)]
struct Product {
    coef: f64,
    factors: Vec<(Expr, i32)>,
    started: bool,
}

impl Product {
    fn with_coef(coef: f64, e: Expr) -> Expr {
        if coef == -1.0 {
            Expr::unary(UnaryOp::Neg, e)
        } else {
            Expr::mul(Expr::Const(coef), e)
        }
    }

    /// Flattens `e` raised to `exp` into the product. Returns false when the
    /// coefficient overflows.
    fn absorb(&mut self, e: &Expr, exp: i32) -> bool {
        if !self.started {
            self.started = true;
            self.coef = 1.0;
        }
        match e {
            Expr::Binary(BinaryOp::Mul, a, b) => self.absorb(a, exp) && self.absorb(b, exp),
            Expr::Binary(BinaryOp::Div, a, b) => self.absorb(a, exp) && self.absorb(b, -exp),
            Expr::Unary(UnaryOp::Neg, a) => {
                if exp % 2 != 0 {
                    self.coef = -self.coef;
                }
                self.absorb(a, exp)
            }
            Expr::Const(c) => {
                if *c == 0.0 && exp < 0 {
                    // Kept as an opaque denominator; the product is NaN anyway.
                    self.push(e, exp);
                    return true;
                }
                self.coef *= c.powi(exp);
                self.coef.is_finite()
            }
            Expr::Unary(UnaryOp::Square, a) => {
                self.push(a, 2 * exp);
                true
            }
            Expr::Binary(BinaryOp::Pow, a, k) => match k.as_ref() {
                Expr::Const(k) if k.fract() == 0.0 && k.abs() <= MAX_INT_EXPONENT && *k != 0.0 => {
                    self.push(a, *k as i32 * exp);
                    true
                }
                _ => {
                    self.push(e, exp);
                    true
                }
            },
            _ => {
                self.push(e, exp);
                true
            }
        }
    }

    fn push(&mut self, base: &Expr, exp: i32) {
        match self.factors.iter_mut().find(|(b, _)| b == base) {
            Some(slot) => slot.1 += exp,
            None => self.factors.push((base.clone(), exp)),
        }
    }

    fn build(mut self) -> Expr {
        if self.coef == 0.0 {
            return Expr::Const(0.0);
        }
        self.factors.retain(|(_, k)| *k != 0);
        self.factors.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        let chain = |parts: Vec<Expr>| parts.into_iter().reduce(Expr::mul);
        let num = chain(
            self.factors
                .iter()
                .filter(|(_, k)| *k > 0)
                .map(|(b, k)| power(b, *k))
                .collect(),
        );
        let den = chain(
            self.factors
                .iter()
                .filter(|(_, k)| *k < 0)
                .map(|(b, k)| power(b, -*k))
                .collect(),
        );
        let c = self.coef;
        match (num, den) {
            (None, None) => Expr::Const(c),
            (Some(n), None) => match c {
                1.0 => n,
                _ => Product::with_coef(c, n),
            },
            (None, Some(d)) => Expr::div(Expr::Const(c), d),
            (Some(n), Some(d)) => match c {
                1.0 => Expr::div(n, d),
                -1.0 => Expr::unary(UnaryOp::Neg, Expr::div(n, d)),
                _ => Expr::div(Expr::mul(Expr::Const(c), n), d),
            },
        }
    }
}

fn power(base: &Expr, k: i32) -> Expr {
    match k {
        1 => base.clone(),
        2 => Expr::unary(UnaryOp::Square, base.clone()),
        _ => Expr::pow(base.clone(), Expr::Const(k as f64)),
    }
}
