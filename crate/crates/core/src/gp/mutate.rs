//! Random trees and structural edits.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::expr::Expr;

use super::GpConfig;

const RETRIES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    NodeReplace,
    SubtreeGraft,
    SubtreeDelete,
    ConstantPerturb,
    Crossover,
}

impl MutationKind {
    pub const ALL: [MutationKind; 5] = [
        MutationKind::NodeReplace,
        MutationKind::SubtreeGraft,
        MutationKind::SubtreeDelete,
        MutationKind::ConstantPerturb,
        MutationKind::Crossover,
    ];
}

pub(crate) fn random_constant(rng: &mut impl Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

pub(crate) fn random_leaf(arity: usize, rng: &mut impl Rng) -> Expr {
    if arity > 0 && rng.random_bool(0.75) {
        Expr::Var(rng.random_range(0..arity))
    } else {
        Expr::Const(random_constant(rng))
    }
}

/// Grows a random tree of depth at most `depth`; leaves are more likely as
/// the tree deepens.
pub(crate) fn random_tree(cfg: &GpConfig, arity: usize, depth: usize, rng: &mut impl Rng) -> Expr {
    let ops = cfg.unary_ops.len() + cfg.binary_ops.len();
    if depth <= 1 || ops == 0 || rng.random_bool(0.3) {
        return random_leaf(arity, rng);
    }
    let k = rng.random_range(0..ops);
    if k < cfg.unary_ops.len() {
        Expr::unary(cfg.unary_ops[k], random_tree(cfg, arity, depth - 1, rng))
    } else {
        let op = cfg.binary_ops[k - cfg.unary_ops.len()];
        Expr::binary(
            op,
            random_tree(cfg, arity, depth - 1, rng),
            random_tree(cfg, arity, depth - 1, rng),
        )
    }
}

fn node_replace(e: &Expr, cfg: &GpConfig, arity: usize, rng: &mut impl Rng) -> Expr {
    let i = rng.random_range(0..e.complexity());
    let node = e.node(i).unwrap();
    let new = match node {
        Expr::Var(_) | Expr::Const(_) => random_leaf(arity, rng),
        Expr::Unary(_, c) => match pick(&cfg.unary_ops, rng) {
            Some(op) => Expr::unary(op, (**c).clone()),
            None => return e.clone(),
        },
        Expr::Binary(_, l, r) => match pick(&cfg.binary_ops, rng) {
            Some(op) => Expr::binary(op, (**l).clone(), (**r).clone()),
            None => return e.clone(),
        },
    };
    e.replace_node(i, new)
}

fn pick<T: Copy>(v: &[T], rng: &mut impl Rng) -> Option<T> {
    (!v.is_empty()).then(|| v[rng.random_range(0..v.len())])
}

/// Either wraps a node in a new operator (the node becomes one operand) or
/// swaps a leaf for a small random subtree.
fn subtree_graft(e: &Expr, cfg: &GpConfig, arity: usize, rng: &mut impl Rng) -> Expr {
    let i = rng.random_range(0..e.complexity());
    let node = e.node(i).unwrap().clone();
    if node.is_leaf() && rng.random_bool(0.5) {
        return e.replace_node(i, random_tree(cfg, arity, 3, rng));
    }
    let ops = cfg.unary_ops.len() + cfg.binary_ops.len();
    if ops == 0 {
        return e.clone();
    }
    let k = rng.random_range(0..ops);
    let wrapped = if k < cfg.unary_ops.len() {
        Expr::unary(cfg.unary_ops[k], node)
    } else {
        let op = cfg.binary_ops[k - cfg.unary_ops.len()];
        let other = random_leaf(arity, rng);
        if rng.random_bool(0.5) {
            Expr::binary(op, node, other)
        } else {
            Expr::binary(op, other, node)
        }
    };
    e.replace_node(i, wrapped)
}

/// Replaces an operator node with one of its operands.
fn subtree_delete(e: &Expr, rng: &mut impl Rng) -> Expr {
    let inner: Vec<usize> = (0..e.complexity())
        .filter(|&i| !e.node(i).unwrap().is_leaf())
        .collect();
    let Some(&i) = inner.get(rng.random_range(0..inner.len().max(1))) else {
        return e.clone();
    };
    let child = match e.node(i).unwrap() {
        Expr::Unary(_, c) => (**c).clone(),
        Expr::Binary(_, l, r) => {
            if rng.random_bool(0.5) {
                (**l).clone()
            } else {
                (**r).clone()
            }
        }
        _ => unreachable!(),
    };
    e.replace_node(i, child)
}

fn constant_perturb(e: &Expr, rng: &mut impl Rng) -> Option<Expr> {
    let mut c = e.constants();
    if c.is_empty() {
        return None;
    }
    let k = rng.random_range(0..c.len());
    let delta: f64 = rng.sample::<f64, _>(StandardNormal) * 0.2;
    c[k] *= 1.0 + delta;
    if rng.random_bool(0.05) {
        c[k] = -c[k];
    }
    Some(e.with_constants(&c))
}

/// Collapses every variable-free operator subtree to a single constant, so
/// chains like sin(cos(0.3)) stop padding complexity. Subtrees that evaluate
/// non-finite are left alone.
pub(crate) fn fold_constants(e: &Expr) -> Expr {
    fn go(e: &Expr) -> (Expr, bool) {
        match e {
            Expr::Var(_) => (e.clone(), false),
            Expr::Const(_) => (e.clone(), true),
            Expr::Unary(op, c) => {
                let (c, k) = go(c);
                if let (true, Expr::Const(v)) = (k, &c) {
                    let r = op.apply(*v);
                    if r.is_finite() {
                        return (Expr::Const(r), true);
                    }
                }
                (Expr::unary(*op, c), false)
            }
            Expr::Binary(op, l, r) => {
                let (l, kl) = go(l);
                let (r, kr) = go(r);
                if let (true, true, Expr::Const(a), Expr::Const(b)) = (kl, kr, &l, &r) {
                    let v = op.apply(*a, *b);
                    if v.is_finite() {
                        return (Expr::Const(v), true);
                    }
                }
                (Expr::binary(*op, l, r), false)
            }
        }
    }
    go(e).0
}

/// `a` with one uniformly chosen subtree replaced by a uniformly chosen
/// subtree of `b`, retried until it fits the complexity cap (else `a`).
pub fn crossover(a: &Expr, b: &Expr, max_complexity: usize, rng: &mut impl Rng) -> Expr {
    for _ in 0..RETRIES {
        let i = rng.random_range(0..a.complexity());
        let j = rng.random_range(0..b.complexity());
        let child = a.replace_node(i, b.node(j).unwrap().clone());
        if child.complexity() <= max_complexity {
            return child;
        }
    }
    a.clone()
}

/// One structural edit of kind `kind`. `Crossover` here takes its donor
/// subtree from a fresh random tree; the search crosses two parents with
/// [`crossover`] instead. Oversized results are redrawn; after bounded
/// retries the input comes back unchanged.
pub fn mutate(e: &Expr, kind: MutationKind, cfg: &GpConfig, arity: usize, rng: &mut impl Rng) -> Expr {
    for _ in 0..RETRIES {
        let child = match kind {
            MutationKind::NodeReplace => node_replace(e, cfg, arity, rng),
            MutationKind::SubtreeGraft => subtree_graft(e, cfg, arity, rng),
            MutationKind::SubtreeDelete => subtree_delete(e, rng),
            MutationKind::ConstantPerturb => match constant_perturb(e, rng) {
                Some(c) => c,
                None => node_replace(e, cfg, arity, rng),
            },
            MutationKind::Crossover => {
                let donor = random_tree(cfg, arity, 3, rng);
                crossover(e, &donor, cfg.max_complexity, rng)
            }
        };
        if child.complexity() <= cfg.max_complexity {
            return child;
        }
    }
    e.clone()
}
