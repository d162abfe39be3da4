use std::sync::OnceLock;

use super::{Benchmark, Sampling, Suite};
use crate::expr::{parse, simplify, Expr};

const VARS: [&str; 4] = ["x", "y", "z", "h"];

const fn u(lo: f64, hi: f64, n: usize) -> Sampling {
    Sampling::Uniform { lo, hi, n }
}

const fn e(lo: f64, hi: f64, n: usize) -> Sampling {
    Sampling::Even { lo, hi, n }
}

const DEFAULT_LLM: Sampling = u(-3.0, 3.0, 200);

// (name, ground truth, per-variable sampling)
const STANDARD: &[(&str, &str, Sampling)] = &[
    ("Nguyen-1", "x^3 + x^2 + x", u(-1.0, 1.0, 20)),
    ("Nguyen-2", "x^4 + x^3 + x^2 + x", u(-1.0, 1.0, 20)),
    ("Nguyen-3", "x^5 + x^4 + x^3 + x^2 + x", u(-1.0, 1.0, 20)),
    ("Nguyen-4", "x^6 + x^5 + x^4 + x^3 + x^2 + x", u(-1.0, 1.0, 20)),
    ("Nguyen-5", "sin(x^2)*cos(x) - 1", u(-1.0, 1.0, 20)),
    ("Nguyen-6", "sin(x) + sin(x + x^2)", u(-1.0, 1.0, 20)),
    ("Nguyen-7", "log(x + 1) + log(x^2 + 1)", u(0.0, 2.0, 20)),
    ("Nguyen-8", "sqrt(x)", u(0.0, 4.0, 20)),
    ("Nguyen-9", "sin(x) + sin(y^2)", u(0.0, 1.0, 20)),
    ("Nguyen-10", "2*sin(x)*cos(y)", u(0.0, 1.0, 20)),
    ("Nguyen-11", "x^y", u(0.0, 1.0, 20)),
    ("Nguyen-12", "x^4 - x^3 + 0.5*y^2 - y", u(0.0, 1.0, 20)),
    ("Nguyen-2'", "4*x^4 + 3*x^3 + 2*x^2 + x", u(-1.0, 1.0, 20)),
    ("Nguyen-5'", "sin(x^2)*cos(x) - 2", u(-1.0, 1.0, 20)),
    ("Nguyen-8''", "(x^2)^(1/3)", u(0.0, 4.0, 20)),
    ("Nguyen-1c", "3.39*x^3 + 2.12*x^2 + 1.78*x", u(-1.0, 1.0, 20)),
    ("Nguyen-5c", "sin(x^2)*cos(x) - 0.75", u(-1.0, 1.0, 20)),
    ("Nguyen-7c", "log(x + 1.4) + log(x^2 + 1.3)", u(0.0, 2.0, 20)),
    ("Livermore-1", "1/3 + x + sin(x^2)", u(-3.0, 3.0, 100)),
    ("Livermore-2", "sin(x^2)*cos(x) - 2", u(-3.0, 3.0, 100)),
    ("Livermore-3", "sin(x^3)*cos(x^2) - 1", u(-3.0, 3.0, 100)),
    // log(x) and log(x + 1) are undefined on half the domain; protected logs
    // keep the target defined everywhere.
    ("Livermore-4", "log(abs(x + 1)) + log(x^2 + 1) + log(abs(x))", u(-3.0, 3.0, 100)),
    ("Livermore-5", "x^4 - x^3 + x^2 - y", u(-3.0, 3.0, 100)),
    ("Livermore-6", "4*x^4 + 3*x^3 + 2*x^2 + x", u(-3.0, 3.0, 100)),
    ("Livermore-7", "(exp(x) - exp(-x))/2", u(-1.0, 1.0, 100)),
    ("Livermore-8", "(exp(x) + exp(-x))/2", u(-1.0, 1.0, 100)),
    (
        "Livermore-9",
        "x^9 + x^8 + x^7 + x^6 + x^5 + x^4 + x^3 + x^2 + x",
        u(-1.0, 1.0, 100),
    ),
    ("Livermore-10", "6*sin(x)*cos(y)", u(-3.0, 3.0, 100)),
    ("Livermore-11", "x^2*y^2/(x + y)", u(-3.0, 3.0, 100)),
    ("Livermore-12", "x^5/y^3", u(-3.0, 3.0, 100)),
    ("Livermore-13", "x^(1/3)", u(-3.0, 3.0, 100)),
    ("Livermore-14", "x^3 + x^2 + x + sin(x) + sin(y^2)", u(-1.0, 1.0, 100)),
    ("Livermore-15", "x^(1/5)", u(-3.0, 3.0, 100)),
    ("Livermore-16", "x^(2/3)", u(-3.0, 3.0, 100)),
    ("Livermore-17", "4*sin(x)*cos(y)", u(-3.0, 3.0, 100)),
    ("Livermore-18", "sin(x^2)*cos(x) - 5", u(-3.0, 3.0, 100)),
    ("Livermore-19", "x^5 + x^4 + x^2 + x", u(-3.0, 3.0, 100)),
    ("Livermore-20", "exp(-x^2)", u(-3.0, 3.0, 100)),
    (
        "Livermore-21",
        "x^8 + x^7 + x^6 + x^5 + x^4 + x^3 + x^2 + x",
        u(-1.0, 1.0, 20),
    ),
    ("Livermore-22", "exp(-0.5*x^2)", u(-3.0, 3.0, 100)),
    ("Jin-1", "2.5*x^4 - 1.3*x^3 + 0.5*y^2 - 1.7*y", u(-3.0, 3.0, 100)),
    ("Jin-2", "8*x^2 + 8*y^3 - 15", u(-3.0, 3.0, 100)),
    ("Jin-3", "0.2*x^3 + 0.5*y^3 - 1.2*y - 0.5*x", u(-3.0, 3.0, 100)),
    ("Jin-4", "1.5*exp(x) + 5*cos(y)", u(-3.0, 3.0, 100)),
    ("Jin-5", "6*sin(x)*cos(y)", u(-3.0, 3.0, 100)),
    ("Jin-6", "1.35*x*y + 5.5*sin((x - 1)*(y - 1))", u(-3.0, 3.0, 100)),
    ("Constant-1", "3.39*x^3 + 2.12*x^2 + 1.78*x", u(-4.0, 4.0, 100)),
    ("Constant-2", "sin(x^2)*cos(x) - 0.75", u(-4.0, 4.0, 100)),
    ("Constant-3", "sin(1.5*x)*cos(0.5*y)", u(0.1, 4.0, 100)),
    ("Constant-4", "2.7*x^y", u(0.3, 4.0, 100)),
    ("Constant-5", "sqrt(1.23*x)", u(0.1, 4.0, 100)),
    ("Constant-6", "x^0.423", u(0.0, 4.0, 100)),
    ("Constant-7", "2*sin(1.3*x)*cos(y)", u(-4.0, 4.0, 100)),
    ("Constant-8", "log(x + 1.4) + log(x^2 + 1.3)", u(0.0, 4.0, 100)),
    ("R-1", "(x + 1)^3/(x^2 - x + 1)", e(-5.0, 5.0, 100)),
    ("R-2", "(x^5 - 3*x^3 + 1)/(x^2 + 1)", e(-4.0, 4.0, 100)),
    ("R-3", "(x^6 + x^5)/(x^4 + x^3 + x^2 + x)", e(-4.0, 4.0, 100)),
];

const RECOVER: &[&str] = &[
    "x^6 + x^5 + x^4 + x^3 + x^2 + x",
    "x^6 + 2*x^5 + 3*x^4 + 4*x^3 + x^2 + x",
    "x^6 + 0.5*x^5 + 0.7*x^4 + 3*x^3 + 5*x^2 + x",
    "x^9 + x^8 + x^7 + x^6 + x^5 + x^4 + x^3 + x^2 + x",
    "sin(x^2)*cos(x) + sin(x) + sin(x^4 + x^2)",
    "x*y/(exp(x) + sin(y)^2)",
    "2*x^4 + 2*y^4 - 6*x^2*y^2",
    "x^5 + 3*x^3*y^2 - x^2*y^3 + y^5",
    "exp(x^2 + sin(y))",
    "x^3 + x^2 + x + sin(x) + sin(y^2)",
    "x^4*y - x^3 + 0.5*y^2*cos(x) - x",
    "x^4*y - x^3 + 0.5*y^2*sin(x) - x",
    "x*y*tanh(x + y)",
    "cos(y^2)*sin(x) - 1 + sqrt(x^2 + y^2 + 1)",
    "cos(x*y)*cos(y) - 1 + sqrt(x^2 + y^2 + 1)",
    "(exp(1 + x)*(1 - x) - exp(y)*x)/(exp(1 + x) + exp(y))",
    "(exp(x)*sin(y) - exp(y)*cos(x))/(x*y)",
    "(exp(x)*cos(y) - exp(y)*sin(x))/(x*y)",
    "exp(-0.5*(sin(x)^2 + cos(y)^2))*cos(x*y)",
    "sin(x + exp(-y^2)) - cos(y - exp(-x^2))",
    "x^4 + y^2*z^2 - x^2*z^2 + y^4",
    "x^5 - y^4*z + z^3*x^2 - x*y*z - x + y",
    "exp(sin(x))*y^3 + cos(exp(z))",
    "2*(x^2 + y^2)*sin(z) + x*exp(x + y)",
    "0.5*sin(x + y)*z^4 + x^2*y^3*z",
    "sqrt(z^4 + 1)*cos(y + exp(x))",
    "x^4*y + y^2*z^3*sin(z) + x*z^4",
    "x^3*y^5 + cos(z^2)*y - exp(x*z)",
    "z^4*cos(x)*exp(sin(y)) + x*exp(y + z)",
    "0.5*sin(x)*z^4 + x^2*y^3*z",
    "0.9*(x^2 + y^2)*sin(3*z + 2*x) + x*exp(x - y)",
    "(z^2 + 1)/(exp(x) + cos(y)^2)",
    "(z^2 + 1)/(exp(y) + sin(x)^2)",
    "x^3*y - y^3*z + z^3*h - h^3*x + x*y*z*h",
    "x^4 + y^4 - z^4 - h^4 + x^2*z^2",
    "x^5 - y^4 + z^3 - h^2 + x*y*z*h",
];

// Only the equations expressible in the operator vocabulary; numbering
// follows the source table. tan, sinh, cosh and sgn are written out in terms
// of sin/cos, exp and abs.
const UNRECOVER: &[(usize, &str)] = &[
    (1, "log(x^2 + y^2)/(2 + sin(x*y)^2)"),
    (2, "(abs(x)^1.5 + abs(y)^2.5 - x*y)/sqrt(1 + x^2 + 0.5*y^2)"),
    (
        4,
        "(x^2 - y^2)/(sin(3.141592653589793*x)^2 - cos(3.141592653589793*y)^2)",
    ),
    (5, "(x^2 + y^3 - z)/(abs(y*z) + 1) + sin(x*z)"),
    (6, "tanh(x^2 - y^2)*cos(y^3)/(x^4 + y^4 + sin(x*y)^2 + 1)"),
    (7, "sqrt(abs(sqrt(abs(x)) + sqrt(abs(y*z)))) - x^2"),
    (8, "sin(x^2*exp(-abs(y)))*cos(y^2*exp(-abs(x)))"),
    (9, "exp(-0.1*(x^2 + y^2))*cos(x*sin(y))"),
    (10, "(x^2*tanh(y) - y^2*tanh(x))/(1 + (exp(x*y) + exp(-(x*y)))/2)"),
    (11, "sin(x*log(2 + y^2*cos(y)^2))/(1 + 0.2*exp(-abs(x - y^2)))"),
    (12, "log(1 + abs(sin(x^2 + cos(y^2))))"),
    (13, "log(abs((x^2 + y^2)/(z + 1))) + sqrt(abs(x - z))"),
    (14, "sqrt(log(1 + abs(x*y))) + sqrt(abs(z - x*y))"),
    (15, "sin(x^2*cos(3*y) + y^2*sin(3*x))"),
    (
        16,
        "log(1 + abs(sin(x)))*tanh(y^2 - x)/(log(1 + abs(cos(y)))*((exp(x^2 - y) + exp(y - x^2))/2))",
    ),
    (17, "log(1 + abs(sin(x*y)))*sqrt(abs(z^2 + y^2))"),
    (18, "tanh(x^2 - y) + exp(-abs(x*y))*sin(y) - x"),
    (19, "x*y/(log(1 + abs(x) + abs(y)) + 0.1*x^2 + 0.1*y^2)"),
    (
        20,
        "(exp(x^2 - y) - exp(y - x^2))/2*((exp(y*z) + exp(-(y*z)))/2) - tanh(z^2)",
    ),
    (21, "sin(x^2*y)*cos(y^2) - cos(x^2)*sin(x*y)"),
    (
        22,
        "sin(x^2 + cos(y))*((sin(z)/cos(z) + x)/abs(sin(z)/cos(z) + x))",
    ),
    (24, "tanh(50*(sin(x*y) - 0.5))*exp(-0.1*(x^2 + y^2))"),
    (25, "abs(x*y + 0.00001)^(1.5 + exp(-0.2*(sin(x) - cos(y))^2))"),
    (
        29,
        "(0.1*x^3*y^2 - 0.05*x^4 + 0.02*y^5 - x*y + x - y)*cos(2*3.141592653589793*sqrt(x^2 + y^2)) + sin(5*x)*cos(5*y)",
    ),
    (
        30,
        "log(1 + abs(sin(x/(y^2 + 1))/cos(x/(y^2 + 1))) + abs(sin(y/(x^2 + 1))/cos(y/(x^2 + 1))))",
    ),
    (
        31,
        "sin(exp(x/10))*cos(x*y)*exp(-sqrt(x^2 + y^2)/20) + log(1 + x^2*y^2)",
    ),
    (
        35,
        "exp(-x^2)/(1 + (y - sin(5*x)*exp(-x^2/10))^2) + exp(-y^2)/(1 + (x - cos(5*y)*exp(-y^2/10))^2)",
    ),
    (
        36,
        "log(abs(sin(x) + cos(y)) + sqrt(x^2 + y^2 + 1))*(abs(x*y^2 - y*x^2) + 1)^(1/3)",
    ),
    (37, "sin(x*y) + 0.3*sin(4*x*cos(4*y)) + 0.1*cos(12*y*sin(12*x))"),
];

fn build(name: String, text: &str, sampling: Sampling, suite: Suite) -> Benchmark {
    let all: Vec<String> = VARS.iter().map(|v| v.to_string()).collect();
    let truth = parse(text, &all).unwrap_or_else(|err| panic!("{name}: {err}"));
    let d = truth.max_var().map_or(1, |m| m + 1);
    let constant_tolerant = has_free_constant(&simplify(&truth));
    Benchmark {
        name,
        variables: all[..d].to_vec(),
        truth,
        sampling: vec![sampling; d],
        constant_tolerant,
        suite,
    }
}

/// True when the tree holds a constant that is neither an integer nor a
/// half-integer, i.e. one the search must fit rather than snap.
fn has_free_constant(e: &Expr) -> bool {
    e.constants().iter().any(|c| (c * 2.0).fract() != 0.0)
}

fn build_all() -> Vec<Benchmark> {
    let mut out = Vec::new();
    for (name, text, sampling) in STANDARD {
        out.push(build(name.to_string(), text, *sampling, Suite::Standard));
    }
    for (i, text) in RECOVER.iter().enumerate() {
        out.push(build(format!("Recover-{}", i + 1), text, DEFAULT_LLM, Suite::Recover));
    }
    for (i, text) in UNRECOVER {
        out.push(build(format!("Unrecover-{i}"), text, DEFAULT_LLM, Suite::Unrecover));
    }
    out
}

/// Every benchmark: the standard suites, then the recoverable and
/// unrecoverable generated-equation fixtures.
pub fn registry() -> &'static [Benchmark] {
    static REGISTRY: OnceLock<Vec<Benchmark>> = OnceLock::new();
    REGISTRY.get_or_init(build_all)
}

pub fn lookup(name: &str) -> Option<&'static Benchmark> {
    registry().iter().find(|b| b.name == name)
}
