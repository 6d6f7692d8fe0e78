//! Arithmetic expressions over `t`, state variables `x1..xk` and named
//! parameters, with exact symbolic differentiation.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right-associative, binds tighter than '-'
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos tan exp log sqrt abs`, plus `sign` which the
//! differentiator emits for `abs` (with `sign(0) = 0`, so `d|u|/du = 0` at 0).
//! The identifier `pi` is always bound to π.

mod diff;
mod parse;
mod tape;
mod vector;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use diff::differentiate;
pub use parse::{parse, parse_in, ParseError, ParseErrorKind, Scope};
pub use tape::Tape;
pub use vector::VectorExpr;

/// Byte range of a node in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub(crate) fn apply(self, u: f64) -> std::result::Result<f64, EvalErrorKind> {
        Ok(match self {
            Func::Sin => u.sin(),
            Func::Cos => u.cos(),
            Func::Tan => u.tan(),
            Func::Exp => u.exp(),
            Func::Log => {
                if u <= 0.0 {
                    return Err(EvalErrorKind::LogDomain);
                }
                u.ln()
            }
            Func::Sqrt => {
                if u < 0.0 {
                    return Err(EvalErrorKind::SqrtDomain);
                }
                u.sqrt()
            }
            Func::Abs => u.abs(),
            Func::Sign => {
                if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Time,
    /// Zero-based state index; printed as `x{i+1}`.
    Var(usize),
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Expression node. `span` is present for nodes produced by the parser.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Option<Span>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

/// Differentiation / evaluation variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variable {
    Time,
    State(usize),
    Param(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogDomain,
    SqrtDomain,
    PowDomain,
    UnboundParameter,
    StateIndex,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::LogDomain => "log of a non-positive value",
            EvalErrorKind::SqrtDomain => "sqrt of a negative value",
            EvalErrorKind::PowDomain => "power with non-finite result",
            EvalErrorKind::UnboundParameter => "unbound parameter",
            EvalErrorKind::StateIndex => "state index out of range",
        })
    }
}

/// Evaluation failure, carrying the printed offending subexpression.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} in `{subexpr}`")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub subexpr: String,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, span: None }
    }

    pub fn num(v: f64) -> Self {
        Expr::new(ExprKind::Num(v))
    }

    pub fn var(i: usize) -> Self {
        Expr::new(ExprKind::Var(i))
    }

    pub fn time() -> Self {
        Expr::new(ExprKind::Time)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self.kind {
            ExprKind::Num(v) => Some(v),
            _ => None,
        }
    }

    /// Largest state index referenced (zero-based), if any.
    pub fn max_state_index(&self) -> Option<usize> {
        let mut best = None;
        self.visit(&mut |e| {
            if let ExprKind::Var(i) = e.kind {
                best = Some(best.map_or(i, |b: usize| b.max(i)));
            }
        });
        best
    }

    pub fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let ExprKind::Param(p) = &e.kind {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        });
        out
    }

    pub fn depends_on(&self, v: &Variable) -> bool {
        let mut hit = false;
        self.visit(&mut |e| {
            hit |= match (&e.kind, v) {
                (ExprKind::Time, Variable::Time) => true,
                (ExprKind::Var(i), Variable::State(j)) => i == j,
                (ExprKind::Param(p), Variable::Param(q)) => p == q,
                _ => false,
            };
        });
        hit
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Num(_) | ExprKind::Time | ExprKind::Var(_) | ExprKind::Param(_) => {}
            ExprKind::Neg(a) | ExprKind::Call(_, a) => a.visit(f),
            ExprKind::Add(a, b)
            | ExprKind::Sub(a, b)
            | ExprKind::Mul(a, b)
            | ExprKind::Div(a, b)
            | ExprKind::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Tree-walking evaluation. `pi` resolves even when absent from `params`.
    pub fn eval(
        &self,
        t: f64,
        x: &[f64],
        params: &BTreeMap<String, f64>,
    ) -> Result<f64, EvalError> {
        let fail = |kind| EvalError {
            kind,
            subexpr: self.to_string(),
        };
        Ok(match &self.kind {
            ExprKind::Num(v) => *v,
            ExprKind::Time => t,
            ExprKind::Var(i) => *x.get(*i).ok_or_else(|| fail(EvalErrorKind::StateIndex))?,
            ExprKind::Param(p) => match params.get(p) {
                Some(v) => *v,
                None if p == "pi" => std::f64::consts::PI,
                None => return Err(fail(EvalErrorKind::UnboundParameter)),
            },
            ExprKind::Neg(a) => -a.eval(t, x, params)?,
            ExprKind::Add(a, b) => a.eval(t, x, params)? + b.eval(t, x, params)?,
            ExprKind::Sub(a, b) => a.eval(t, x, params)? - b.eval(t, x, params)?,
            ExprKind::Mul(a, b) => a.eval(t, x, params)? * b.eval(t, x, params)?,
            ExprKind::Div(a, b) => {
                let num = a.eval(t, x, params)?;
                let den = b.eval(t, x, params)?;
                if den == 0.0 {
                    return Err(fail(EvalErrorKind::DivisionByZero));
                }
                num / den
            }
            ExprKind::Pow(a, b) => {
                let r = pow(a.eval(t, x, params)?, b.eval(t, x, params)?);
                if r.is_nan() {
                    return Err(fail(EvalErrorKind::PowDomain));
                }
                r
            }
            ExprKind::Call(func, a) => func.apply(a.eval(t, x, params)?).map_err(fail)?,
        })
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Add(..) | ExprKind::Sub(..) => 1,
            ExprKind::Mul(..) | ExprKind::Div(..) => 2,
            ExprKind::Neg(_) => 3,
            ExprKind::Num(v) if v.is_sign_negative() => 3,
            ExprKind::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_min(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Integer exponents use repeated multiplication so that `x^2` and `x*x`
/// agree bit-for-bit.
pub(crate) fn pow(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() <= 64.0 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v:?}")
    }
}

impl fmt::Display for Expr {
    /// Prints with the minimal parentheses that reproduce the same tree
    /// under the parser's precedence and associativity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => {
                if v.is_sign_negative() && *v != 0.0 {
                    f.write_str("-")?;
                    write_num(f, -v)
                } else {
                    write_num(f, *v)
                }
            }
            ExprKind::Time => f.write_str("t"),
            ExprKind::Var(i) => write!(f, "x{}", i + 1),
            ExprKind::Param(p) => f.write_str(p),
            ExprKind::Neg(a) => {
                f.write_str("-")?;
                a.write_min(f, 3)
            }
            ExprKind::Add(a, b) => {
                a.write_min(f, 1)?;
                f.write_str(" + ")?;
                b.write_min(f, 2)
            }
            ExprKind::Sub(a, b) => {
                a.write_min(f, 1)?;
                f.write_str(" - ")?;
                b.write_min(f, 2)
            }
            ExprKind::Mul(a, b) => {
                a.write_min(f, 2)?;
                f.write_str("*")?;
                b.write_min(f, 3)
            }
            ExprKind::Div(a, b) => {
                a.write_min(f, 2)?;
                f.write_str("/")?;
                b.write_min(f, 3)
            }
            ExprKind::Pow(a, b) => {
                a.write_min(f, 5)?;
                f.write_str("^")?;
                b.write_min(f, 3)
            }
            ExprKind::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, t: f64, x: &[f64]) -> f64 {
        parse(src).unwrap().eval(t, x, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn arithmetic() {
        assert_eq!(ev("x1 + 2*x2", 0.0, &[1.0, 3.0]), 7.0);
        assert_eq!(ev("-x2 + x1*(1 - x1^2 - x2^2)", 0.0, &[1.0, 0.0]), 0.0);
        assert_eq!(ev("2^3^2", 0.0, &[]), 512.0);
        assert_eq!(ev("-2^2", 0.0, &[]), -4.0);
        assert_eq!(ev("2^-1", 0.0, &[]), 0.5);
        assert_eq!(ev("8/4/2", 0.0, &[]), 1.0);
        assert_eq!(ev("1 - 2 - 3", 0.0, &[]), -4.0);
        assert!((ev("cos(pi)", 0.0, &[]) + 1.0).abs() < 1e-15);
        assert_eq!(ev("t * 3", 2.0, &[]), 6.0);
    }

    #[test]
    fn domain_errors_carry_subexpression() {
        let e = parse("1 + log(x1 - 1)").unwrap();
        let err = e.eval(0.0, &[1.0], &BTreeMap::new()).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::LogDomain);
        assert_eq!(err.subexpr, "log(x1 - 1)");
        let err = parse("x1/(x1 - x1)")
            .unwrap()
            .eval(0.0, &[2.0], &BTreeMap::new())
            .unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        let err = parse("a*x1").unwrap().eval(0.0, &[2.0], &BTreeMap::new()).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::UnboundParameter);
    }

    #[test]
    fn printing_keeps_structure() {
        for src in [
            "x1 - (x2 - x3)",
            "(x1 + x2)*x3",
            "-(x1 + 1)",
            "x1^(x2^2)",
            "(x1^x2)^2",
            "(-2)^x1",
            "x1/(x2*x3)",
            "-x1^2",
            "sin(t)*-x2",
        ] {
            let e = parse(src).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} printed as {e}");
        }
        assert_eq!(parse("(x1^x2)^2").unwrap().to_string(), "(x1^x2)^2");
        assert_eq!(parse("x1 - (x2 - x3)").unwrap().to_string(), "x1 - (x2 - x3)");
    }

    #[test]
    fn state_index_and_params() {
        let e = parse("a*x3 + b*sin(x1) + pi").unwrap();
        assert_eq!(e.max_state_index(), Some(2));
        assert_eq!(e.params(), vec!["a".to_string(), "b".into(), "pi".into()]);
    }
}
