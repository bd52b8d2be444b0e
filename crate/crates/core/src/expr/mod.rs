//! Symbolic objective expressions.
//!
//! An [`Expr`] is an immutable tree over real constants and indexed variables.
//! Every constructor folds constants, so a normalized tree never contains a
//! node whose children are all constants (except where folding would hide a
//! domain error, e.g. `log(-1)`, which is kept for `eval` to report).

mod parse;
mod separable;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use parse::{parse, ParseError, ParseErrorKind};
pub use separable::{extract_separable, BivariateTerm, ExtractError, SeparableObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Power with a real constant exponent.
    Pow(Box<Expr>, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("fractional power {exponent} of negative value {base}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("variable x{index} out of range for a point of length {len}")]
    MissingVariable { index: usize, len: usize },
}

fn is_integer(c: f64) -> bool {
    c.fract() == 0.0 && c.abs() < 2_147_483_648.0
}

fn apply_unary(op: UnaryOp, a: f64) -> Result<f64, EvalError> {
    match op {
        UnaryOp::Neg => Ok(-a),
        UnaryOp::Exp => Ok(a.exp()),
        UnaryOp::Log if a > 0.0 => Ok(a.ln()),
        UnaryOp::Log => Err(EvalError::LogDomain(a)),
        UnaryOp::Sqrt if a >= 0.0 => Ok(a.sqrt()),
        UnaryOp::Sqrt => Err(EvalError::SqrtDomain(a)),
    }
}

fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, EvalError> {
    match op {
        BinaryOp::Add => Ok(a + b),
        BinaryOp::Sub => Ok(a - b),
        BinaryOp::Mul => Ok(a * b),
        BinaryOp::Div if b == 0.0 => Err(EvalError::DivisionByZero),
        BinaryOp::Div => Ok(a / b),
    }
}

fn apply_pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    if is_integer(exponent) {
        return Ok(base.powi(exponent as i32));
    }
    if base < 0.0 {
        return Err(EvalError::PowDomain { base, exponent });
    }
    Ok(base.powf(exponent))
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Unary(UnaryOp::Neg, inner) => *inner,
            a => Expr::Unary(UnaryOp::Neg, Box::new(a)),
        }
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return Expr::neg(a);
        }
        if let Some(c) = a.as_const() {
            if let Ok(v) = apply_unary(op, c) {
                return Expr::Const(v);
            }
        }
        Expr::Unary(op, Box::new(a))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Exp, a)
    }

    pub fn log(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Log, a)
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Sqrt, a)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), None) if x == 0.0 => b,
            (None, Some(y)) if y == 0.0 => a,
            _ => match b {
                Expr::Unary(UnaryOp::Neg, inner) => Expr::Binary(BinaryOp::Sub, Box::new(a), inner),
                b => Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b)),
            },
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(x), None) if x == 0.0 => Expr::neg(b),
            (None, Some(y)) if y == 0.0 => a,
            _ => Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
            (Some(x), None) if x == 1.0 => b,
            (None, Some(y)) if y == 1.0 => a,
            (Some(x), None) if x == -1.0 => Expr::neg(b),
            (None, Some(y)) if y == -1.0 => Expr::neg(a),
            // keep constant coefficients on the left
            (None, Some(_)) => Expr::Binary(BinaryOp::Mul, Box::new(b), Box::new(a)),
            _ => Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (Some(x), None) if x == 0.0 => Expr::Const(0.0),
            (None, Some(y)) if y == 1.0 => a,
            (None, Some(y)) if y != 0.0 => Expr::mul(Expr::Const(1.0 / y), a),
            _ => Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        match op {
            BinaryOp::Add => Expr::add(a, b),
            BinaryOp::Sub => Expr::sub(a, b),
            BinaryOp::Mul => Expr::mul(a, b),
            BinaryOp::Div => Expr::div(a, b),
        }
    }

    pub fn pow(a: Expr, exponent: f64) -> Expr {
        if exponent == 0.0 {
            return Expr::Const(1.0);
        }
        if exponent == 1.0 {
            return a;
        }
        match a {
            Expr::Const(c) => match apply_pow(c, exponent) {
                Ok(v) => Expr::Const(v),
                Err(_) => Expr::Pow(Box::new(Expr::Const(c)), exponent),
            },
            Expr::Pow(inner, e) if is_integer(e) && is_integer(exponent) => Expr::pow(*inner, e * exponent),
            a => Expr::Pow(Box::new(a), exponent),
        }
    }

    /// Sum of an iterator of expressions; empty sums are zero.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::Const(0.0), Expr::add)
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        factors.into_iter().fold(Expr::Const(1.0), Expr::mul)
    }

    /// Evaluate at a point. `x` must cover every referenced variable index.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(&|i| x.get(i).copied().ok_or(EvalError::MissingVariable { index: i, len: x.len() }))
    }

    /// Evaluate with a single value bound to every variable. Used for
    /// univariate terms, whose one variable index is irrelevant.
    pub fn eval_univariate(&self, value: f64) -> Result<f64, EvalError> {
        self.eval_with(&|_| Ok(value))
    }

    fn eval_with(&self, lookup: &dyn Fn(usize) -> Result<f64, EvalError>) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => lookup(*i),
            Expr::Unary(op, a) => apply_unary(*op, a.eval_with(lookup)?),
            Expr::Binary(op, a, b) => apply_binary(*op, a.eval_with(lookup)?, b.eval_with(lookup)?),
            Expr::Pow(a, e) => apply_pow(a.eval_with(lookup)?, *e),
        }
    }

    /// Partial derivative with respect to variable `i`, constant-folded.
    pub fn differentiate(&self, i: usize) -> Expr {
        if !self.depends_on(i) {
            return Expr::Const(0.0);
        }
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.differentiate(i);
                match op {
                    UnaryOp::Neg => Expr::neg(da),
                    UnaryOp::Exp => Expr::mul(da, self.clone()),
                    UnaryOp::Log => Expr::div(da, (**a).clone()),
                    UnaryOp::Sqrt => Expr::div(da, Expr::mul(Expr::Const(2.0), self.clone())),
                }
            }
            Expr::Binary(op, a, b) => {
                let (da, db) = (a.differentiate(i), b.differentiate(i));
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => Expr::add(da, db),
                    BinaryOp::Sub => Expr::sub(da, db),
                    BinaryOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                    BinaryOp::Div => {
                        Expr::div(Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db)), Expr::pow(b, 2.0))
                    }
                }
            }
            Expr::Pow(a, e) => {
                Expr::mul(Expr::mul(Expr::Const(*e), Expr::pow((**a).clone(), e - 1.0)), a.differentiate(i))
            }
        }
    }

    pub fn depends_on(&self, i: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(j) => *j == i,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.depends_on(i),
            Expr::Binary(_, a, b) => a.depends_on(i) || b.depends_on(i),
        }
    }

    pub fn variables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(j) => {
                out.insert(*j);
            }
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.collect_variables(out),
            Expr::Binary(_, a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    /// Replace every variable by the expression `f` returns for its index,
    /// re-folding constants on the way back up.
    pub fn substitute(&self, f: &dyn Fn(usize) -> Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => f(*i),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(f)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(f), b.substitute(f)),
            Expr::Pow(a, e) => Expr::pow(a.substitute(f), *e),
        }
    }

    /// Render using the given variable names (falls back to `x<i>`).
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Named { expr: self, names }
    }
}

struct Named<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.names, f)
    }
}

fn write_expr(e: &Expr, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Const(c) if *c < 0.0 => write!(f, "({c:?})"),
        Expr::Const(c) => write!(f, "{c:?}"),
        Expr::Var(i) => match names.get(*i) {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "x{i}"),
        },
        Expr::Unary(UnaryOp::Neg, a) => {
            write!(f, "(-")?;
            write_expr(a, names, f)?;
            write!(f, ")")
        }
        Expr::Unary(op, a) => {
            let name = match op {
                UnaryOp::Exp => "exp",
                UnaryOp::Log => "log",
                UnaryOp::Sqrt => "sqrt",
                UnaryOp::Neg => unreachable!(),
            };
            write!(f, "{name}(")?;
            write_expr(a, names, f)?;
            write!(f, ")")
        }
        Expr::Binary(op, a, b) => {
            let sym = match op {
                BinaryOp::Add => "+",
                BinaryOp::Sub => "-",
                BinaryOp::Mul => "*",
                BinaryOp::Div => "/",
            };
            write!(f, "(")?;
            write_expr(a, names, f)?;
            write!(f, " {sym} ")?;
            write_expr(b, names, f)?;
            write!(f, ")")
        }
        Expr::Pow(a, e) => {
            write!(f, "(")?;
            write_expr(a, names, f)?;
            if *e < 0.0 {
                write!(f, ")^({e:?})")
            } else {
                write!(f, ")^{e:?}")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, &[], f)
    }
}
