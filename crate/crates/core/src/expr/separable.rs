//! Decomposition of an objective into univariate terms `g_i(x_i)` plus
//! bivariate products `p_j(x_k) q_j(x_l)`.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{BinaryOp, EvalError, Expr, UnaryOp};

/// Upper bound on the number of additive terms produced while distributing
/// products over multi-variable sums.
const MAX_EXPANDED_TERMS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("term {term} couples {count} variables; at most two are supported")]
    TooManyVariables { term: String, count: usize },
    #[error("term {term} does not factor as p(x{k}) * q(x{l})")]
    NotProductForm { term: String, k: usize, l: usize },
    #[error("variable index {index} out of range for {n} variables")]
    VariableOutOfRange { index: usize, n: usize },
    #[error("bivariate term must couple two distinct variables, got x{0} twice")]
    SameVariable(usize),
    #[error("expansion exceeds {MAX_EXPANDED_TERMS} terms")]
    ExpansionTooLarge,
}

impl ExtractError {
    pub fn is_not_separable(&self) -> bool {
        matches!(self, ExtractError::TooManyVariables { .. } | ExtractError::NotProductForm { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BivariateTerm {
    /// Index of the first variable; always smaller than `l`.
    pub k: usize,
    pub l: usize,
    /// Factor in `x_k` only.
    pub p: Expr,
    /// Factor in `x_l` only.
    pub q: Expr,
}

/// `f(x) = c + sum_i g_i(x_i) + sum_j p_j(x_{k_j}) q_j(x_{l_j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableObjective {
    n: usize,
    constant: f64,
    univariate: Vec<(usize, Expr)>,
    bivariate: Vec<BivariateTerm>,
}

fn single_var_ok(e: &Expr, want: usize, n: usize) -> Result<(), ExtractError> {
    for v in e.variables() {
        if v >= n {
            return Err(ExtractError::VariableOutOfRange { index: v, n });
        }
        if v != want {
            return Err(ExtractError::NotProductForm { term: e.to_string(), k: want, l: v });
        }
    }
    Ok(())
}

impl SeparableObjective {
    /// Assemble from raw parts, merging univariate terms per variable and
    /// folding constant factors. Pairs are reordered so that `k < l`.
    pub fn from_parts(
        n: usize,
        constant: f64,
        univariate: impl IntoIterator<Item = (usize, Expr)>,
        bivariate: impl IntoIterator<Item = BivariateTerm>,
    ) -> Result<Self, ExtractError> {
        let mut constant = constant;
        let mut uni: BTreeMap<usize, Expr> = BTreeMap::new();
        let mut add_uni = |i: usize, e: Expr, constant: &mut f64| {
            if let Some(c) = e.as_const() {
                *constant += c;
                return;
            }
            let merged = match uni.remove(&i) {
                Some(prev) => Expr::add(prev, e),
                None => e,
            };
            uni.insert(i, merged);
        };
        for (i, e) in univariate {
            if i >= n {
                return Err(ExtractError::VariableOutOfRange { index: i, n });
            }
            single_var_ok(&e, i, n)?;
            add_uni(i, e, &mut constant);
        }
        let mut bi = Vec::new();
        for t in bivariate {
            let BivariateTerm { k, l, p, q } = t;
            if k >= n || l >= n {
                return Err(ExtractError::VariableOutOfRange { index: k.max(l), n });
            }
            if k == l {
                return Err(ExtractError::SameVariable(k));
            }
            single_var_ok(&p, k, n)?;
            single_var_ok(&q, l, n)?;
            match (p.as_const(), q.as_const()) {
                (Some(a), Some(b)) => constant += a * b,
                (Some(a), None) => add_uni(l, Expr::mul(Expr::Const(a), q), &mut constant),
                (None, Some(b)) => add_uni(k, Expr::mul(Expr::Const(b), p), &mut constant),
                (None, None) if k < l => bi.push(BivariateTerm { k, l, p, q }),
                (None, None) => bi.push(BivariateTerm { k: l, l: k, p: q, q: p }),
            }
        }
        Ok(SeparableObjective { n, constant, univariate: uni.into_iter().collect(), bivariate: bi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of bivariate terms.
    pub fn m(&self) -> usize {
        self.bivariate.len()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Univariate terms sorted by variable index, at most one per variable.
    pub fn univariate(&self) -> &[(usize, Expr)] {
        &self.univariate
    }

    pub fn bivariate(&self) -> &[BivariateTerm] {
        &self.bivariate
    }

    pub fn univariate_for(&self, i: usize) -> Option<&Expr> {
        self.univariate.iter().find(|(j, _)| *j == i).map(|(_, e)| e)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut acc = self.constant;
        for (_, g) in &self.univariate {
            acc += g.eval(x)?;
        }
        for t in &self.bivariate {
            acc += t.p.eval(x)? * t.q.eval(x)?;
        }
        Ok(acc)
    }

    /// The objective as a single expression tree.
    pub fn reassemble(&self) -> Expr {
        let uni = self.univariate.iter().map(|(_, g)| g.clone());
        let bi = self.bivariate.iter().map(|t| Expr::mul(t.p.clone(), t.q.clone()));
        Expr::add(Expr::Const(self.constant), Expr::sum(uni.chain(bi)))
    }

    /// Apply `f` to every term expression, keeping the structure. `f` must
    /// map a single-variable expression in `x_i` to one in `x_i`.
    pub fn map_terms(&self, f: &dyn Fn(&Expr) -> Expr) -> Result<Self, ExtractError> {
        SeparableObjective::from_parts(
            self.n,
            self.constant,
            self.univariate.iter().map(|(i, g)| (*i, f(g))),
            self.bivariate.iter().map(|t| BivariateTerm { k: t.k, l: t.l, p: f(&t.p), q: f(&t.q) }),
        )
    }
}

/// Split into additive terms, distributing products and integer powers only
/// where a sum couples several variables.
fn expand(e: &Expr, out: &mut Vec<Expr>) -> Result<(), ExtractError> {
    if out.len() > MAX_EXPANDED_TERMS {
        return Err(ExtractError::ExpansionTooLarge);
    }
    if e.variables().len() <= 1 {
        out.push(e.clone());
        return Ok(());
    }
    match e {
        Expr::Binary(BinaryOp::Add, a, b) => {
            expand(a, out)?;
            expand(b, out)
        }
        Expr::Binary(BinaryOp::Sub, a, b) => {
            expand(a, out)?;
            let mut rhs = Vec::new();
            expand(b, &mut rhs)?;
            out.extend(rhs.into_iter().map(Expr::neg));
            Ok(())
        }
        Expr::Unary(UnaryOp::Neg, a) => {
            let mut inner = Vec::new();
            expand(a, &mut inner)?;
            out.extend(inner.into_iter().map(Expr::neg));
            Ok(())
        }
        Expr::Binary(BinaryOp::Mul, a, b) => {
            let (mut ta, mut tb) = (Vec::new(), Vec::new());
            expand(a, &mut ta)?;
            expand(b, &mut tb)?;
            distribute(ta, &tb, out)
        }
        Expr::Binary(BinaryOp::Div, a, b) if b.variables().is_empty() => {
            let mut ta = Vec::new();
            expand(a, &mut ta)?;
            out.extend(ta.into_iter().map(|t| Expr::div(t, (**b).clone())));
            Ok(())
        }
        Expr::Pow(a, k) if k.fract() == 0.0 && *k >= 2.0 && *k <= 16.0 => {
            let mut base = Vec::new();
            expand(a, &mut base)?;
            let mut acc = base.clone();
            for _ in 1..(*k as usize) {
                let mut next = Vec::new();
                distribute(acc, &base, &mut next)?;
                acc = next;
            }
            out.extend(acc);
            Ok(())
        }
        _ => {
            out.push(e.clone());
            Ok(())
        }
    }
}

fn distribute(left: Vec<Expr>, right: &[Expr], out: &mut Vec<Expr>) -> Result<(), ExtractError> {
    if left.len().saturating_mul(right.len()) + out.len() > MAX_EXPANDED_TERMS {
        return Err(ExtractError::ExpansionTooLarge);
    }
    for x in &left {
        for y in right {
            out.push(Expr::mul(x.clone(), y.clone()));
        }
    }
    Ok(())
}

/// Flatten a product into a constant coefficient and non-constant factors.
fn factors(e: &Expr, coef: &mut f64, out: &mut Vec<Expr>) {
    match e {
        Expr::Const(c) => *coef *= c,
        Expr::Unary(UnaryOp::Neg, a) => {
            *coef = -*coef;
            factors(a, coef, out);
        }
        Expr::Binary(BinaryOp::Mul, a, b) => {
            factors(a, coef, out);
            factors(b, coef, out);
        }
        Expr::Binary(BinaryOp::Div, a, b) => {
            factors(a, coef, out);
            let mut inner = Vec::new();
            let mut c = 1.0;
            factors(b, &mut c, &mut inner);
            *coef /= c;
            out.extend(inner.into_iter().map(|f| Expr::pow(f, -1.0)));
        }
        Expr::Pow(a, k) if k.fract() == 0.0 => {
            let mut inner = Vec::new();
            let mut c = 1.0;
            factors(a, &mut c, &mut inner);
            if inner.len() > 1 || c != 1.0 {
                *coef *= c.powi(*k as i32);
                out.extend(inner.into_iter().map(|f| Expr::pow(f, *k)));
            } else {
                out.push(e.clone());
            }
        }
        _ => out.push(e.clone()),
    }
}

/// Decompose `e` (over variables `0..n`) into separable form.
pub fn extract_separable(e: &Expr, n: usize) -> Result<SeparableObjective, ExtractError> {
    if let Some(&v) = e.variables().iter().find(|&&v| v >= n) {
        return Err(ExtractError::VariableOutOfRange { index: v, n });
    }
    let mut terms = Vec::new();
    expand(e, &mut terms)?;

    let mut constant = 0.0;
    let mut uni = Vec::new();
    let mut bi = Vec::new();
    for term in terms {
        let vars: Vec<usize> = term.variables().into_iter().collect();
        match vars.len() {
            0 => constant += term.as_const().unwrap_or_else(|| term.eval(&[]).unwrap_or(f64::NAN)),
            1 => uni.push((vars[0], term)),
            2 => {
                let (k, l) = (vars[0], vars[1]);
                let mut coef = 1.0;
                let mut fs = Vec::new();
                factors(&term, &mut coef, &mut fs);
                let mut p = Vec::new();
                let mut q = Vec::new();
                for f in fs {
                    let fv = f.variables();
                    if fv.len() != 1 {
                        return Err(ExtractError::NotProductForm { term: term.to_string(), k, l });
                    }
                    if fv.contains(&k) {
                        p.push(f);
                    } else {
                        q.push(f);
                    }
                }
                let p = Expr::mul(Expr::Const(coef), Expr::product(p));
                bi.push(BivariateTerm { k, l, p, q: Expr::product(q) });
            }
            count => return Err(ExtractError::TooManyVariables { term: term.to_string(), count }),
        }
    }
    SeparableObjective::from_parts(n, constant, uni, bi)
}
