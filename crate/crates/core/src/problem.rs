//! Box-constrained separable problems and their unit-box normalization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{
    extract_separable, parse, BivariateTerm, EvalError, Expr, ExtractError, ParseError, SeparableObjective,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("Q is not symmetric: Q[{i}][{j}] = {a} but Q[{j}][{i}] = {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid bounds for variable {index}: [{lower}, {upper}]")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds(Vec<(f64, f64)>);

impl BoxBounds {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, ProblemError> {
        for (index, &(lower, upper)) in bounds.iter().enumerate() {
            if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                return Err(ProblemError::InvalidBounds { index, lower, upper });
            }
        }
        Ok(BoxBounds(bounds))
    }

    pub fn unit(n: usize) -> Self {
        BoxBounds(vec![(0.0, 1.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&b| b == (0.0, 1.0))
    }
}

/// `f(x) = 1/2 x^T Q x + b^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpData {
    q: DMatrix<f64>,
    b: DVector<f64>,
}

impl QpData {
    pub fn new(q: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, ProblemError> {
        let n = b.len();
        if q.len() != n || q.iter().any(|row| row.len() != n) {
            return Err(ProblemError::DimensionMismatch(format!("Q must be {n}x{n} to match b of length {n}")));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if q[i][j] != q[j][i] {
                    return Err(ProblemError::Asymmetric { i, j, a: q[i][j], b: q[j][i] });
                }
            }
        }
        let q = DMatrix::from_fn(n, n, |i, j| q[i][j]);
        Ok(QpData { q, b: DVector::from_vec(b) })
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.q * &x)) + self.b.dot(&x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.q * x + &self.b).as_slice().to_vec()
    }

    pub fn hessian_vector(&self, v: &[f64]) -> Vec<f64> {
        (&self.q * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    /// Coefficients after substituting `x = offset + scale * u`.
    fn affine(&self, affine: &[Affine]) -> QpData {
        let n = self.n();
        let s = DVector::from_iterator(n, affine.iter().map(|a| a.scale));
        let l = DVector::from_iterator(n, affine.iter().map(|a| a.offset));
        let q = DMatrix::from_fn(n, n, |i, j| s[i] * self.q[(i, j)] * s[j]);
        let b = (&self.q * l + &self.b).component_mul(&s);
        QpData { q, b }
    }
}

/// `x = offset + scale * u` for one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone)]
struct TermDerivatives {
    first: Expr,
    second: Expr,
}

impl TermDerivatives {
    fn of(e: &Expr, var: usize) -> Self {
        let first = e.differentiate(var);
        let second = first.differentiate(var);
        TermDerivatives { first, second }
    }
}

/// First and second derivatives of every term, computed once.
#[derive(Debug, Clone)]
struct Derivatives {
    univariate: Vec<TermDerivatives>,
    bivariate: Vec<(TermDerivatives, TermDerivatives)>,
}

impl Derivatives {
    fn of(obj: &SeparableObjective) -> Self {
        Derivatives {
            univariate: obj.univariate().iter().map(|(i, g)| TermDerivatives::of(g, *i)).collect(),
            bivariate: obj
                .bivariate()
                .iter()
                .map(|t| (TermDerivatives::of(&t.p, t.k), TermDerivatives::of(&t.q, t.l)))
                .collect(),
        }
    }
}

/// An optimization problem in working coordinates. Before normalization the
/// working coordinates are the original ones; afterwards they are the unit box.
#[derive(Debug, Clone)]
pub struct Problem {
    objective: SeparableObjective,
    bounds: BoxBounds,
    affine: Vec<Affine>,
    normalized: bool,
    qp: Option<QpData>,
    var_names: Vec<String>,
    derivs: Derivatives,
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

impl Problem {
    fn assemble(
        objective: SeparableObjective,
        bounds: BoxBounds,
        qp: Option<QpData>,
        var_names: Vec<String>,
    ) -> Result<Self, ProblemError> {
        if bounds.len() != objective.n() {
            return Err(ProblemError::DimensionMismatch(format!(
                "{} bounds for {} variables",
                bounds.len(),
                objective.n()
            )));
        }
        let affine = vec![Affine { scale: 1.0, offset: 0.0 }; objective.n()];
        let derivs = Derivatives::of(&objective);
        let normalized = bounds.is_unit();
        Ok(Problem { objective, bounds, affine, normalized, qp, var_names, derivs })
    }

    /// Quadratic program; one bivariate pair per nonzero upper-triangular `Q_kl`.
    pub fn from_qp(qp: QpData, bounds: BoxBounds) -> Result<Self, ProblemError> {
        let n = qp.n();
        let mut uni = Vec::new();
        let mut bi = Vec::new();
        for i in 0..n {
            let (qii, bi_) = (qp.q[(i, i)], qp.b[i]);
            let g = Expr::add(
                Expr::mul(Expr::Const(0.5 * qii), Expr::pow(Expr::var(i), 2.0)),
                Expr::mul(Expr::Const(bi_), Expr::var(i)),
            );
            if g.as_const().is_none() {
                uni.push((i, g));
            }
            for l in (i + 1)..n {
                let qkl = qp.q[(i, l)];
                if qkl != 0.0 {
                    bi.push(BivariateTerm { k: i, l, p: Expr::mul(Expr::Const(qkl), Expr::var(i)), q: Expr::var(l) });
                }
            }
        }
        let objective = SeparableObjective::from_parts(n, 0.0, uni, bi)?;
        Problem::assemble(objective, bounds, Some(qp), default_names(n))
    }

    pub fn from_expr(e: &Expr, bounds: BoxBounds) -> Result<Self, ProblemError> {
        let n = bounds.len();
        let objective = extract_separable(e, n)?;
        Problem::assemble(objective, bounds, None, default_names(n))
    }

    pub fn from_objective(objective: SeparableObjective, bounds: BoxBounds) -> Result<Self, ProblemError> {
        let n = objective.n();
        Problem::assemble(objective, bounds, None, default_names(n))
    }

    /// Parse `text` over `vars` and decompose it.
    pub fn from_symbolic(text: &str, vars: &[String], bounds: BoxBounds) -> Result<Self, ProblemError> {
        if vars.len() != bounds.len() {
            return Err(ProblemError::DimensionMismatch(format!(
                "{} variables but {} bounds",
                vars.len(),
                bounds.len()
            )));
        }
        let e = parse(text, vars)?;
        let mut p = Problem::from_expr(&e, bounds)?;
        p.var_names = vars.to_vec();
        Ok(p)
    }

    /// Rewrite over the unit box via `x_i = L_i + (U_i - L_i) u_i`.
    pub fn normalize_to_unit_box(&self) -> Problem {
        if self.normalized {
            return self.clone();
        }
        let affine: Vec<Affine> =
            self.bounds.as_slice().iter().map(|&(l, u)| Affine { scale: u - l, offset: l }).collect();
        let sub = |i: usize| {
            let a = affine[i];
            Expr::add(Expr::Const(a.offset), Expr::mul(Expr::Const(a.scale), Expr::var(i)))
        };
        let objective =
            self.objective.map_terms(&|e| e.substitute(&sub)).expect("affine substitution preserves separability");
        let qp = self.qp.as_ref().map(|q| q.affine(&affine));
        let derivs = Derivatives::of(&objective);
        Problem {
            objective,
            bounds: self.bounds.clone(),
            affine,
            normalized: true,
            qp,
            var_names: self.var_names.clone(),
            derivs,
        }
    }

    pub fn n(&self) -> usize {
        self.objective.n()
    }

    pub fn objective(&self) -> &SeparableObjective {
        &self.objective
    }

    pub fn qp(&self) -> Option<&QpData> {
        self.qp.as_ref()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Bounds as given by the user.
    pub fn original_bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    /// Bounds of the working coordinates.
    pub fn working_bounds(&self) -> Vec<(f64, f64)> {
        if self.normalized {
            vec![(0.0, 1.0); self.n()]
        } else {
            self.bounds.as_slice().to_vec()
        }
    }

    pub fn affine(&self) -> &[Affine] {
        &self.affine
    }

    /// Working coordinates to original coordinates.
    pub fn to_original(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.affine).map(|(u, a)| a.offset + a.scale * u).collect()
    }

    /// Original coordinates to working coordinates.
    pub fn to_working(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.affine).map(|(x, a)| (x - a.offset) / a.scale).collect()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.objective.eval(x)
    }

    /// Gradient; for quadratic programs this is `Qx + b` computed directly.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        if let Some(qp) = &self.qp {
            return Ok(qp.gradient(x));
        }
        let mut g = vec![0.0; self.n()];
        for ((i, _), d) in self.objective.univariate().iter().zip(&self.derivs.univariate) {
            g[*i] += d.first.eval(x)?;
        }
        for (t, (dp, dq)) in self.objective.bivariate().iter().zip(&self.derivs.bivariate) {
            let (p, q) = (t.p.eval(x)?, t.q.eval(x)?);
            g[t.k] += dp.first.eval(x)? * q;
            g[t.l] += p * dq.first.eval(x)?;
        }
        Ok(g)
    }

    /// Hessian-vector product; `Qv` for quadratic programs.
    pub fn hessian_vector(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
        if let Some(qp) = &self.qp {
            return Ok(qp.hessian_vector(v));
        }
        let mut hv = vec![0.0; self.n()];
        for ((i, _), d) in self.objective.univariate().iter().zip(&self.derivs.univariate) {
            hv[*i] += d.second.eval(x)? * v[*i];
        }
        for (t, (dp, dq)) in self.objective.bivariate().iter().zip(&self.derivs.bivariate) {
            let (p, q) = (t.p.eval(x)?, t.q.eval(x)?);
            let (p1, q1) = (dp.first.eval(x)?, dq.first.eval(x)?);
            let (p2, q2) = (dp.second.eval(x)?, dq.second.eval(x)?);
            let cross = p1 * q1;
            hv[t.k] += p2 * q * v[t.k] + cross * v[t.l];
            hv[t.l] += cross * v[t.k] + p * q2 * v[t.l];
        }
        Ok(hv)
    }
}

/// On-disk problem description, either numeric or symbolic.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemFile {
    Qp {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        bounds: Option<Vec<(f64, f64)>>,
    },
    Symbolic {
        vars: Vec<String>,
        expr: String,
        #[serde(default)]
        bounds: Option<Vec<(f64, f64)>>,
    },
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Build the problem; missing bounds default to the unit box.
    pub fn into_problem(self) -> Result<Problem, ProblemError> {
        match self {
            ProblemFile::Qp { q, b, bounds } => {
                let n = b.len();
                let bounds = BoxBounds::new(bounds.unwrap_or_else(|| vec![(0.0, 1.0); n]))?;
                Problem::from_qp(QpData::new(q, b)?, bounds)
            }
            ProblemFile::Symbolic { vars, expr, bounds } => {
                let n = vars.len();
                let bounds = BoxBounds::new(bounds.unwrap_or_else(|| vec![(0.0, 1.0); n]))?;
                Problem::from_symbolic(&expr, &vars, bounds)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn sec61() -> QpData {
        QpData::new(vec![vec![-2.0, 1.0], vec![1.0, -1.0]], vec![0.75, -0.25]).unwrap()
    }

    #[test]
    fn qp_matches_symbolic_form() {
        let p = Problem::from_qp(sec61(), BoxBounds::unit(2)).unwrap();
        let f = |x: f64, y: f64| -x * x + x * y - 0.5 * y * y + 0.75 * x - 0.25 * y;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (x, y) = (rng.gen::<f64>(), rng.gen::<f64>());
            assert!((p.value(&[x, y]).unwrap() - f(x, y)).abs() < 1e-14);
        }
        assert_eq!(p.value(&[0.0, 1.0]).unwrap(), -0.75);
        assert_eq!(p.objective().m(), 1);
    }

    #[test]
    fn zero_qp_is_constant_zero() {
        let qp = QpData::new(vec![vec![0.0; 3]; 3], vec![0.0; 3]).unwrap();
        let p = Problem::from_qp(qp, BoxBounds::unit(3)).unwrap();
        assert_eq!(p.objective().m(), 0);
        assert!(p.objective().univariate().is_empty());
        assert_eq!(p.value(&[0.3, 0.2, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn random_sparse_qp_decomposition() {
        let n = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            q[i][i] = rng.gen_range(-1.0..1.0);
            for j in (i + 1)..n {
                if rng.gen_bool(0.4) {
                    let v = rng.gen_range(-1.0..1.0);
                    q[i][j] = v;
                    q[j][i] = v;
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nonzero_upper =
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|&(i, j)| q[i][j] != 0.0).count();
        let p = Problem::from_qp(QpData::new(q.clone(), b.clone()).unwrap(), BoxBounds::unit(n)).unwrap();
        assert_eq!(p.objective().m(), nonzero_upper);
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            // direct matrix arithmetic
            let mut want = 0.0;
            for i in 0..n {
                want += b[i] * x[i];
                for j in 0..n {
                    want += 0.5 * x[i] * q[i][j] * x[j];
                }
            }
            assert!((p.objective().eval(&x).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            QpData::new(vec![vec![1.0, 2.0], vec![2.5, 1.0]], vec![0.0, 0.0]),
            Err(ProblemError::Asymmetric { i: 0, j: 1, .. })
        ));
        assert!(matches!(
            QpData::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]], vec![0.0]),
            Err(ProblemError::DimensionMismatch(_))
        ));
        assert!(matches!(
            BoxBounds::new(vec![(0.0, 1.0), (2.0, 2.0)]),
            Err(ProblemError::InvalidBounds { index: 1, .. })
        ));
        assert!(BoxBounds::new(vec![(1.0, 0.0)]).is_err());
    }

    #[test]
    fn three_variable_symbolic_problem() {
        let p = Problem::from_symbolic(
            "(2*y - 1)^2*(z - 2/5) - (2*x - 1)*z + y*(2*x - 3/2)^2",
            &names(&["x", "y", "z"]),
            BoxBounds::unit(3),
        )
        .unwrap();
        assert_eq!(p.n(), 3);
        assert_eq!(p.objective().m(), 3);
        let p = Problem::from_symbolic("x^2 - x", &names(&["x"]), BoxBounds::unit(1)).unwrap();
        assert_eq!(p.objective().m(), 0);
    }

    #[test]
    fn unit_bounds_normalize_to_identity() {
        let p = Problem::from_qp(sec61(), BoxBounds::unit(2)).unwrap();
        let u = p.normalize_to_unit_box();
        assert_eq!(u.objective(), p.objective());
        assert_eq!(u.to_original(&[0.3, 0.7]), vec![0.3, 0.7]);
    }

    #[test]
    fn symmetric_interval_normalization() {
        let p = Problem::from_symbolic("x^2", &names(&["x"]), BoxBounds::new(vec![(-1.0, 1.0)]).unwrap()).unwrap();
        assert!(!p.is_normalized());
        let u = p.normalize_to_unit_box();
        assert!(u.is_normalized());
        for t in [0.0, 0.25, 0.5, 1.0] {
            assert!((u.value(&[t]).unwrap() - (2.0 * t - 1.0).powi(2)).abs() < 1e-15);
        }
        assert_eq!(u.to_original(&[0.5]), vec![0.0]);
    }

    #[test]
    fn normalization_preserves_objective_and_structure() {
        let bounds = BoxBounds::new(vec![(-2.0, 3.0), (0.5, 4.0), (-1.0, -0.25)]).unwrap();
        let p = Problem::from_symbolic("x^2*y - 3*exp(0.1*z)*x + y^3 - z*y", &names(&["x", "y", "z"]), bounds.clone())
            .unwrap();
        let u = p.normalize_to_unit_box();
        // still separable after the substitution
        extract_separable(&u.objective().reassemble(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: Vec<f64> = bounds.as_slice().iter().map(|&(l, h)| rng.gen_range(l..h)).collect();
            let w = u.to_working(&x);
            let back = u.to_original(&w);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
            let (fx, fu) = (p.value(&x).unwrap(), u.value(&w).unwrap());
            assert!((fx - fu).abs() <= 1e-10 * fx.abs().max(1.0));
        }
    }

    #[test]
    fn qp_normalization_transforms_gradient() {
        let bounds = BoxBounds::new(vec![(-1.0, 2.0), (0.0, 0.5)]).unwrap();
        let p = Problem::from_qp(sec61(), bounds).unwrap().normalize_to_unit_box();
        let sym = Problem::from_objective(p.objective().clone(), BoxBounds::unit(2)).unwrap();
        for x in [[0.1, 0.2], [0.9, 0.4], [0.5, 0.5]] {
            let (a, b) = (p.gradient(&x).unwrap(), sym.gradient(&x).unwrap());
            for (a, b) in a.iter().zip(&b) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn problem_files() {
        let p = ProblemFile::from_json(r#"{"Q": [[-2, 1], [1, -1]], "b": [0.75, -0.25], "bounds": [[0, 1], [0, 1]]}"#)
            .unwrap()
            .into_problem()
            .unwrap();
        assert!(p.qp().is_some());
        let p = ProblemFile::from_json(r#"{"vars": ["x", "y"], "expr": "x*y - x"}"#).unwrap().into_problem().unwrap();
        assert_eq!(p.var_names(), &["x".to_string(), "y".to_string()]);
        assert!(ProblemFile::from_json(r#"{"vars": ["x"], "expr": "x*q"}"#).unwrap().into_problem().is_err());
    }
}
