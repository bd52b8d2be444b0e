//! Built-in and generated benchmark instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::{BivariateTerm, Expr, SeparableObjective};
use crate::problem::{BoxBounds, Problem, QpData};
use crate::refine::{best_index, refine, RefineConfig, RefineMethod, RefinementResult};

/// Starts used by the multi-start oracle for generated instances.
pub const ORACLE_STARTS: usize = 10_000;
/// Refinement tolerance of the multi-start oracle.
pub const ORACLE_TOL: f64 = 1e-12;

/// Where a reference objective value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Published best-found value, confirmed by a local oracle.
    Reference,
    /// Computed here by multi-start refinement; not a certified global optimum.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    /// Full-precision value used for success checks.
    pub value: f64,
    pub provenance: Provenance,
    /// Published value at its printed precision, when there is one.
    pub printed: Option<f64>,
    /// A minimizer in original coordinates, when known.
    pub minimizer: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    BuiltinNonlinear,
    BuiltinExample,
    GeneratedExp,
    GeneratedQp,
    UserFile,
}

#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub id: String,
    pub source: InstanceSource,
    pub problem: Problem,
    pub f_star: Option<KnownOptimum>,
}

impl InstanceSpec {
    pub fn user(id: impl Into<String>, problem: Problem) -> Self {
        InstanceSpec { id: id.into(), source: InstanceSource::UserFile, problem, f_star: None }
    }
}

struct Builtin {
    id: &'static str,
    source: InstanceSource,
    vars: &'static [&'static str],
    expr: &'static str,
    value: f64,
    printed: Option<f64>,
    minimizer: Option<&'static [f64]>,
}

const NONLINEAR_1: &str = "-4*x^2 + 3*x*y - 2*y^2 + 3*x - y";
const NONLINEAR_2: &str = "-2*(x - 1/3)^2 + y^2 - (1/3)*y*log(3*x + 1/2) + 5*(x^2 - y^2 - x - 1/2)^2";
const NONLINEAR_3: &str = "y^1.5 - exp(4*x)*(y - 0.75)";
const NONLINEAR_4: &str = "(2*y - 1)^2*(z - 2/5) - (2*x - 1)*z + y*(2*x - 3/2)^2";
const NONLINEAR_5: &str = "2*exp(-x)*(2*z - 1)^2 - 3*(2*y - 7/10)^2*exp(-z) + log(x + 1)*(y - 4/5)";

const BUILTINS: &[Builtin] = &[
    Builtin {
        id: "nonlinear-1",
        source: InstanceSource::BuiltinNonlinear,
        vars: &["x", "y"],
        expr: NONLINEAR_1,
        value: -3.0,
        printed: Some(-3.0),
        minimizer: Some(&[0.0, 1.0]),
    },
    Builtin {
        id: "nonlinear-2",
        source: InstanceSource::BuiltinNonlinear,
        vars: &["x", "y"],
        expr: NONLINEAR_2,
        value: 0.353_852_603_473_551_1,
        printed: Some(0.354),
        minimizer: None,
    },
    Builtin {
        id: "nonlinear-3",
        source: InstanceSource::BuiltinNonlinear,
        vars: &["x", "y"],
        expr: NONLINEAR_3,
        value: -12.649_537_508_286_059,
        printed: Some(-12.650),
        minimizer: Some(&[1.0, 1.0]),
    },
    Builtin {
        id: "nonlinear-4",
        source: InstanceSource::BuiltinNonlinear,
        vars: &["x", "y", "z"],
        expr: NONLINEAR_4,
        value: -0.881_510_416_666_666_7,
        printed: Some(-0.882),
        minimizer: None,
    },
    Builtin {
        id: "nonlinear-5",
        source: InstanceSource::BuiltinNonlinear,
        vars: &["x", "y", "z"],
        expr: NONLINEAR_5,
        value: -4.195_611_681_545_126_5,
        printed: Some(-4.196),
        minimizer: Some(&[1.0, 1.0, 0.0]),
    },
    Builtin {
        id: "example-exp",
        source: InstanceSource::BuiltinExample,
        vars: &["x", "y"],
        expr: NONLINEAR_3,
        value: -12.649_537_508_286_059,
        printed: Some(-12.650),
        minimizer: Some(&[1.0, 1.0]),
    },
];

/// Identifiers of every built-in instance, in suite order.
pub fn builtin_ids() -> Vec<&'static str> {
    let mut ids: Vec<&str> = BUILTINS.iter().take(5).map(|b| b.id).collect();
    ids.push("example-qp");
    ids.push("example-exp");
    ids
}

/// The two-variable example QP: `min x'Qx/2 + b'x` on the unit square with
/// `Q = [[-2, 1], [1, -1]]`, `b = [3/4, -1/4]`.
pub fn example_qp() -> InstanceSpec {
    let qp = QpData::new(vec![vec![-2.0, 1.0], vec![1.0, -1.0]], vec![0.75, -0.25]).expect("valid QP");
    let problem = Problem::from_qp(qp, BoxBounds::unit(2)).expect("valid QP problem");
    InstanceSpec {
        id: "example-qp".into(),
        source: InstanceSource::BuiltinExample,
        problem,
        f_star: Some(KnownOptimum {
            value: -0.75,
            provenance: Provenance::Derived,
            printed: None,
            minimizer: Some(vec![0.0, 1.0]),
        }),
    }
}

pub fn builtin(id: &str) -> Option<InstanceSpec> {
    if id == "example-qp" {
        return Some(example_qp());
    }
    let b = BUILTINS.iter().find(|b| b.id == id)?;
    let vars: Vec<String> = b.vars.iter().map(|v| v.to_string()).collect();
    let problem = Problem::from_symbolic(b.expr, &vars, BoxBounds::unit(vars.len())).expect("built-in instance parses");
    Some(InstanceSpec {
        id: b.id.into(),
        source: b.source,
        problem,
        f_star: Some(KnownOptimum {
            value: b.value,
            provenance: Provenance::Reference,
            printed: b.printed,
            minimizer: b.minimizer.map(|m| m.to_vec()),
        }),
    })
}

pub fn builtins() -> Vec<InstanceSpec> {
    builtin_ids().into_iter().map(|id| builtin(id).expect("known id")).collect()
}

/// Symmetric `Q` (diagonal always drawn, each off-diagonal pair nonzero with
/// probability `sparsity`) and `b`, all entries uniform in `[-1, 1]`.
pub fn random_coefficients(dim: usize, sparsity: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        q[i][i] = rng.gen_range(-1.0..=1.0);
        for j in (i + 1)..dim {
            if rng.gen::<f64>() < sparsity {
                let v = rng.gen_range(-1.0..=1.0);
                q[i][j] = v;
                q[j][i] = v;
            }
        }
    }
    let b = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    (q, b)
}

/// `f(x) = 1/2 sum_ij Q_ij e^{x_i} e^{x_j} + sum_i b_i e^{-x_i}` on the unit box.
pub fn exp_objective(q: &[Vec<f64>], b: &[f64]) -> SeparableObjective {
    let n = b.len();
    let univariate = (0..n).map(|i| {
        let x = Expr::var(i);
        let square = Expr::mul(Expr::constant(0.5 * q[i][i]), Expr::exp(Expr::mul(Expr::constant(2.0), x.clone())));
        let decay = Expr::mul(Expr::constant(b[i]), Expr::exp(Expr::neg(x)));
        (i, Expr::add(square, decay))
    });
    let mut bivariate = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if q[i][j] != 0.0 {
                bivariate.push(BivariateTerm {
                    k: i,
                    l: j,
                    p: Expr::mul(Expr::constant(q[i][j]), Expr::exp(Expr::var(i))),
                    q: Expr::exp(Expr::var(j)),
                });
            }
        }
    }
    SeparableObjective::from_parts(n, 0.0, univariate, bivariate).expect("exponential family is separable")
}

/// Lowest refined value over `starts` uniform random starts in the working box.
pub fn multi_start_minimum(
    problem: &Problem,
    starts: usize,
    seed: u64,
    cfg: &RefineConfig,
) -> Option<RefinementResult> {
    let bounds = problem.working_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> =
        (0..starts).map(|_| bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()).collect();
    let results: Vec<RefinementResult> = points.par_iter().filter_map(|x0| refine(problem, x0, cfg).ok()).collect();
    best_index(&results).map(|i| results[i].clone())
}

fn oracle_optimum(problem: &Problem, starts: usize, seed: u64) -> Option<KnownOptimum> {
    let cfg = RefineConfig { method: RefineMethod::TruncatedNewton, tol: ORACLE_TOL, ..RefineConfig::default() };
    multi_start_minimum(problem, starts, seed, &cfg).map(|r| KnownOptimum {
        value: r.f_star,
        provenance: Provenance::Derived,
        printed: None,
        minimizer: Some(problem.to_original(&r.x_star)),
    })
}

/// Exponential-family instance with the default oracle budget.
pub fn generate_exp_instance(dim: usize, sparsity: f64, seed: u64) -> InstanceSpec {
    generate_exp_instance_with(dim, sparsity, seed, ORACLE_STARTS)
}

/// Exponential-family instance; `oracle_starts = 0` skips the reference value.
pub fn generate_exp_instance_with(dim: usize, sparsity: f64, seed: u64, oracle_starts: usize) -> InstanceSpec {
    assert!(dim >= 2, "dim must be at least 2");
    assert!(sparsity > 0.0 && sparsity <= 1.0, "sparsity must lie in (0, 1]");
    let (q, b) = random_coefficients(dim, sparsity, seed);
    let problem = Problem::from_objective(exp_objective(&q, &b), BoxBounds::unit(dim)).expect("valid problem");
    let f_star = (oracle_starts > 0).then(|| oracle_optimum(&problem, oracle_starts, seed)).flatten();
    InstanceSpec {
        id: format!("exp-d{dim}-s{sparsity}-seed{seed}"),
        source: InstanceSource::GeneratedExp,
        problem,
        f_star,
    }
}

/// Random sparse box-constrained QP with the same coefficient law.
pub fn generate_qp_instance(dim: usize, sparsity: f64, seed: u64, oracle_starts: usize) -> InstanceSpec {
    assert!(dim >= 1, "dim must be at least 1");
    let (q, b) = random_coefficients(dim, sparsity, seed);
    let problem = Problem::from_qp(QpData::new(q, b).expect("symmetric"), BoxBounds::unit(dim)).expect("valid QP");
    let f_star = (oracle_starts > 0).then(|| oracle_optimum(&problem, oracle_starts, seed)).flatten();
    InstanceSpec {
        id: format!("qp-d{dim}-s{sparsity}-seed{seed}"),
        source: InstanceSource::GeneratedQp,
        problem,
        f_star,
    }
}
