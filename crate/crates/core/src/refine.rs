//! Box-constrained local refinement of decoded samples.
//!
//! Two methods share one contract: iterates stay inside the working box
//! (exact clipping), the objective never increases, and convergence means the
//! projected-gradient residual `|x - clip(x - grad f(x))|` is below `tol`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineMethod {
    ProjectedGradient,
    TruncatedNewton,
}

impl std::str::FromStr for RefineMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pg" | "projected-gradient" => Ok(RefineMethod::ProjectedGradient),
            "tn" | "truncated-newton" => Ok(RefineMethod::TruncatedNewton),
            other => Err(format!("unknown refinement method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub method: RefineMethod,
    pub tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub initial_step: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            method: RefineMethod::ProjectedGradient,
            tol: 1e-8,
            max_iters: 500,
            armijo_c: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("start point has {got} coordinates, problem has {want}")]
    Dimension { got: usize, want: usize },
    #[error("start point coordinate {index} = {value} lies outside [{lo}, {hi}]")]
    OutOfBox { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("objective undefined at the start point: {0}")]
    Domain(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementResult {
    pub start: Vec<f64>,
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iterate, starting with `f(start)`.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Largest number of step halvings per line search.
const MAX_BACKTRACKS: usize = 60;

struct Boxed<'a> {
    problem: &'a Problem,
    bounds: Vec<(f64, f64)>,
}

impl Boxed<'_> {
    fn clip(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }

    fn residual(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .zip(&self.bounds)
            .map(|((xi, gi), &(lo, hi))| (xi - (xi - gi).clamp(lo, hi)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Backtracking along the projected path `clip(x + s d)`.
    fn line_search(&self, x: &[f64], fx: f64, g: &[f64], d: &[f64], cfg: &RefineConfig) -> Option<(Vec<f64>, f64)> {
        let mut s = cfg.initial_step;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + s * di).collect();
            self.clip(&mut trial);
            let decrease: f64 = g.iter().zip(&trial).zip(x).map(|((gi, ti), xi)| gi * (ti - xi)).sum();
            if decrease < 0.0 {
                if let Ok(ft) = self.problem.value(&trial) {
                    if ft <= fx + cfg.armijo_c * decrease && ft <= fx {
                        return Some((trial, ft));
                    }
                }
            }
            s *= cfg.backtrack;
        }
        None
    }

    /// Approximate Newton direction on the free variables by conjugate
    /// gradients on Hessian-vector products.
    fn newton_direction(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let n = x.len();
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let (lo, hi) = self.bounds[i];
                !((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0))
            })
            .collect();
        let steepest: Vec<f64> = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        let gnorm = steepest.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            return steepest;
        }
        let forcing = gnorm.sqrt().min(0.5) * gnorm;
        let hv = |v: &[f64]| -> Option<Vec<f64>> {
            let h = self.problem.hessian_vector(x, v).ok()?;
            Some(h.into_iter().zip(&free).map(|(hi, &f)| if f { hi } else { 0.0 }).collect())
        };
        let mut d = vec![0.0; n];
        let mut r = steepest.clone();
        let mut p = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        for _ in 0..(2 * n + 10) {
            let Some(hp) = hv(&p) else { break };
            let curvature: f64 = p.iter().zip(&hp).map(|(a, b)| a * b).sum();
            if curvature <= 1e-14 * p.iter().map(|v| v * v).sum::<f64>() {
                break;
            }
            let alpha = rr / curvature;
            d.iter_mut().zip(&p).for_each(|(di, pi)| *di += alpha * pi);
            r.iter_mut().zip(&hp).for_each(|(ri, hi)| *ri -= alpha * hi);
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            if rr_new.sqrt() <= forcing {
                break;
            }
            let beta = rr_new / rr;
            p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
            rr = rr_new;
        }
        let slope: f64 = d.iter().zip(g).map(|(a, b)| a * b).sum();
        if d.iter().all(|v| *v == 0.0) || slope >= 0.0 {
            steepest
        } else {
            d
        }
    }
}

/// Locally minimize `p` from `x0` inside its working box.
pub fn refine(p: &Problem, x0: &[f64], cfg: &RefineConfig) -> Result<RefinementResult, RefineError> {
    if !(cfg.tol > 0.0) {
        return Err(RefineError::Config("tol must be positive"));
    }
    if !(cfg.backtrack > 0.0 && cfg.backtrack < 1.0) {
        return Err(RefineError::Config("backtrack factor must lie in (0, 1)"));
    }
    if !(cfg.initial_step > 0.0) {
        return Err(RefineError::Config("initial step must be positive"));
    }
    let bounds = p.working_bounds();
    if x0.len() != bounds.len() {
        return Err(RefineError::Dimension { got: x0.len(), want: bounds.len() });
    }
    for (index, (&value, &(lo, hi))) in x0.iter().zip(&bounds).enumerate() {
        if !(value >= lo && value <= hi) {
            return Err(RefineError::OutOfBox { index, value, lo, hi });
        }
    }
    let boxed = Boxed { problem: p, bounds };
    let mut x = x0.to_vec();
    let mut fx = p.value(&x)?;
    let mut trace = vec![fx];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        let Ok(g) = p.gradient(&x) else { break };
        if boxed.residual(&x, &g) <= cfg.tol {
            converged = true;
            break;
        }
        let steepest: Vec<f64> = g.iter().map(|v| -v).collect();
        let step = match cfg.method {
            RefineMethod::ProjectedGradient => boxed.line_search(&x, fx, &g, &steepest, cfg),
            RefineMethod::TruncatedNewton => {
                let d = boxed.newton_direction(&x, &g);
                boxed.line_search(&x, fx, &g, &d, cfg).or_else(|| boxed.line_search(&x, fx, &g, &steepest, cfg))
            }
        };
        let Some((xn, fnew)) = step else { break };
        iterations += 1;
        let stalled = xn == x;
        x = xn;
        fx = fnew;
        trace.push(fx);
        if stalled {
            break;
        }
    }
    if !converged {
        if let Ok(g) = p.gradient(&x) {
            converged = boxed.residual(&x, &g) <= cfg.tol;
        }
    }
    Ok(RefinementResult { start: x0.to_vec(), x_star: x, f_star: fx, iterations, converged, trace })
}

/// `H f(x) v`; exactly `Q v` for quadratic programs.
pub fn hessian_vector(p: &Problem, x: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
    p.hessian_vector(x, v)
}

/// Index of the best result: lowest objective, ties within `1e-12` going to
/// the earliest index.
pub fn best_index(results: &[RefinementResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        match best {
            Some(b) if r.f_star >= results[b].f_star - 1e-12 => {}
            _ => best = Some(i),
        }
    }
    best
}
