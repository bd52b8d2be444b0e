//! State-vector simulation of `i dPsi/dt = H(t) Psi` with
//! `H(t) = e^phi K + e^chi D`, `K` the (sparse, off-diagonal) kinetic group
//! and `D` the diagonal potential group.
//!
//! Time stepping uses a fourth-order commutator-free Magnus scheme: each step
//! applies two exponentials of schedule-weighted combinations of `H` at the
//! two Gauss nodes. Each exponential is evaluated by a Chebyshev expansion,
//! which is norm-preserving to working precision.

mod chebyshev;
mod schedule;

use std::io::{self, Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chebyshev::bessel_j_sequence;
pub use schedule::{Breakpoint, Coefficients, Schedule, ScheduleError, DEFAULT_GAMMA, DEFAULT_TOTAL_TIME};

use crate::discretize::DiscretizedHamiltonian;
use crate::embedding::{HamiltonianIR, PauliOp};

pub const DEFAULT_STEPS: usize = 400;
/// Largest qubit state space the embedded backend handles by default.
pub const DEFAULT_EMBEDDED_CAP: usize = 1 << 18;
pub use crate::discretize::DEFAULT_DIRECT_CAP;
/// Norm drift beyond this aborts a run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
/// Largest total-variation distance [`convergence_check`] accepts.
pub const CONVERGENCE_TV_LIMIT: f64 = 1e-3;

const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("state dimension {} exceeds the cap {cap}", crate::discretize::describe_dimension(*dimension))]
    CapExceeded { dimension: u128, cap: usize },
    #[error("norm drifted by {drift:e} over {steps} steps; increase the step count")]
    NormDrift { drift: f64, steps: usize },
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error("invalid schedule: {0}")]
    Schedule(#[from] ScheduleError),
}

/// How basis indices map to configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    /// No structure attached.
    Plain { dimension: usize },
    /// Grid multi-index, variable 0 most significant.
    Grid { variables: usize, points: usize },
    /// Bitstrings, site 0 leftmost (most significant).
    Qubits { count: usize },
}

impl Basis {
    pub fn dimension(&self) -> usize {
        match *self {
            Basis::Plain { dimension } => dimension,
            Basis::Grid { variables, points } => points.pow(variables as u32),
            Basis::Qubits { count } => 1 << count,
        }
    }

    /// Human-readable label of a basis state: comma-separated grid indices
    /// or a bitstring.
    pub fn label(&self, index: usize) -> String {
        match *self {
            Basis::Plain { .. } => index.to_string(),
            Basis::Grid { variables, points } => {
                let mut ks = vec![0; variables];
                let mut rest = index;
                for k in ks.iter_mut().rev() {
                    *k = rest % points;
                    rest /= points;
                }
                ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
            }
            Basis::Qubits { count } => {
                (0..count).map(|s| if (index >> (count - 1 - s)) & 1 == 1 { '1' } else { '0' }).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    basis: Basis,
}

/// Uniform superposition over `dimension` basis states.
pub fn initial_state(dimension: usize) -> StateVector {
    StateVector::uniform(Basis::Plain { dimension })
}

impl StateVector {
    pub fn uniform(basis: Basis) -> Self {
        let dim = basis.dimension();
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        StateVector { amplitudes: vec![a; dim], basis }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>, basis: Basis) -> Self {
        assert_eq!(amplitudes.len(), basis.dimension(), "amplitude count must match the basis");
        StateVector { amplitudes, basis }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr()
    }

    /// Little-endian `u64` dimension, then interleaved `f64` real/imaginary
    /// parts.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for a in &self.amplitudes {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> io::Result<StateVector> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let dimension = u64::from_le_bytes(buf) as usize;
        let mut amplitudes = Vec::with_capacity(dimension);
        for _ in 0..dimension {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            amplitudes.push(Complex64::new(re, f64::from_le_bytes(buf)));
        }
        Ok(StateVector { amplitudes, basis: Basis::Plain { dimension } })
    }
}

/// One Pauli string compiled to bit masks over the basis index.
#[derive(Debug, Clone, Copy)]
struct CompiledTerm {
    coeff: f64,
    flip: usize,
    y_mask: usize,
    y_phase: Complex64,
    num_mask: usize,
}

impl CompiledTerm {
    /// Amplitude contributed to `out[j]` from `x[j ^ flip]`.
    #[inline]
    fn gather(&self, j: usize, x: &[Complex64]) -> Complex64 {
        let src = j ^ self.flip;
        if src & self.num_mask != self.num_mask {
            return Complex64::new(0.0, 0.0);
        }
        let sign = if (src & self.y_mask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        self.y_phase * (sign * self.coeff) * x[src]
    }
}

#[derive(Debug, Clone)]
enum Kinetic {
    /// `-1/2 sum_i L'_i` on a tensor grid; `hop = -1/(2 h^2)`.
    Grid {
        variables: usize,
        points: usize,
        hop: f64,
    },
    Pauli(Vec<CompiledTerm>),
}

/// A Hamiltonian split into its kinetic operator and potential diagonal, in
/// the form the integrator consumes.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    basis: Basis,
    kinetic: Kinetic,
    diagonal: Vec<f64>,
    kinetic_bound: f64,
}

fn fill<F>(out: &mut [Complex64], f: F)
where
    F: Fn(usize) -> Complex64 + Sync,
{
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(|(j, o)| *o = f(j));
    } else {
        out.iter_mut().enumerate().for_each(|(j, o)| *o = f(j));
    }
}

impl SplitOperator {
    /// Direct backend: the discretized Hamiltonian on its `N^n` grid.
    pub fn direct(dh: &DiscretizedHamiltonian, cap: usize) -> Result<Self, EvolveError> {
        let diagonal =
            dh.potential_diagonal(cap).map_err(|_| EvolveError::CapExceeded { dimension: dh.dimension(), cap })?;
        let points = dh.grid().points();
        let hop = -0.5 * dh.grid().spacing().powi(-2);
        Ok(SplitOperator {
            basis: Basis::Grid { variables: dh.n(), points },
            kinetic: Kinetic::Grid { variables: dh.n(), points, hop },
            diagonal,
            kinetic_bound: 2.0 * hop.abs() * dh.n() as f64,
        })
    }

    /// Embedded backend: the qubit Hamiltonian on all `2^q` bitstrings.
    pub fn embedded(ir: &HamiltonianIR, cap: usize) -> Result<Self, EvolveError> {
        let q = ir.qubits();
        let dimension = 1u128.checked_shl(q as u32).unwrap_or(u128::MAX);
        if q >= usize::BITS as usize - 1 || dimension > cap as u128 {
            return Err(EvolveError::CapExceeded { dimension, cap });
        }
        let dim = 1usize << q;
        let bit = |site: usize| 1usize << (q - 1 - site);
        let compile = |coeff: f64, factors: &[(usize, PauliOp)]| {
            let mut t = CompiledTerm { coeff, flip: 0, y_mask: 0, y_phase: Complex64::new(1.0, 0.0), num_mask: 0 };
            for &(site, op) in factors {
                match op {
                    PauliOp::X => t.flip |= bit(site),
                    PauliOp::Y => {
                        t.flip |= bit(site);
                        t.y_mask |= bit(site);
                        t.y_phase *= Complex64::new(0.0, 1.0);
                    }
                    PauliOp::Num => t.num_mask |= bit(site),
                }
            }
            t
        };
        let kinetic: Vec<CompiledTerm> = ir.kinetic().iter().map(|t| compile(-0.5 * t.coeff, &t.factors)).collect();
        let kinetic_bound = kinetic.iter().map(|t| t.coeff.abs()).sum();
        let potential: Vec<CompiledTerm> = ir.potential().iter().map(|t| compile(t.coeff, &t.factors)).collect();
        let offset = ir.offset();
        let diag_at =
            |b: usize| offset + potential.iter().filter(|t| b & t.num_mask == t.num_mask).map(|t| t.coeff).sum::<f64>();
        let diagonal: Vec<f64> = if dim >= PAR_THRESHOLD {
            (0..dim).into_par_iter().map(diag_at).collect()
        } else {
            (0..dim).map(diag_at).collect()
        };
        Ok(SplitOperator {
            basis: Basis::Qubits { count: q },
            kinetic: Kinetic::Pauli(kinetic),
            diagonal,
            kinetic_bound,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    /// Potential group diagonal (objective values per basis state).
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Upper bound on the spectral radius of the kinetic group.
    pub fn kinetic_bound(&self) -> f64 {
        self.kinetic_bound
    }

    /// `out = (a K + b D) x`.
    pub fn apply(&self, a: f64, b: f64, x: &[Complex64], out: &mut [Complex64]) {
        let d = &self.diagonal;
        match &self.kinetic {
            Kinetic::Grid { variables, points, hop } => {
                let (nv, np) = (*variables, *points);
                let w = a * hop;
                fill(out, |j| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut stride = 1;
                    let mut rest = j;
                    for _ in 0..nv {
                        let k = rest % np;
                        rest /= np;
                        if k > 0 {
                            acc += x[j - stride];
                        }
                        if k + 1 < np {
                            acc += x[j + stride];
                        }
                        stride *= np;
                    }
                    w * acc + b * d[j] * x[j]
                });
            }
            Kinetic::Pauli(terms) => {
                fill(out, |j| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for t in terms {
                        acc += t.gather(j, x);
                    }
                    a * acc + b * d[j] * x[j]
                });
            }
        }
    }

    /// Dense matrix of `a K + b D`; for tests and small problems.
    pub fn to_dense(&self, a: f64, b: f64) -> Vec<Vec<Complex64>> {
        let dim = self.dimension();
        let mut cols = Vec::with_capacity(dim);
        let mut e = vec![Complex64::new(0.0, 0.0); dim];
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for c in 0..dim {
            e[c] = Complex64::new(1.0, 0.0);
            self.apply(a, b, &e, &mut out);
            cols.push(out.clone());
            e[c] = Complex64::new(0.0, 0.0);
        }
        (0..dim).map(|r| (0..dim).map(|c| cols[c][r]).collect()).collect()
    }

    /// `x <- exp(-i tau D) x`, exactly.
    fn apply_diagonal_phase(&self, tau: f64, x: &mut [Complex64]) {
        for (v, d) in x.iter_mut().zip(&self.diagonal) {
            *v *= Complex64::from_polar(1.0, -tau * d);
        }
    }

    fn spectral_interval(&self, a: f64, b: f64) -> (f64, f64) {
        let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &self.diagonal {
            dmin = dmin.min(b * v);
            dmax = dmax.max(b * v);
        }
        let k = a.abs() * self.kinetic_bound;
        (dmin - k, dmax + k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub steps: usize,
    pub seed: u64,
    pub shots: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { steps: DEFAULT_STEPS, seed: 0, shots: 1000 }
    }
}

const SQRT3: f64 = 1.732_050_807_568_877_2;
const NODE_1: f64 = 0.5 - SQRT3 / 6.0;
const NODE_2: f64 = 0.5 + SQRT3 / 6.0;
const WEIGHT_SMALL: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const WEIGHT_LARGE: f64 = (3.0 + 2.0 * SQRT3) / 12.0;

/// Evolve `psi` in place over the whole schedule with `steps` steps.
pub fn propagate(
    op: &SplitOperator,
    schedule: &Schedule,
    steps: usize,
    psi: &mut StateVector,
) -> Result<(), EvolveError> {
    if steps == 0 {
        return Err(EvolveError::ZeroSteps);
    }
    schedule.validate()?;
    assert_eq!(psi.len(), op.dimension(), "state and operator dimensions differ");
    let dt = schedule.total_time() / steps as f64;
    let mut ws = chebyshev::Workspace::new(op.dimension());
    for s in 0..steps {
        let t = s as f64 * dt;
        let c1 = schedule.coefficients(t + NODE_1 * dt);
        let c2 = schedule.coefficients(t + NODE_2 * dt);
        for (w1, w2) in [(WEIGHT_LARGE, WEIGHT_SMALL), (WEIGHT_SMALL, WEIGHT_LARGE)] {
            let a = w1 * c1.kinetic + w2 * c2.kinetic;
            let b = w1 * c1.potential + w2 * c2.potential;
            if a == 0.0 || op.kinetic_bound == 0.0 {
                op.apply_diagonal_phase(b * dt, &mut psi.amplitudes);
                continue;
            }
            let (lo, hi) = op.spectral_interval(a, b);
            chebyshev::expm_apply(|x, out| op.apply(a, b, x, out), lo, hi, dt, &mut psi.amplitudes, &mut ws);
        }
    }
    let drift = (psi.norm() - 1.0).abs();
    if drift > NORM_DRIFT_LIMIT {
        return Err(EvolveError::NormDrift { drift, steps });
    }
    Ok(())
}

/// Evolve the uniform superposition under `schedule`.
pub fn evolve(op: &SplitOperator, schedule: &Schedule, cfg: &EvolveConfig) -> Result<StateVector, EvolveError> {
    let mut psi = StateVector::uniform(op.basis());
    propagate(op, schedule, cfg.steps, &mut psi)?;
    Ok(psi)
}

/// `shots` independent draws from `|psi|^2`.
pub fn sample(psi: &StateVector, shots: usize, seed: u64) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(psi.len());
    let mut total = 0.0;
    for a in psi.amplitudes() {
        total += a.norm_sqr();
        cumulative.push(total);
    }
    let last = psi.len().saturating_sub(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..shots)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            cumulative.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub steps: usize,
    pub doubled_steps: usize,
    pub tv_distance: f64,
    pub passed: bool,
}

/// Rerun with twice the steps and compare outcome distributions.
pub fn convergence_check(
    op: &SplitOperator,
    schedule: &Schedule,
    cfg: &EvolveConfig,
) -> Result<ConvergenceReport, EvolveError> {
    let coarse = evolve(op, schedule, cfg)?;
    let fine = evolve(op, schedule, &EvolveConfig { steps: 2 * cfg.steps, ..*cfg })?;
    let tv_distance = total_variation(&coarse.probabilities(), &fine.probabilities());
    Ok(ConvergenceReport {
        steps: cfg.steps,
        doubled_steps: 2 * cfg.steps,
        tv_distance,
        passed: tv_distance <= CONVERGENCE_TV_LIMIT,
    })
}
