//! Finite-difference discretization of the QHD Hamiltonian on a uniform grid.
//!
//! Each unit-interval coordinate is sampled at `N` nodes `k h`, `h = 1/(N-1)`,
//! endpoints included. The kinetic block is the off-diagonal part `L'` of the
//! centered second-difference matrix (the constant `-2/h^2` diagonal is a
//! global phase and is dropped). Potential blocks are diagonal.
//!
//! Basis states are ordered by grid multi-index with variable 0 most
//! significant: `index = sum_i k_i N^(n-1-i)`.

use std::io::{self, Read, Write};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::evolve::Coefficients;
use crate::expr::{EvalError, Expr};
use crate::problem::Problem;

/// Largest dimension [`DiscretizedHamiltonian::materialize`] builds by default.
pub const DEFAULT_DENSE_CAP: usize = 1 << 12;
/// Largest grid state space the direct backend handles by default.
pub const DEFAULT_DIRECT_CAP: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum DiscretizeError {
    #[error("grid needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("problem must be normalized to the unit box first")]
    NotNormalized,
    #[error("dimension {} exceeds the cap {cap}", describe_dimension(*dimension))]
    CapExceeded { dimension: u128, cap: usize },
    #[error("potential term could not be evaluated on the grid: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    points: usize,
}

impl Grid {
    pub fn new(points: usize) -> Result<Self, DiscretizeError> {
        if points < 3 {
            return Err(DiscretizeError::TooFewPoints(points));
        }
        Ok(Grid { points })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.points - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.node(k)).collect()
    }
}

/// `L'`: `1/h^2` on the first off-diagonals, zero elsewhere.
pub fn kinetic_offdiag(grid: Grid) -> DMatrix<f64> {
    let n = grid.points();
    let w = grid.spacing().powi(-2);
    DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { w } else { 0.0 })
}

/// Diagonal of `D(g)`: `g` sampled at the grid nodes.
pub fn potential_diag(g: &Expr, grid: Grid) -> Result<Vec<f64>, EvalError> {
    grid.nodes().into_iter().map(|x| g.eval_univariate(x)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairBlock {
    pub k: usize,
    pub l: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// `H(t) = e^phi (-1/2) sum_i L'_i + e^chi F`, with `F` a sum of diagonal
/// tensor terms.
#[derive(Debug, Clone)]
pub struct DiscretizedHamiltonian {
    n: usize,
    grid: Grid,
    constant: f64,
    univariate: Vec<(usize, Vec<f64>)>,
    bivariate: Vec<PairBlock>,
}

/// Saturated dimensions (`u128::MAX`) render as a lower bound.
pub(crate) fn describe_dimension(dimension: u128) -> String {
    if dimension == u128::MAX {
        "of at least 2^128".to_string()
    } else {
        dimension.to_string()
    }
}

fn checked_dimension(points: usize, n: usize) -> u128 {
    (points as u128).checked_pow(n as u32).unwrap_or(u128::MAX)
}

impl DiscretizedHamiltonian {
    pub fn assemble(problem: &Problem, points: usize) -> Result<Self, DiscretizeError> {
        if !problem.is_normalized() {
            return Err(DiscretizeError::NotNormalized);
        }
        let grid = Grid::new(points)?;
        let obj = problem.objective();
        let univariate = obj
            .univariate()
            .iter()
            .map(|(i, g)| Ok((*i, potential_diag(g, grid)?)))
            .collect::<Result<Vec<_>, EvalError>>()?;
        let bivariate = obj
            .bivariate()
            .iter()
            .map(|t| Ok(PairBlock { k: t.k, l: t.l, p: potential_diag(&t.p, grid)?, q: potential_diag(&t.q, grid)? }))
            .collect::<Result<Vec<_>, EvalError>>()?;
        Ok(DiscretizedHamiltonian { n: problem.n(), grid, constant: obj.constant(), univariate, bivariate })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `D(g_i)` diagonals, one per variable with a univariate term.
    pub fn univariate(&self) -> &[(usize, Vec<f64>)] {
        &self.univariate
    }

    pub fn bivariate(&self) -> &[PairBlock] {
        &self.bivariate
    }

    pub fn kinetic_term_count(&self) -> usize {
        self.n
    }

    /// `N^n`, saturating.
    pub fn dimension(&self) -> u128 {
        checked_dimension(self.grid.points(), self.n)
    }

    pub fn check_cap(&self, cap: usize) -> Result<usize, DiscretizeError> {
        let dimension = self.dimension();
        if dimension > cap as u128 {
            return Err(DiscretizeError::CapExceeded { dimension, cap });
        }
        Ok(dimension as usize)
    }

    /// Stride of variable `i` in the flattened basis.
    pub fn stride(&self, i: usize) -> usize {
        self.grid.points().pow((self.n - 1 - i) as u32)
    }

    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let n_pts = self.grid.points();
        let mut out = vec![0; self.n];
        for slot in out.iter_mut().rev() {
            *slot = index % n_pts;
            index /= n_pts;
        }
        out
    }

    /// Unit-box point of a basis state.
    pub fn point(&self, index: usize) -> Vec<f64> {
        self.multi_index(index).into_iter().map(|k| self.grid.node(k)).collect()
    }

    /// Diagonal of `F` over the full grid: the objective at every node.
    pub fn potential_diagonal(&self, cap: usize) -> Result<Vec<f64>, DiscretizeError> {
        let dim = self.check_cap(cap)?;
        let n_pts = self.grid.points();
        let mut diag = vec![self.constant; dim];
        for (i, d) in &self.univariate {
            let stride = self.stride(*i);
            for (idx, v) in diag.iter_mut().enumerate() {
                *v += d[(idx / stride) % n_pts];
            }
        }
        for b in &self.bivariate {
            let (sk, sl) = (self.stride(b.k), self.stride(b.l));
            for (idx, v) in diag.iter_mut().enumerate() {
                *v += b.p[(idx / sk) % n_pts] * b.q[(idx / sl) % n_pts];
            }
        }
        Ok(diag)
    }

    /// Dense `e^phi (-1/2) L'_d + e^chi F_d`.
    pub fn materialize(&self, coeffs: Coefficients, cap: usize) -> Result<DMatrix<f64>, DiscretizeError> {
        let diag = self.potential_diagonal(cap)?;
        let dim = diag.len();
        let n_pts = self.grid.points();
        let hop = -0.5 * coeffs.kinetic * self.grid.spacing().powi(-2);
        let mut m = DMatrix::zeros(dim, dim);
        for (idx, d) in diag.iter().enumerate() {
            m[(idx, idx)] = coeffs.potential * d;
            for i in 0..self.n {
                let stride = self.stride(i);
                if (idx / stride) % n_pts + 1 < n_pts {
                    m[(idx, idx + stride)] = hop;
                    m[(idx + stride, idx)] = hop;
                }
            }
        }
        Ok(m)
    }
}

/// Write a square matrix as a little-endian `u64` dimension followed by the
/// entries as row-major `f64`.
pub fn write_dense_matrix<W: Write>(m: &DMatrix<f64>, mut w: W) -> io::Result<()> {
    assert_eq!(m.nrows(), m.ncols(), "only square matrices are exported");
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dense_matrix<R: Read>(mut r: R) -> io::Result<DMatrix<f64>> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let dim = u64::from_le_bytes(buf) as usize;
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            r.read_exact(&mut buf)?;
            m[(i, j)] = f64::from_le_bytes(buf);
        }
    }
    Ok(m)
}
