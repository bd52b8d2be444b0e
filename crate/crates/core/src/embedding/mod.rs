//! Hamiltonian embedding: compile a discretized Hamiltonian into a qubit
//! Hamiltonian built from `X`, `Y` and number operators `n = |1><1|`.
//!
//! Each variable owns a register of `r` qubits; variable `i` sits on sites
//! `i r .. (i + 1) r - 1`. Site 0 is the leftmost character of a bitstring and
//! the most significant bit of a basis index.
//!
//! | scheme  | r     | kinetic block                              | potential block                          |
//! |---------|-------|--------------------------------------------|------------------------------------------|
//! | unary   | N - 1 | `sum_k X_k / h^2`                          | `sum_k (g_{r-k} - g_{r-k-1}) n_k + g_0`   |
//! | one-hot | N     | `sum_k (X_k X_{k+1} + Y_k Y_{k+1}) / 2h^2` | `sum_k g_{r-1-k} n_k`                     |
//! | Hamming | N - 1 | `sum_k X_k / h^2`                          | `alpha E2 + beta E1 (+ g_0)`              |
//!
//! with `E1 = (1/r) sum_k n_k` and `E2 = E1^2`, collapsed using `n_k^2 = n_k`.

mod codeword;
mod export;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codeword::{decode, parse_bits, render_bits, CodewordMap, DecodePolicy};
pub use export::{export_annealer, AnnealerExport, ScheduleSample, DEFAULT_ANNEAL_TIME_US};

use crate::discretize::DiscretizedHamiltonian;
use crate::evolve::Coefficients;

/// Largest codeword-subspace dimension [`restrict_to_codewords`] builds by default.
pub const DEFAULT_RESTRICTION_CAP: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("Hamming potential needs a quadratic profile; {0} is not")]
    HammingUnsupported(String),
    #[error("{scheme} needs at least {min} grid points, got {points}")]
    TooFewPoints { scheme: Scheme, points: usize, min: usize },
    #[error("bitstring length {got} is not a multiple of the register size {register}")]
    LengthMismatch { got: usize, register: usize },
    #[error("invalid bit character {0:?}")]
    InvalidBit(char),
    #[error("codeword restriction is defined for unary and one-hot only")]
    NoCodewordSubspace,
    #[error("dimension {} exceeds the cap {cap}", crate::discretize::describe_dimension(*dimension))]
    CapExceeded { dimension: u128, cap: usize },
    #[error("one-hot embeddings use XX + YY hopping and cannot be exported to an annealer")]
    OneHotNotAnnealable,
    #[error("not annealer-compatible: {0}")]
    NotAnnealable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliOp {
    X,
    Y,
    /// Number operator `(I - Z)/2`.
    #[serde(rename = "N")]
    Num,
}

/// `coeff * prod op_site`, sites strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    #[serde(rename = "ops")]
    pub factors: Vec<(usize, PauliOp)>,
}

impl PauliTerm {
    /// Panics if a site repeats.
    pub fn new(coeff: f64, mut factors: Vec<(usize, PauliOp)>) -> Self {
        factors.sort_by_key(|f| f.0);
        assert!(factors.windows(2).all(|w| w[0].0 < w[1].0), "repeated site in a Pauli term");
        PauliTerm { coeff, factors }
    }

    fn shifted(&self, by: usize) -> PauliTerm {
        PauliTerm { coeff: self.coeff, factors: self.factors.iter().map(|&(s, o)| (s + by, o)).collect() }
    }

    pub fn is_diagonal(&self) -> bool {
        self.factors.iter().all(|f| f.1 == PauliOp::Num)
    }

    /// Image of the basis state `bits` (site 0 most significant of `qubits`)
    /// with its amplitude, or `None` if a number operator annihilates it.
    pub fn act(&self, bits: u64, qubits: usize) -> Option<(u64, Complex64)> {
        let mut out = bits;
        let mut amp = Complex64::new(self.coeff, 0.0);
        for &(site, op) in &self.factors {
            let mask = 1u64 << (qubits - 1 - site);
            let set = bits & mask != 0;
            match op {
                PauliOp::X => out ^= mask,
                PauliOp::Y => {
                    amp *= if set { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) };
                    out ^= mask;
                }
                PauliOp::Num if !set => return None,
                PauliOp::Num => {}
            }
        }
        Some((out, amp))
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coeff)?;
        for (site, op) in &self.factors {
            let c = match op {
                PauliOp::X => "X",
                PauliOp::Y => "Y",
                PauliOp::Num => "n",
            };
            write!(f, " {c}{site}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "unary")]
    Unary,
    #[serde(rename = "onehot")]
    OneHot,
    #[serde(rename = "hamming")]
    Hamming,
}

impl Scheme {
    /// Qubits per variable for a grid of `points` nodes.
    pub fn resolution(self, points: usize) -> usize {
        match self {
            Scheme::Unary | Scheme::Hamming => points - 1,
            Scheme::OneHot => points,
        }
    }

    /// Grid nodes represented by `r` qubits.
    pub fn points(self, r: usize) -> usize {
        match self {
            Scheme::Unary | Scheme::Hamming => r + 1,
            Scheme::OneHot => r,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Unary => "unary",
            Scheme::OneHot => "onehot",
            Scheme::Hamming => "hamming",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unary" => Ok(Scheme::Unary),
            "onehot" | "one-hot" | "one_hot" => Ok(Scheme::OneHot),
            "hamming" => Ok(Scheme::Hamming),
            other => Err(format!("unknown embedding scheme {other:?}")),
        }
    }
}

/// Terms on a single register (sites `0..r`) plus a scalar offset.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEmbedding {
    pub terms: Vec<PauliTerm>,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum BlockKind<'a> {
    /// `L'` for the register's grid.
    Kinetic,
    /// `D(g)` given the samples `g_k = g(k h)`.
    Potential(&'a [f64]),
}

/// `(alpha, beta, c)` with `g_k = alpha x_k^2 + beta x_k + c` on `x_k = k/r`,
/// if the samples lie on a parabola.
fn quadratic_profile(g: &[f64]) -> Option<(f64, f64, f64)> {
    let r = (g.len() - 1) as f64;
    let c = g[0];
    let (x1, x2) = (1.0 / r, 2.0 / r);
    let (y1, y2) = (g[1] - c, g[2] - c);
    let alpha = (y2 / x2 - y1 / x1) / (x2 - x1);
    let beta = y1 / x1 - alpha * x1;
    let scale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fits = g.iter().enumerate().all(|(k, v)| {
        let x = k as f64 / r;
        (alpha * x * x + beta * x + c - v).abs() <= 1e-9 * scale
    });
    fits.then_some((alpha, beta, c))
}

pub fn embed_block(scheme: Scheme, kind: BlockKind<'_>, points: usize) -> Result<BlockEmbedding, EmbeddingError> {
    if points < 3 {
        return Err(EmbeddingError::TooFewPoints { scheme, points, min: 3 });
    }
    let r = scheme.resolution(points);
    let inv_h2 = ((points - 1) as f64).powi(2);
    let single = |coeff: f64, site: usize, op: PauliOp| PauliTerm::new(coeff, vec![(site, op)]);
    let mut terms = Vec::new();
    let mut offset = 0.0;
    match (scheme, kind) {
        (Scheme::Unary | Scheme::Hamming, BlockKind::Kinetic) => {
            terms.extend((0..r).map(|k| single(inv_h2, k, PauliOp::X)));
        }
        (Scheme::OneHot, BlockKind::Kinetic) => {
            for k in 0..r - 1 {
                for op in [PauliOp::X, PauliOp::Y] {
                    terms.push(PauliTerm::new(0.5 * inv_h2, vec![(k, op), (k + 1, op)]));
                }
            }
        }
        (Scheme::Unary, BlockKind::Potential(g)) => {
            assert_eq!(g.len(), points, "sample count must match the grid");
            for k in 0..r {
                terms.push(single(g[r - k] - g[r - k - 1], k, PauliOp::Num));
            }
            offset = g[0];
        }
        (Scheme::OneHot, BlockKind::Potential(g)) => {
            assert_eq!(g.len(), points, "sample count must match the grid");
            for k in 0..r {
                terms.push(single(g[r - 1 - k], k, PauliOp::Num));
            }
        }
        (Scheme::Hamming, BlockKind::Potential(g)) => {
            assert_eq!(g.len(), points, "sample count must match the grid");
            let (alpha, beta, c) =
                quadratic_profile(g).ok_or_else(|| EmbeddingError::HammingUnsupported("the sampled profile".into()))?;
            let rf = r as f64;
            let linear = alpha / (rf * rf) + beta / rf;
            let pair = 2.0 * alpha / (rf * rf);
            for k in 0..r {
                terms.push(single(linear, k, PauliOp::Num));
            }
            for k in 0..r {
                for l in k + 1..r {
                    terms.push(PauliTerm::new(pair, vec![(k, PauliOp::Num), (l, PauliOp::Num)]));
                }
            }
            offset = c;
        }
    }
    terms.retain(|t| t.coeff != 0.0);
    Ok(BlockEmbedding { terms, offset })
}

/// Schedule-tagged qubit Hamiltonian
/// `H(t) = e^phi (-1/2) kinetic + e^chi (potential + offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianIR {
    qubits: usize,
    scheme: Scheme,
    registers: usize,
    points: usize,
    kinetic: Vec<PauliTerm>,
    potential: Vec<PauliTerm>,
    offset: f64,
}

/// Accumulates diagonal terms, merging equal operator strings.
#[derive(Default)]
struct TermSum {
    terms: BTreeMap<Vec<(usize, PauliOp)>, f64>,
    offset: f64,
}

impl TermSum {
    fn add(&mut self, t: PauliTerm) {
        *self.terms.entry(t.factors).or_insert(0.0) += t.coeff;
    }

    fn finish(self) -> (Vec<PauliTerm>, f64) {
        let terms = self
            .terms
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(factors, coeff)| PauliTerm { coeff, factors })
            .collect();
        (terms, self.offset)
    }
}

fn register_context(what: &str, i: usize, err: EmbeddingError) -> EmbeddingError {
    match err {
        EmbeddingError::HammingUnsupported(_) => EmbeddingError::HammingUnsupported(format!("{what} of x{i}")),
        e => e,
    }
}

pub fn assemble_embedding(dh: &DiscretizedHamiltonian, scheme: Scheme) -> Result<HamiltonianIR, EmbeddingError> {
    let points = dh.grid().points();
    let r = scheme.resolution(points);
    let n = dh.n();
    let kinetic_block = embed_block(scheme, BlockKind::Kinetic, points)?;
    let kinetic = (0..n).flat_map(|i| kinetic_block.terms.iter().map(move |t| t.shifted(i * r))).collect();

    let mut sum = TermSum { offset: dh.constant(), ..TermSum::default() };
    for (i, g) in dh.univariate() {
        let b = embed_block(scheme, BlockKind::Potential(g), points)
            .map_err(|e| register_context("univariate term", *i, e))?;
        b.terms.iter().for_each(|t| sum.add(t.shifted(i * r)));
        sum.offset += b.offset;
    }
    for pb in dh.bivariate() {
        let p = embed_block(scheme, BlockKind::Potential(&pb.p), points)
            .map_err(|e| register_context("bivariate factor", pb.k, e))?;
        let q = embed_block(scheme, BlockKind::Potential(&pb.q), points)
            .map_err(|e| register_context("bivariate factor", pb.l, e))?;
        let (pk, ql): (Vec<_>, Vec<_>) = (
            p.terms.iter().map(|t| t.shifted(pb.k * r)).collect(),
            q.terms.iter().map(|t| t.shifted(pb.l * r)).collect(),
        );
        for a in &pk {
            for b in &ql {
                let mut factors = a.factors.clone();
                factors.extend_from_slice(&b.factors);
                sum.add(PauliTerm::new(a.coeff * b.coeff, factors));
            }
            sum.add(PauliTerm { coeff: a.coeff * q.offset, factors: a.factors.clone() });
        }
        for b in &ql {
            sum.add(PauliTerm { coeff: p.offset * b.coeff, factors: b.factors.clone() });
        }
        sum.offset += p.offset * q.offset;
    }
    let (potential, offset) = sum.finish();
    Ok(HamiltonianIR { qubits: n * r, scheme, registers: n, points, kinetic, potential, offset })
}

impl HamiltonianIR {
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn registers(&self) -> usize {
        self.registers
    }

    /// Grid nodes per variable.
    pub fn points(&self) -> usize {
        self.points
    }

    /// Qubits per register.
    pub fn resolution(&self) -> usize {
        self.scheme.resolution(self.points)
    }

    pub fn kinetic(&self) -> &[PauliTerm] {
        &self.kinetic
    }

    pub fn potential(&self) -> &[PauliTerm] {
        &self.potential
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn codeword_map(&self) -> CodewordMap {
        CodewordMap::new(self.scheme, self.points)
    }

    /// Potential-group value (including the offset) of a basis bitstring.
    pub fn potential_at(&self, bits: u64) -> f64 {
        self.offset + self.potential.iter().filter_map(|t| t.act(bits, self.qubits)).map(|(_, a)| a.re).sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("IR serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The IR restricted to the codeword subspace, in grid multi-index order,
/// weighted as `e^phi (-1/2) kinetic + e^chi (potential + offset)`.
pub fn restrict_to_codewords(
    ir: &HamiltonianIR,
    coeffs: Coefficients,
    cap: usize,
) -> Result<DMatrix<f64>, EmbeddingError> {
    if ir.scheme == Scheme::Hamming {
        return Err(EmbeddingError::NoCodewordSubspace);
    }
    let map = ir.codeword_map();
    let points = ir.points;
    let n = ir.registers;
    let dimension = (points as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dimension > cap as u128 || ir.qubits > 64 {
        return Err(EmbeddingError::CapExceeded { dimension, cap });
    }
    let dim = dimension as usize;
    let r = ir.resolution();
    let register_words: Vec<u64> =
        (0..points).map(|j| map.encode(j).iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)).collect();
    let word_of = |index: usize| {
        let mut rest = index;
        let mut word = 0u64;
        for i in (0..n).rev() {
            word |= register_words[rest % points] << ((n - 1 - i) * r);
            rest /= points;
        }
        word
    };
    let words: Vec<u64> = (0..dim).map(word_of).collect();
    let position: HashMap<u64, usize> = words.iter().enumerate().map(|(i, w)| (*w, i)).collect();

    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    let groups = [(&ir.kinetic, -0.5 * coeffs.kinetic), (&ir.potential, coeffs.potential)];
    for (col, &w) in words.iter().enumerate() {
        m[(col, col)] += Complex64::new(coeffs.potential * ir.offset, 0.0);
        for (terms, weight) in groups {
            for t in terms.iter() {
                if let Some((img, amp)) = t.act(w, ir.qubits) {
                    if let Some(&row) = position.get(&img) {
                        m[(row, col)] += amp * weight;
                    }
                }
            }
        }
    }
    debug_assert!(m.iter().all(|z| z.im.abs() < 1e-9 * (1.0 + z.re.abs())));
    Ok(m.map(|z| z.re))
}
