//! Quantum Hamiltonian Descent on a classical machine.
//!
//! The pipeline runs: a separable objective ([`expr`], [`problem`]) is
//! discretized on a uniform grid ([`discretize`]), optionally compiled into a
//! qubit Hamiltonian ([`embedding`]), evolved under a time-dependent
//! Schrödinger equation and sampled ([`evolve`]), decoded, and polished by a
//! box-constrained local solver ([`refine`]). [`bench`] wires the stages
//! together and computes success probability and time-to-solution.

pub mod bench;
pub mod discretize;
pub mod embedding;
pub mod evolve;
pub mod expr;
pub mod problem;
pub mod refine;

pub use expr::{parse, Expr, SeparableObjective};
pub use problem::{BoxBounds, Problem, QpData};
