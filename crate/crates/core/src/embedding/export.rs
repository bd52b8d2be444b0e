//! Two-local annealer export.
//!
//! The document describes
//! `H(t) = kinetic(t) sum_k driver_k X_k
//!       + potential(t) (sum_k linear_k n_k + sum_kl quadratic_kl n_k n_l + offset)`
//! where `kinetic(t) = e^phi` and `potential(t) = e^chi` are tabulated in
//! `schedule` over `[0, total_time]`, mapped linearly onto `anneal_time_us`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, HamiltonianIR, PauliOp, Scheme};
use crate::evolve::Schedule;

pub const DEFAULT_ANNEAL_TIME_US: f64 = 20.0;
/// Samples taken from a smooth schedule.
const SCHEDULE_SAMPLES: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSample {
    pub t: f64,
    pub kinetic: f64,
    pub potential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealerExport {
    pub num_qubits: usize,
    pub scheme: Scheme,
    pub linear: BTreeMap<usize, f64>,
    /// Keys are `"k,l"` with `k < l`.
    pub quadratic: BTreeMap<String, f64>,
    pub driver: BTreeMap<usize, f64>,
    pub offset: f64,
    pub total_time: f64,
    pub schedule: Vec<ScheduleSample>,
    pub anneal_time_us: f64,
}

pub fn export_annealer(
    ir: &HamiltonianIR,
    schedule: &Schedule,
    anneal_time_us: f64,
) -> Result<AnnealerExport, EmbeddingError> {
    if ir.scheme() == Scheme::OneHot {
        return Err(EmbeddingError::OneHotNotAnnealable);
    }
    let mut driver = BTreeMap::new();
    for t in ir.kinetic() {
        match t.factors.as_slice() {
            [(site, PauliOp::X)] => *driver.entry(*site).or_insert(0.0) += -0.5 * t.coeff,
            _ => return Err(EmbeddingError::NotAnnealable(format!("kinetic term {t} is not a single X"))),
        }
    }
    let mut linear = BTreeMap::new();
    let mut quadratic = BTreeMap::new();
    for t in ir.potential() {
        match t.factors.as_slice() {
            [(k, PauliOp::Num)] => *linear.entry(*k).or_insert(0.0) += t.coeff,
            [(k, PauliOp::Num), (l, PauliOp::Num)] => {
                *quadratic.entry(format!("{k},{l}")).or_insert(0.0) += t.coeff;
            }
            _ => return Err(EmbeddingError::NotAnnealable(format!("potential term {t} is not two-local"))),
        }
    }
    let schedule_samples = schedule
        .to_breakpoints(SCHEDULE_SAMPLES)
        .into_iter()
        .map(|b| ScheduleSample { t: b.t, kinetic: b.phi.exp(), potential: b.chi.exp() })
        .collect();
    Ok(AnnealerExport {
        num_qubits: ir.qubits(),
        scheme: ir.scheme(),
        linear,
        quadratic,
        driver,
        offset: ir.offset(),
        total_time: schedule.total_time(),
        schedule: schedule_samples,
        anneal_time_us,
    })
}
