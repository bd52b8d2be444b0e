//! Instances, the end-to-end pipeline, metrics and report emission.

mod instances;
mod metrics;
mod pipeline;
mod suite;

#[cfg(test)]
mod tests;

use thiserror::Error;

pub use instances::{
    builtin, builtin_ids, builtins, example_qp, exp_objective, generate_exp_instance, generate_exp_instance_with,
    generate_qp_instance, multi_start_minimum, random_coefficients, InstanceSource, InstanceSpec, KnownOptimum,
    Provenance, ORACLE_STARTS, ORACLE_TOL,
};
pub use metrics::{median, success_probability, tts, Seconds, DEFAULT_SUCCESS_TOL, TTS_TARGET};
pub use pipeline::{
    run_baseline, run_instance, warmstart_comparison, Backend, BaselineConfig, BestSolution, CanonicalReport,
    Distribution, PipelineConfig, RunConfig, RunReport, SampleRecord, Timing, WarmstartReport, DEFAULT_BASELINE_STARTS,
    T0_LABEL,
};
pub use suite::{run_suite, Suite, SuiteEntry, SuiteSummary, NON_REPRODUCTION_NOTE};

use crate::discretize::DiscretizeError;
use crate::embedding::EmbeddingError;
use crate::evolve::EvolveError;
use crate::problem::ProblemError;
use crate::refine::RefineError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no samples: shots must be positive")]
    NoSamples,
    #[error("instance has no reference objective value")]
    MissingOptimum,
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// True when the instance is too large for the chosen backend.
    pub fn is_cap_exceeded(&self) -> bool {
        matches!(
            self,
            BenchError::Discretize(DiscretizeError::CapExceeded { .. })
                | BenchError::Evolve(EvolveError::CapExceeded { .. })
                | BenchError::Embedding(EmbeddingError::CapExceeded { .. })
        )
    }
}
