//! End-to-end runs: discretize, evolve, sample, decode, refine, score.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instances::{InstanceSource, InstanceSpec, KnownOptimum};
use super::metrics::{median, success_probability, tts, Seconds, DEFAULT_SUCCESS_TOL};
use super::BenchError;
use crate::discretize::DiscretizedHamiltonian;
use crate::embedding::{assemble_embedding, CodewordMap, DecodePolicy, Scheme};
use crate::evolve::{
    evolve, sample, EvolveConfig, Schedule, SplitOperator, DEFAULT_DIRECT_CAP, DEFAULT_EMBEDDED_CAP, DEFAULT_STEPS,
};
use crate::problem::Problem;
use crate::refine::{refine, RefineConfig, RefinementResult};

pub const DEFAULT_BASELINE_STARTS: usize = 1000;
/// Label attached to per-shot times measured on the simulator.
pub const T0_LABEL: &str = "simulated t0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Evolve on the `N^n` grid directly.
    Direct,
    /// Evolve the qubit Hamiltonian of an embedding scheme.
    Embedded,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Backend::Direct),
            "embedded" => Ok(Backend::Embedded),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub backend: Backend,
    pub scheme: Scheme,
    /// Grid points per variable for the direct backend.
    pub grid_points: usize,
    /// Qubits per variable for the embedded backend.
    pub resolution: usize,
    pub schedule: Schedule,
    pub steps: usize,
    pub shots: usize,
    pub seed: u64,
    pub refine: RefineConfig,
    /// `None` picks the scheme default.
    pub policy: Option<DecodePolicy>,
    pub success_tol: f64,
    pub direct_cap: usize,
    pub embedded_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            backend: Backend::Direct,
            scheme: Scheme::Unary,
            grid_points: 17,
            resolution: 5,
            schedule: Schedule::default(),
            steps: DEFAULT_STEPS,
            shots: 1000,
            seed: 0,
            refine: RefineConfig::default(),
            policy: None,
            success_tol: DEFAULT_SUCCESS_TOL,
            direct_cap: DEFAULT_DIRECT_CAP,
            embedded_cap: DEFAULT_EMBEDDED_CAP,
        }
    }
}

impl PipelineConfig {
    /// Grid points per variable actually used.
    pub fn points(&self) -> usize {
        match self.backend {
            Backend::Direct => self.grid_points,
            Backend::Embedded => self.scheme.points(self.resolution),
        }
    }

    pub fn effective_policy(&self) -> DecodePolicy {
        self.policy.unwrap_or_else(|| DecodePolicy::default_for(self.scheme))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub starts: usize,
    pub seed: u64,
    pub refine: RefineConfig,
    pub success_tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            starts: DEFAULT_BASELINE_STARTS,
            seed: 0,
            refine: RefineConfig::default(),
            success_tol: DEFAULT_SUCCESS_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RunConfig {
    Pipeline(PipelineConfig),
    Baseline(BaselineConfig),
}

/// One shot (or one random start for baselines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Measured bitstring, grid multi-index, or `"uniform"` for random starts.
    pub outcome: String,
    /// Decoded point in original coordinates; `None` when rejected.
    pub decoded: Option<Vec<f64>>,
    pub decoded_objective: Option<f64>,
    pub refined: Option<Vec<f64>>,
    pub refined_objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSolution {
    pub sample: usize,
    pub x: Vec<f64>,
    pub f: f64,
}

/// Everything that is a deterministic function of the inputs and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalReport {
    pub instance: String,
    pub source: InstanceSource,
    pub variables: usize,
    pub f_star: Option<KnownOptimum>,
    pub config: RunConfig,
    /// Hilbert-space dimension; absent for baselines.
    pub state_dimension: Option<usize>,
    pub norm_drift: Option<f64>,
    pub rejection_rate: f64,
    /// Absent when the instance has no reference value.
    pub success_probability: Option<f64>,
    pub best: Option<BestSolution>,
    pub samples: Vec<SampleRecord>,
}

/// Wall-clock measurements, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub evolve: f64,
    pub decode: f64,
    pub refine_total: f64,
    pub evolve_per_shot: f64,
    pub decode_per_shot: f64,
    pub refine_per_sample: f64,
    pub t0: Seconds,
    pub tts: Option<Seconds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub canonical: CanonicalReport,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String, BenchError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON of the canonical section only; byte-identical across reruns.
    pub fn canonical_json(&self) -> Result<String, BenchError> {
        Ok(serde_json::to_string_pretty(&self.canonical)?)
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per sample: outcome, decoded and refined coordinates, refined
    /// objective and success flag.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["outcome", "decoded", "refined", "f", "success"])?;
        let coords = |v: &Option<Vec<f64>>| match v {
            Some(x) => x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
            None => "rejected".to_string(),
        };
        for s in &self.canonical.samples {
            let f = s.refined_objective.map(|f| f.to_string()).unwrap_or_default();
            out.write_record([s.outcome.clone(), coords(&s.decoded), coords(&s.refined), f, s.success.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Refined objective values, `None` for rejected or failed samples.
    pub fn refined_values(&self) -> Vec<Option<f64>> {
        self.canonical.samples.iter().map(|s| s.refined_objective).collect()
    }
}

struct Refined {
    result: Option<RefinementResult>,
    seconds: f64,
}

fn refine_all(work: &Problem, starts: &[Vec<f64>], cfg: &RefineConfig) -> Vec<Refined> {
    starts
        .par_iter()
        .map(|x0| {
            let clock = Instant::now();
            let result = refine(work, x0, cfg).ok();
            Refined { result, seconds: clock.elapsed().as_secs_f64() }
        })
        .collect()
}

/// Sample records, p_s, best solution and summed refine time from unit-box
/// points and their refinements.
fn score(
    spec: &InstanceSpec,
    work: &Problem,
    outcomes: Vec<String>,
    points: Vec<Option<Vec<f64>>>,
    refined: &[Option<&Refined>],
    tol: f64,
) -> (Vec<SampleRecord>, Option<f64>, Option<BestSolution>, f64) {
    let f_star = spec.f_star.as_ref().map(|k| k.value);
    let mut refine_seconds = 0.0;
    let mut records = Vec::with_capacity(outcomes.len());
    for ((outcome, point), r) in outcomes.into_iter().zip(points).zip(refined) {
        let decoded_objective = point.as_ref().and_then(|x| work.value(x).ok());
        let result = r.and_then(|r| {
            refine_seconds += r.seconds;
            r.result.as_ref()
        });
        let refined_objective = result.map(|r| r.f_star);
        let success = matches!((refined_objective, f_star), (Some(f), Some(s)) if f - s < tol);
        records.push(SampleRecord {
            outcome,
            decoded: point.map(|x| work.to_original(&x)),
            decoded_objective,
            refined: result.map(|r| work.to_original(&r.x_star)),
            refined_objective,
            iterations: result.map_or(0, |r| r.iterations),
            converged: result.is_some_and(|r| r.converged),
            success,
        });
    }
    let values: Vec<Option<f64>> = records.iter().map(|s| s.refined_objective).collect();
    let p_s = success_probability(&values, f_star, tol).ok();
    let mut best: Option<BestSolution> = None;
    for (i, s) in records.iter().enumerate() {
        if let (Some(x), Some(f)) = (&s.refined, s.refined_objective) {
            if best.as_ref().is_none_or(|b| f < b.f - 1e-12) {
                best = Some(BestSolution { sample: i, x: x.clone(), f });
            }
        }
    }
    (records, p_s, best, refine_seconds)
}

/// Run the full pipeline on one instance.
pub fn run_instance(spec: &InstanceSpec, cfg: &PipelineConfig) -> Result<RunReport, BenchError> {
    if cfg.shots == 0 {
        return Err(BenchError::NoSamples);
    }
    let work = spec.problem.normalize_to_unit_box();
    let points_per_var = cfg.points();
    let dh = DiscretizedHamiltonian::assemble(&work, points_per_var)?;
    let (op, map) = match cfg.backend {
        Backend::Direct => (SplitOperator::direct(&dh, cfg.direct_cap)?, None),
        Backend::Embedded => {
            let ir = assemble_embedding(&dh, cfg.scheme)?;
            (SplitOperator::embedded(&ir, cfg.embedded_cap)?, Some(ir.codeword_map()))
        }
    };
    let basis = op.basis();

    let clock = Instant::now();
    let psi = evolve(&op, &cfg.schedule, &EvolveConfig { steps: cfg.steps, seed: cfg.seed, shots: cfg.shots })?;
    let evolve_seconds = clock.elapsed().as_secs_f64();
    let norm_drift = (psi.norm() - 1.0).abs();

    let clock = Instant::now();
    let shots = sample(&psi, cfg.shots, cfg.seed);
    let policy = cfg.effective_policy();
    let mut cache: BTreeMap<usize, Option<Vec<f64>>> = BTreeMap::new();
    for &s in &shots {
        cache.entry(s).or_insert_with(|| decode_outcome(&dh, map.as_ref(), basis.label(s), s, policy));
    }
    let outcomes: Vec<String> = shots.iter().map(|&s| basis.label(s)).collect();
    let points: Vec<Option<Vec<f64>>> = shots.iter().map(|s| cache[s].clone()).collect();
    let decode_seconds = clock.elapsed().as_secs_f64();

    let mut unique: Vec<Vec<f64>> = points.iter().flatten().cloned().collect();
    unique.sort_by(|a, b| cmp_points(a, b));
    unique.dedup();
    let refined = refine_all(&work, &unique, &cfg.refine);
    let per_sample: Vec<Option<&Refined>> = points
        .iter()
        .map(|p| p.as_ref().and_then(|x| unique.binary_search_by(|u| cmp_points(u, x)).ok()).map(|i| &refined[i]))
        .collect();

    let rejected = points.iter().filter(|p| p.is_none()).count();
    let (samples, p_s, best, refine_total) = score(spec, &work, outcomes, points, &per_sample, cfg.success_tol);

    let n = cfg.shots as f64;
    let timing = build_timing(evolve_seconds, decode_seconds, refine_total, n, p_s);
    Ok(RunReport {
        canonical: CanonicalReport {
            instance: spec.id.clone(),
            source: spec.source,
            variables: spec.problem.n(),
            f_star: spec.f_star.clone(),
            config: RunConfig::Pipeline(cfg.clone()),
            state_dimension: Some(op.dimension()),
            norm_drift: Some(norm_drift),
            rejection_rate: rejected as f64 / n,
            success_probability: p_s,
            best,
            samples,
        },
        timing,
    })
}

fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

fn decode_outcome(
    dh: &DiscretizedHamiltonian,
    map: Option<&CodewordMap>,
    label: String,
    index: usize,
    policy: DecodePolicy,
) -> Option<Vec<f64>> {
    match map {
        None => Some(dh.point(index)),
        Some(map) => {
            let bits: Vec<bool> = label.chars().map(|c| c == '1').collect();
            crate::embedding::decode(&bits, map, policy).ok().flatten()
        }
    }
}

fn build_timing(evolve: f64, decode: f64, refine_total: f64, samples: f64, p_s: Option<f64>) -> Timing {
    let evolve_per_shot = evolve / samples;
    let decode_per_shot = decode / samples;
    let refine_per_sample = refine_total / samples;
    let t0 = Seconds(evolve_per_shot + decode_per_shot + refine_per_sample);
    Timing {
        label: T0_LABEL.to_string(),
        evolve,
        decode,
        refine_total,
        evolve_per_shot,
        decode_per_shot,
        refine_per_sample,
        t0,
        tts: p_s.map(|p| tts(t0.0, p)),
    }
}

fn uniform_starts(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Classical multi-start baseline: refine from uniform random points.
pub fn run_baseline(spec: &InstanceSpec, cfg: &BaselineConfig) -> Result<RunReport, BenchError> {
    if cfg.starts == 0 {
        return Err(BenchError::NoSamples);
    }
    let work = spec.problem.normalize_to_unit_box();
    let starts = uniform_starts(work.n(), cfg.starts, cfg.seed);
    let refined = refine_all(&work, &starts, &cfg.refine);
    let per_sample: Vec<Option<&Refined>> = refined.iter().map(Some).collect();
    let outcomes = vec!["uniform".to_string(); starts.len()];
    let points = starts.into_iter().map(Some).collect();
    let (samples, p_s, best, refine_total) = score(spec, &work, outcomes, points, &per_sample, cfg.success_tol);
    let timing = build_timing(0.0, 0.0, refine_total, cfg.starts as f64, p_s);
    Ok(RunReport {
        canonical: CanonicalReport {
            instance: spec.id.clone(),
            source: spec.source,
            variables: spec.problem.n(),
            f_star: spec.f_star.clone(),
            config: RunConfig::Baseline(cfg.clone()),
            state_dimension: None,
            norm_drift: None,
            rejection_rate: 0.0,
            success_probability: p_s,
            best,
            samples,
        },
        timing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub values: Vec<f64>,
    pub median: Option<f64>,
}

impl Distribution {
    fn new(values: Vec<f64>) -> Self {
        let median = median(&values);
        Distribution { values, median }
    }
}

/// Objective values of uniform random points, decoded samples and refined
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmstartReport {
    pub instance: String,
    pub uniform: Distribution,
    pub decoded: Distribution,
    pub refined: Distribution,
    /// Median of decoded samples is at most the median of uniform points.
    pub decoded_not_worse: bool,
    pub config: PipelineConfig,
}

/// Compare random starts with decoded and refined samples. The uniform draw
/// uses the pipeline seed and shot count.
pub fn warmstart_comparison(spec: &InstanceSpec, cfg: &PipelineConfig) -> Result<WarmstartReport, BenchError> {
    let report = run_instance(spec, cfg)?;
    let work = spec.problem.normalize_to_unit_box();
    let uniform: Vec<f64> =
        uniform_starts(work.n(), cfg.shots, cfg.seed).iter().filter_map(|x| work.value(x).ok()).collect();
    let decoded: Vec<f64> = report.canonical.samples.iter().filter_map(|s| s.decoded_objective).collect();
    let refined: Vec<f64> = report.canonical.samples.iter().filter_map(|s| s.refined_objective).collect();
    let (uniform, decoded, refined) =
        (Distribution::new(uniform), Distribution::new(decoded), Distribution::new(refined));
    let decoded_not_worse = matches!((decoded.median, uniform.median), (Some(d), Some(u)) if d <= u);
    Ok(WarmstartReport { instance: spec.id.clone(), uniform, decoded, refined, decoded_not_worse, config: cfg.clone() })
}
