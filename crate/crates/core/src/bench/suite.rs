//! Benchmark suites that write reports, a summary and a README to a directory.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instances::{builtins, generate_exp_instance, generate_exp_instance_with, InstanceSpec};
use super::metrics::Seconds;
use super::pipeline::{run_baseline, run_instance, Backend, BaselineConfig, PipelineConfig, RunReport};
use super::BenchError;
use crate::embedding::Scheme;

/// Written into every suite README.
pub const NON_REPRODUCTION_NOTE: &str = "\
Not reproduced: published results on 50-variable instances, including their \
timing columns, are out of reach at desk scale. With 8 qubits per variable the \
embedded state spans 2^400 amplitudes, and even a 17-point grid gives 17^50 \
states. This suite substitutes small instances solved end to end, the \
embedding and decoding property checks, and the metric arithmetic. Its \
exponential suite attempts one 50-variable instance and records the cap error.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// The built-in nonlinear instances and both worked examples.
    Builtin,
    /// Generated exponential-family instances.
    Exp,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "builtin" => Ok(Suite::Builtin),
            "exp" => Ok(Suite::Exp),
            other => Err(format!("unknown suite {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub instance: String,
    pub run: String,
    pub variables: usize,
    /// `"ok"`, or the error that stopped the run.
    pub status: String,
    pub f_star: Option<f64>,
    pub best: Option<f64>,
    pub success_probability: Option<f64>,
    pub rejection_rate: Option<f64>,
    pub t0: Option<Seconds>,
    pub tts: Option<Seconds>,
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub entries: Vec<SuiteEntry>,
    pub note: String,
}

enum Job {
    Pipeline(PipelineConfig),
    Baseline(BaselineConfig),
}

fn run_name(job: &Job) -> String {
    match job {
        Job::Pipeline(c) => match c.backend {
            Backend::Direct => format!("direct-n{}", c.grid_points),
            Backend::Embedded => format!("embedded-{}-r{}", c.scheme.name(), c.resolution),
        },
        Job::Baseline(c) => format!("baseline-{}", c.starts),
    }
}

fn jobs_for(spec: &InstanceSpec) -> Vec<Job> {
    let mut jobs = vec![Job::Pipeline(PipelineConfig::default())];
    if spec.problem.n() == 2 {
        jobs.push(Job::Pipeline(PipelineConfig {
            backend: Backend::Embedded,
            scheme: Scheme::Unary,
            resolution: 5,
            ..PipelineConfig::default()
        }));
    }
    jobs.push(Job::Baseline(BaselineConfig::default()));
    jobs
}

fn instances(suite: Suite) -> Vec<(InstanceSpec, Vec<Job>)> {
    match suite {
        Suite::Builtin => builtins()
            .into_iter()
            .map(|s| {
                let jobs = jobs_for(&s);
                (s, jobs)
            })
            .collect(),
        Suite::Exp => {
            let mut out: Vec<(InstanceSpec, Vec<Job>)> = [2usize, 3]
                .iter()
                .flat_map(|&d| (0..3u64).map(move |seed| (d, seed)))
                .map(|(d, seed)| {
                    let s = generate_exp_instance(d, 0.5, seed);
                    let jobs = jobs_for(&s);
                    (s, jobs)
                })
                .collect();
            let large = generate_exp_instance_with(50, 0.1, 0, 0);
            out.push((
                large,
                vec![
                    Job::Pipeline(PipelineConfig::default()),
                    Job::Pipeline(PipelineConfig {
                        backend: Backend::Embedded,
                        scheme: Scheme::Unary,
                        resolution: 8,
                        ..PipelineConfig::default()
                    }),
                ],
            ));
            out
        }
    }
}

fn write_report(dir: &Path, stem: &str, report: &RunReport) -> Result<(), BenchError> {
    fs::write(dir.join(format!("{stem}.json")), report.to_json()?)?;
    report.write_csv(fs::File::create(dir.join(format!("{stem}.csv")))?)?;
    Ok(())
}

/// Run every instance of `suite`, writing per-run JSON and CSV reports plus
/// `summary.json`, `summary.csv` and `README.md` into `out`.
pub fn run_suite(suite: Suite, out: &Path) -> Result<SuiteSummary, BenchError> {
    fs::create_dir_all(out)?;
    let work: Vec<(InstanceSpec, Job)> =
        instances(suite).into_iter().flat_map(|(s, jobs)| jobs.into_iter().map(move |j| (s.clone(), j))).collect();
    let entries = work
        .par_iter()
        .map(|(spec, job)| {
            let run = run_name(job);
            let result = match job {
                Job::Pipeline(c) => run_instance(spec, c),
                Job::Baseline(c) => run_baseline(spec, c),
            };
            let mut entry = SuiteEntry {
                instance: spec.id.clone(),
                run: run.clone(),
                variables: spec.problem.n(),
                status: "ok".into(),
                f_star: spec.f_star.as_ref().map(|k| k.value),
                best: None,
                success_probability: None,
                rejection_rate: None,
                t0: None,
                tts: None,
                report: None,
            };
            match result {
                Ok(report) => {
                    let stem = format!("{}-{}", spec.id, run);
                    write_report(out, &stem, &report)?;
                    entry.best = report.canonical.best.as_ref().map(|b| b.f);
                    entry.success_probability = report.canonical.success_probability;
                    entry.rejection_rate = Some(report.canonical.rejection_rate);
                    entry.t0 = Some(report.timing.t0);
                    entry.tts = report.timing.tts;
                    entry.report = Some(format!("{stem}.json"));
                }
                Err(e) if e.is_cap_exceeded() => entry.status = format!("skipped: {e}"),
                Err(e) => return Err(e),
            }
            Ok(entry)
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    let summary = SuiteSummary { suite, entries, note: NON_REPRODUCTION_NOTE.to_string() };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    write_summary_csv(out, &summary)?;
    fs::write(out.join("README.md"), readme(&summary))?;
    Ok(summary)
}

fn write_summary_csv(out: &Path, summary: &SuiteSummary) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.write_record(["instance", "run", "variables", "status", "f_star", "best", "p_s", "rejection_rate", "t0", "tts"])?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let secs = |v: Option<Seconds>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in &summary.entries {
        w.write_record([
            e.instance.clone(),
            e.run.clone(),
            e.variables.to_string(),
            e.status.clone(),
            num(e.f_star),
            num(e.best),
            num(e.success_probability),
            num(e.rejection_rate),
            secs(e.t0),
            secs(e.tts),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn readme(summary: &SuiteSummary) -> String {
    let name = match summary.suite {
        Suite::Builtin => "builtin",
        Suite::Exp => "exp",
    };
    let mut text = format!("# Benchmark suite: {name}\n\n");
    text.push_str("Times are simulator wall-clock seconds (\"simulated t0\") and are not comparable to quantum-hardware access times.\n\n");
    text.push_str(
        "| instance | run | n | status | f_star | best | p_s | tts (s) |\n|---|---|---|---|---|---|---|---|\n",
    );
    let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    for e in &summary.entries {
        text.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
            e.instance,
            e.run,
            e.variables,
            e.status,
            num(e.f_star),
            num(e.best),
            num(e.success_probability),
            e.tts.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
        ));
    }
    text.push_str("\n## Scope\n\n");
    text.push_str(NON_REPRODUCTION_NOTE);
    text.push('\n');
    text
}
