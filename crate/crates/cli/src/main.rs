use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qhdkit::bench::{
    builtin, builtin_ids, run_instance, run_suite, warmstart_comparison, Backend, InstanceSpec, KnownOptimum,
    PipelineConfig, Provenance, Suite,
};
use qhdkit::discretize::DiscretizedHamiltonian;
use qhdkit::embedding::{assemble_embedding, export_annealer, DecodePolicy, Scheme, DEFAULT_ANNEAL_TIME_US};
use qhdkit::evolve::{Schedule, DEFAULT_GAMMA, DEFAULT_STEPS, DEFAULT_TOTAL_TIME};
use qhdkit::problem::ProblemFile;
use qhdkit::refine::{RefineConfig, RefineMethod};

const SEED_VAR: &str = "QHDKIT_SEED";

#[derive(Parser)]
#[command(name = "qhdkit", version, about = "Quantum Hamiltonian Descent, simulated on a classical machine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on one problem and write a report.
    Solve {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Report JSON path; a CSV with one row per sample is written next to it.
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Run a benchmark suite into a directory.
    Bench {
        #[arg(long, default_value = "builtin")]
        suite: Suite,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Build the qubit Hamiltonian of a problem and dump it as JSON.
    Embed {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "unary")]
        scheme: Scheme,
        /// Qubits per variable.
        #[arg(long, default_value_t = 5)]
        resolution: usize,
        #[arg(long, default_value = "ir.json")]
        dump: PathBuf,
    },
    /// Write an annealer-format problem (fields, couplings, driver, schedule).
    ExportAnnealer {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "unary")]
        scheme: Scheme,
        #[arg(long, default_value_t = 5)]
        resolution: usize,
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Physical anneal duration in microseconds.
        #[arg(long, default_value_t = DEFAULT_ANNEAL_TIME_US)]
        anneal_time_us: f64,
        #[arg(long, default_value = "anneal.json")]
        out: PathBuf,
    },
    /// Compare objective values of random points, decoded samples and refined samples.
    Compare {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value = "compare.json")]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Problem JSON: `{"Q": [[..]], "b": [..]}` or `{"vars": [..], "expr": ".."}`, optional `"bounds"`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Name of a built-in instance.
    #[arg(long)]
    instance: Option<String>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Total evolution time.
    #[arg(long, default_value_t = DEFAULT_TOTAL_TIME)]
    time: f64,
    /// JSON schedule file; overrides --gamma and --time.
    #[arg(long)]
    schedule: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value = "direct")]
    backend: Backend,
    #[arg(long, default_value = "unary")]
    scheme: Scheme,
    /// Qubits per variable (embedded backend).
    #[arg(long, default_value_t = 5)]
    resolution: usize,
    /// Grid points per variable (direct backend).
    #[arg(long, default_value_t = 17)]
    grid: usize,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = 1000)]
    shots: usize,
    /// Overridden by QHDKIT_SEED when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "pg")]
    refine: RefineMethod,
    /// Decoding of invalid registers; defaults to the scheme's policy.
    #[arg(long)]
    policy: Option<DecodePolicy>,
    /// Reference objective for success counting when the input has none.
    #[arg(long, allow_hyphen_values = true)]
    f_star: Option<f64>,
}

impl ScheduleArgs {
    fn build(&self) -> Result<Schedule> {
        match &self.schedule {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let schedule: Schedule = serde_json::from_str(&text).context("parsing schedule")?;
                schedule.validate()?;
                Ok(schedule)
            }
            None => Ok(Schedule::smooth_log(self.gamma, self.time)?),
        }
    }
}

fn seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_VAR}={v:?} is not an unsigned integer")),
        Err(_) => Ok(flag),
    }
}

impl PipelineArgs {
    fn build(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            backend: self.backend,
            scheme: self.scheme,
            grid_points: self.grid,
            resolution: self.resolution,
            schedule: self.schedule.build()?,
            steps: self.steps,
            shots: self.shots,
            seed: seed(self.seed)?,
            refine: RefineConfig { method: self.refine, ..RefineConfig::default() },
            policy: self.policy,
            ..PipelineConfig::default()
        })
    }
}

fn load(source: &Source, f_star: Option<f64>) -> Result<InstanceSpec> {
    let mut spec = if let Some(id) = &source.instance {
        match builtin(id) {
            Some(spec) => spec,
            None => bail!("unknown instance {id:?}; available: {}", builtin_ids().join(", ")),
        }
    } else {
        let path = source.input.as_ref().expect("clap enforces one source");
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let problem = ProblemFile::from_json(&text)?.into_problem()?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into());
        InstanceSpec::user(id, problem)
    };
    if let Some(value) = f_star {
        spec.f_star = Some(KnownOptimum { value, provenance: Provenance::Derived, printed: None, minimizer: None });
    }
    Ok(spec)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { source, pipeline, out } => {
            let spec = load(&source, pipeline.f_star)?;
            let report = run_instance(&spec, &pipeline.build()?)?;
            write(&out, &report.to_json()?)?;
            let csv_path = out.with_extension("csv");
            report.write_csv(fs::File::create(&csv_path)?)?;
            let c = &report.canonical;
            match &c.best {
                Some(b) => println!("best f = {:.9} at {:?}", b.f, b.x),
                None => println!("no sample survived decoding"),
            }
            println!("rejection rate = {:.4}", c.rejection_rate);
            if let (Some(p), Some(t)) = (c.success_probability, report.timing.tts) {
                println!("p_s = {p:.4}, {} = {}, tts = {t}", report.timing.label, report.timing.t0);
            }
            println!("wrote {} and {}", out.display(), csv_path.display());
        }
        Command::Bench { suite, out } => {
            let summary = run_suite(suite, &out)?;
            for e in &summary.entries {
                println!("{:<28} {:<22} {}", e.instance, e.run, e.status);
            }
            println!("wrote {}", out.display());
        }
        Command::Embed { source, scheme, resolution, dump } => {
            let spec = load(&source, None)?;
            let work = spec.problem.normalize_to_unit_box();
            let dh = DiscretizedHamiltonian::assemble(&work, scheme.points(resolution))?;
            let ir = assemble_embedding(&dh, scheme)?;
            write(&dump, &ir.to_json())?;
            println!(
                "{} qubits, {} kinetic and {} potential terms; wrote {}",
                ir.qubits(),
                ir.kinetic().len(),
                ir.potential().len(),
                dump.display()
            );
        }
        Command::ExportAnnealer { source, scheme, resolution, schedule, anneal_time_us, out } => {
            let spec = load(&source, None)?;
            let work = spec.problem.normalize_to_unit_box();
            let dh = DiscretizedHamiltonian::assemble(&work, scheme.points(resolution))?;
            let ir = assemble_embedding(&dh, scheme)?;
            let export = export_annealer(&ir, &schedule.build()?, anneal_time_us)?;
            write(&out, &serde_json::to_string_pretty(&export)?)?;
            println!("{} qubits; wrote {}", export.num_qubits, out.display());
        }
        Command::Compare { source, pipeline, out } => {
            let spec = load(&source, pipeline.f_star)?;
            let w = warmstart_comparison(&spec, &pipeline.build()?)?;
            write(&out, &serde_json::to_string_pretty(&w)?)?;
            let show = |m: Option<f64>| m.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
            println!("median uniform = {}", show(w.uniform.median));
            println!("median decoded = {}", show(w.decoded.median));
            println!("median refined = {}", show(w.refined.median));
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
