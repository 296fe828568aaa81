//! Batch driver for the imaginary-time MAXCUT optimizer: generates
//! instance sets, runs the optimizers over them, and distills the stored
//! trajectories into plot-ready tables.

mod presets;
mod runner;
mod spec;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::presets::Preset;
use crate::spec::{ConventionChoice, ExperimentSpec, Family, OptimizerChoice};

/// Failures split by exit code: 1 for bad input, 2 for IO trouble.
#[derive(Debug)]
pub enum CliError {
    BadInput(String),
    Io(String),
}

impl CliError {
    pub fn bad(msg: impl Into<String>) -> Self {
        CliError::BadInput(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }

    pub fn from_core(e: varqite::Error) -> Self {
        CliError::BadInput(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::BadInput(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::BadInput(msg) | CliError::Io(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Parser)]
#[command(
    name = "varqite",
    version,
    about = "Batch experiments for an imaginary-time variational MAXCUT optimizer",
    after_help = "Options resolve in order: defaults, then --preset, then --config (or the \
                  run directory's config.txt), then individual flags. Flags always win."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write graph instances and a seed manifest into a run directory
    Generate(JobArgs),
    /// Optimize every instance and write trajectory and summary tables
    Run(JobArgs),
    /// Rebuild summaries from stored trajectories, annotating entanglement
    /// entropy unless disabled
    Analyze(AnalyzeArgs),
    /// List presets, or print one as a config file
    Presets(PresetArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// Start from a named preset (fig1, fig2, fig3, fig4)
    #[arg(long)]
    preset: Option<String>,
    /// Apply a config file on top of the preset or defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated families: three_regular, nws, sk, complete
    #[arg(long)]
    ensemble: Option<String>,
    /// Comma-separated even vertex counts
    #[arg(long)]
    sizes: Option<String>,
    /// Instances per (family, size) pair
    #[arg(long)]
    instances: Option<usize>,
    /// Comma-separated pruning thresholds for the variational runs
    #[arg(long)]
    epsilon: Option<String>,
    /// varit, adam, or both
    #[arg(long)]
    optimizer: Option<String>,
    /// Master seed; every instance seed derives from it
    #[arg(long)]
    seed: Option<u64>,
    /// default, physics, or cs
    #[arg(long)]
    convention: Option<String>,
    /// Also write per-instance exact imaginary-time comparison tables
    #[arg(long)]
    ite_reference: Option<bool>,
    /// Imaginary-time step of the variational flow
    #[arg(long)]
    dtau: Option<f64>,
    /// Relative singular-value cutoff of the linear solve
    #[arg(long)]
    svd_cutoff_ratio: Option<f64>,
    /// Flow iteration budget
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Optimal-support mass that ends the flow
    #[arg(long)]
    switch_threshold: Option<f64>,
    /// Support mass floor below which states are ignored
    #[arg(long)]
    probability_floor: Option<f64>,
    /// Filter the cost landscape through the logistic squash
    #[arg(long)]
    use_sigmoid: Option<bool>,
    /// Halve the response matrix instead of the drive vector
    #[arg(long)]
    halve_g: Option<bool>,
    /// descending or ascending vertex-weight ranking
    #[arg(long)]
    rank_order: Option<String>,
    /// Baseline learning rate
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Baseline first-moment decay
    #[arg(long)]
    beta1: Option<f64>,
    /// Baseline second-moment decay
    #[arg(long)]
    beta2: Option<f64>,
    /// Baseline denominator shift
    #[arg(long)]
    eps_hat: Option<f64>,
    /// Baseline iteration budget
    #[arg(long)]
    adam_iterations: Option<usize>,
}

#[derive(Args)]
struct JobArgs {
    /// Run directory
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; outputs do not depend on this
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    spec: SpecArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    job: JobArgs,
    /// Annotate entanglement entropy on converged variational runs; the
    /// expensive part of analysis
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    entropy: bool,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset name; omit to list all of them
    name: Option<String>,
    /// Write the preset as DIR/config.txt instead of printing it
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => {
            let spec = resolve_spec(&args.spec, &args.out, false)?;
            runner::generate(&spec, &args.out)
        }
        Command::Run(args) => {
            let spec = resolve_spec(&args.spec, &args.out, false)?;
            runner::run(&spec, &args.out, args.jobs)
        }
        Command::Analyze(args) => {
            let spec = resolve_spec(&args.job.spec, &args.job.out, true)?;
            runner::analyze(&spec, &args.job.out, args.job.jobs, args.entropy)
        }
        Command::Presets(args) => cmd_presets(args),
    }
}

fn cmd_presets(args: PresetArgs) -> Result<(), CliError> {
    let Some(name) = args.name else {
        for p in presets::ALL {
            println!("{:<6}{}", p.name(), p.describe());
        }
        return Ok(());
    };
    let text = name.parse::<Preset>()?.spec().to_config_text();
    match args.out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))?;
            runner::atomic_write(&dir.join("config.txt"), &text)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Layered spec resolution. `require_base` makes a bare invocation on a
/// directory without a config an error instead of silently analyzing the
/// default spec.
fn resolve_spec(
    args: &SpecArgs,
    out: &std::path::Path,
    require_base: bool,
) -> Result<ExperimentSpec, CliError> {
    let mut spec = ExperimentSpec::default();
    let mut have_base = false;
    if let Some(name) = &args.preset {
        spec = name.parse::<Preset>()?.spec();
        have_base = true;
    }
    if let Some(path) = &args.config {
        spec.apply_config_text(&runner::read_file(path)?)?;
        have_base = true;
    } else if let Some(path) = runner::dir_config(out) {
        spec.apply_config_text(&runner::read_file(&path)?)?;
        have_base = true;
    }
    if require_base && !have_base {
        return Err(CliError::bad(format!(
            "{} has no config.txt; pass --config or --preset",
            out.display()
        )));
    }
    apply_flags(&mut spec, args)?;
    Ok(spec)
}

fn apply_flags(spec: &mut ExperimentSpec, args: &SpecArgs) -> Result<(), CliError> {
    if let Some(v) = &args.ensemble {
        spec.ensembles = v.split(',').map(|s| s.trim().parse::<Family>()).collect::<Result<_, _>>()?;
    }
    if let Some(v) = &args.sizes {
        spec.sizes = v
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| CliError::bad(format!("bad size '{s}'"))))
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = args.instances {
        spec.instances = v;
    }
    if let Some(v) = &args.epsilon {
        spec.epsilons = v
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| CliError::bad(format!("bad threshold '{s}'")))
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = &args.optimizer {
        spec.optimizer = v.parse::<OptimizerChoice>()?;
    }
    if let Some(v) = args.seed {
        spec.master_seed = v;
    }
    if let Some(v) = &args.convention {
        spec.convention = v.parse::<ConventionChoice>()?;
    }
    if let Some(v) = args.ite_reference {
        spec.ite_reference = v;
    }
    if let Some(v) = args.dtau {
        spec.varit.dtau = v;
    }
    if let Some(v) = args.svd_cutoff_ratio {
        spec.varit.svd_cutoff_ratio = v;
    }
    if let Some(v) = args.max_iterations {
        spec.varit.max_iterations = v;
    }
    if let Some(v) = args.switch_threshold {
        spec.varit.switch_threshold = v;
    }
    if let Some(v) = args.probability_floor {
        spec.varit.probability_floor = v;
    }
    if let Some(v) = args.use_sigmoid {
        spec.varit.use_sigmoid = v;
    }
    if let Some(v) = args.halve_g {
        spec.varit.halve_g = v;
    }
    if let Some(v) = &args.rank_order {
        spec.varit.rank_order = v.parse().map_err(CliError::from_core)?;
    }
    if let Some(v) = args.learning_rate {
        spec.adam.learning_rate = v;
    }
    if let Some(v) = args.beta1 {
        spec.adam.beta1 = v;
    }
    if let Some(v) = args.beta2 {
        spec.adam.beta2 = v;
    }
    if let Some(v) = args.eps_hat {
        spec.adam.eps_hat = v;
    }
    if let Some(v) = args.adam_iterations {
        spec.adam.max_iterations = v;
    }
    Ok(())
}
