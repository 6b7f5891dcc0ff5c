//! Command-line harness: synthesis, demixing, separation sweeps and
//! certificate validation, each writing plain JSON and CSV files.

mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

pub use config::{Command, ExperimentConfig, InstanceSource, PhaseTransitionConfig};
pub use experiments::{
    run_certificate_sweep, run_phase_transition, run_trial, trial_instance_config, trial_seed,
    CellRate, CertificateSummary, PhaseTransitionResult, SeedReport, TrialRecord,
};

use crate::certificate::run_certificate;
use crate::dual_analysis::{demix, DualPolynomial};
use crate::error::{Error, Result};
use crate::model::row_norms;
use crate::solver::SdpSolution;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "mmv-demix",
    version,
    about = "Spectral demixing of sparse outliers from multi-snapshot sensor data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Write a synthetic instance as JSON.
    Synth,
    /// Solve the dual program and report frequencies, amplitudes and outliers.
    Demix,
    /// Success rate over a grid of separations and snapshot counts.
    PhaseTransition,
    /// Build and validate a randomized dual certificate.
    Certificate,
}

impl CliCommand {
    fn kind(&self) -> Command {
        match self {
            CliCommand::Synth => Command::Synth,
            CliCommand::Demix => Command::Demix,
            CliCommand::PhaseTransition => Command::PhaseTransition,
            CliCommand::Certificate => Command::Certificate,
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Experiment configuration JSON.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Trials per sweep cell, or number of certificate seeds.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Peak-search grid, or the certificate validation grid.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Regularization weight, or `auto` for 1/√N.
    #[arg(long, global = true, value_parser = parse_lambda)]
    pub lambda: Option<LambdaArg>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    Auto,
    Value(f64),
}

fn parse_lambda(s: &str) -> std::result::Result<LambdaArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(LambdaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(LambdaArg::Value(v)),
        _ => Err(format!("expected a positive number or \"auto\", got {s:?}")),
    }
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::NumericalFailure(_) | Error::IllPosedRecovery(_) | Error::CertificateFailure(_) => {
            EXIT_SOLVER
        }
        Error::InvalidDimension(_)
        | Error::UndefinedSeparation
        | Error::InvalidConfiguration(_)
        | Error::SynthesisFailure(_)
        | Error::Json(_) => EXIT_CONFIG,
    }
}

/// Merge the config file and flags into one configuration.
pub fn resolve_config(command: Command, args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Error::InvalidConfiguration(format!(
                "config is for {c:?} but the {command:?} subcommand was given"
            )));
        }
    }
    cfg.command = Some(command);
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(seed) = cfg.seed {
        if let InstanceSource::Synthesis(s) = &mut cfg.instance {
            s.seed = seed;
        }
        cfg.certificate.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(Error::InvalidConfiguration(
                "trials must be at least 1".into(),
            ));
        }
        cfg.phase_transition.trials = trials;
        cfg.certificate_seeds = trials;
    }
    if let Some(grid) = args.grid {
        cfg.locate.grid = grid;
        cfg.certificate.validation.grid = grid;
    }
    match args.lambda {
        Some(LambdaArg::Auto) => cfg.lambda = None,
        Some(LambdaArg::Value(v)) => cfg.lambda = Some(v),
        None => {}
    }
    cfg.lambda_for(2)?;
    Ok(cfg)
}

/// Parse flags, run the command, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = resolve_config(cli.command.kind(), &cli.common)?;
    let threads = cli.common.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfiguration(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        CliCommand::Synth => cmd_synth(&cfg),
        CliCommand::Demix => cmd_demix(&cfg),
        CliCommand::PhaseTransition => cmd_phase_transition(&cfg),
        CliCommand::Certificate => cmd_certificate(&cfg),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// CSV with a fixed header; floats use the shortest round-trip form.
fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = String::with_capacity(1 << 16);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn trace_rows(trace: &[(f64, f64)]) -> Vec<String> {
    trace.iter().map(|(f, v)| format!("{f},{v}")).collect()
}

pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<i32> {
    let instance = cfg.instance.load()?;
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("instance.json"), &instance.to_json())?;
    info!("wrote {}", cfg.out.join("instance.json").display());
    Ok(EXIT_OK)
}

fn write_demix_outputs(cfg: &ExperimentConfig, solution: &SdpSolution, lambda: f64) -> Result<()> {
    let n = solution.gamma.nrows();
    let grid = if cfg.trace_grid == 0 {
        cfg.locate.grid_for(n)
    } else {
        cfg.trace_grid
    };
    let dp = DualPolynomial::new(&solution.gamma);
    write_csv(
        &cfg.out.join("dual_polynomial.csv"),
        "f,q_norm",
        trace_rows(&dp.grid_trace(grid)),
    )?;
    write_csv(
        &cfg.out.join("row_norms.csv"),
        "row,gamma_row_norm,lambda",
        row_norms(&solution.gamma)
            .iter()
            .enumerate()
            .map(|(j, v)| format!("{j},{v},{lambda}")),
    )?;
    write_csv(
        &cfg.out.join("solver_trace.csv"),
        "iteration,objective,primal_residual,dual_residual",
        solution.trace.iter().map(|r| {
            format!(
                "{},{},{},{}",
                r.iteration, r.objective, r.primal_residual, r.dual_residual
            )
        }),
    )
}

pub fn cmd_demix(cfg: &ExperimentConfig) -> Result<i32> {
    let instance = cfg.instance.load()?;
    let lambda = cfg.lambda_for(instance.n_sensors())?;
    let (report, solution) = demix(&instance.measurement(), lambda, &cfg.solver, &cfg.locate)?;
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("report.json"), &report.to_json())?;
    write_demix_outputs(cfg, &solution, lambda)?;
    info!(
        "{} frequencies, {} outlier rows, duality gap {:e}",
        report.estimated_frequencies.len(),
        report.estimated_outlier_rows.len(),
        report.duality_gap
    );
    Ok(if report.solver_converged {
        EXIT_OK
    } else {
        EXIT_SOLVER
    })
}

pub fn cmd_phase_transition(cfg: &ExperimentConfig) -> Result<i32> {
    let result = run_phase_transition(
        &cfg.phase_transition,
        cfg.base_seed(),
        cfg.lambda,
        &cfg.solver,
        &cfg.locate,
    )?;
    fs::create_dir_all(&cfg.out)?;
    write_csv(
        &cfg.out.join("success_rates.csv"),
        "L,delta_times_N,success_rate",
        result
            .cells
            .iter()
            .map(|c| format!("{},{},{}", c.snapshots, c.delta_times_n, c.success_rate)),
    )?;
    write_csv(
        &cfg.out.join("trials.csv"),
        "seed,delta,L,success",
        result.trials.iter().map(|t| {
            format!(
                "{},{},{},{}",
                t.seed,
                t.delta,
                t.snapshots,
                u8::from(t.success)
            )
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_certificate(cfg: &ExperimentConfig) -> Result<i32> {
    let run = run_certificate(&cfg.certificate)?;
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("certificate.json"), &run.report)?;
    let grid = cfg
        .certificate
        .validation
        .grid
        .max(crate::certificate::MIN_VALIDATION_GRID);
    write_csv(
        &cfg.out.join("certificate_trace.csv"),
        "f,q_norm",
        trace_rows(&run.trace(grid)),
    )?;
    if cfg.certificate_seeds > 1 {
        let summary = run_certificate_sweep(&cfg.certificate, cfg.certificate_seeds)?;
        info!("{}/{} certificates pass", summary.passed, summary.runs);
        write_json(&cfg.out.join("certificate_summary.json"), &summary)?;
    }
    Ok(EXIT_OK)
}
