//! `possim`: contours, inference, validity simulation and figure data from the command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric failure, 4 validity violation.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Demo;
use crate::config::{split_top_level, Format, Method, Mode, ModelSpec, RunConfig};

/// Invalid user input that is not a library error.
#[derive(Debug)]
pub struct SpecError(pub String);

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecError {}

#[derive(Parser)]
#[command(name = "possim", version, about = "Possibilistic inference from relative likelihoods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a possibility contour on a parameter grid.
    Contour {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Possibility, verdict, test and confidence set for a hypothesis.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// `[lo,hi]`, `{a,b,...}` or a union such as `[0,0.2]U[0.8,1]`.
        #[arg(long, allow_hyphen_values = true)]
        hypothesis: Option<String>,
        /// Level for the test, verdict and confidence set (default 0.05).
        #[arg(long)]
        alpha: Option<f64>,
        /// Half-width of the normal integration window for normalized likelihood.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Simulate exceedance rates of the contour at the true parameter.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Parameter values: `lo:hi:step` or a comma list.
        #[arg(long, allow_hyphen_values = true)]
        thetas: Option<String>,
        /// Comma-separated levels (default 0.01,0.05,0.1,0.25,0.5).
        #[arg(long)]
        alphas: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Report coverage of the confidence sets instead of exceedance.
        #[arg(long)]
        coverage: bool,
        #[arg(long)]
        tail_tol: Option<f64>,
        #[arg(long, hide = true)]
        uncalibrated_power: Option<f64>,
    },
    /// Write plot data for the built-in examples.
    Demo {
        #[arg(value_enum)]
        name: Demo,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Output file, or a directory to receive `<name>.<format>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name, optionally with design constants, e.g. `binomial(n=10)`.
    #[arg(long, conflicts_with = "ensemble")]
    model: Option<String>,
    /// Comma-separated model names sharing one relative likelihood.
    #[arg(long)]
    ensemble: Option<String>,
    /// Observed data: `n,y` for Bernoulli designs, `x1,x2,...` for the
    /// discrete uniform, a number otherwise.
    #[arg(long, allow_hyphen_values = true)]
    data: Option<String>,
    /// Parameter grid `lo:hi:step`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn flags(&self, command: &str) -> RunConfig {
        RunConfig {
            command: Some(command.to_string()),
            model: self.model.clone().map(ModelSpec::Inline),
            ensemble: self
                .ensemble
                .as_deref()
                .map(|e| split_top_level(e).into_iter().map(ModelSpec::Inline).collect()),
            data: self.data.clone(),
            grid: self.grid.clone(),
            seed: self.seed,
            reps: self.reps,
            format: self.format,
            ..Default::default()
        }
    }
}

fn effective(config: Option<&PathBuf>, flags: RunConfig) -> anyhow::Result<RunConfig> {
    Ok(match config {
        Some(p) => RunConfig::load(p)?.overlay(flags),
        None => flags,
    })
}

fn run(cli: Cli) -> anyhow::Result<commands::Outcome> {
    match cli.command {
        Command::Contour { common, method } => {
            let flags = RunConfig {
                method,
                ..common.flags("contour")
            };
            let cfg = effective(common.config.as_ref(), flags)?;
            commands::contour(&cfg, common.out.as_deref())
        }
        Command::Infer {
            common,
            method,
            hypothesis,
            alpha,
            window,
        } => {
            let flags = RunConfig {
                method,
                hypothesis,
                alpha,
                window,
                ..common.flags("infer")
            };
            let cfg = effective(common.config.as_ref(), flags)?;
            commands::infer(&cfg, common.out.as_deref())
        }
        Command::Validate {
            common,
            thetas,
            alphas,
            mode,
            coverage,
            tail_tol,
            uncalibrated_power,
        } => {
            let flags = RunConfig {
                thetas,
                alphas,
                mode,
                coverage: coverage.then_some(true),
                tail_tol,
                uncalibrated_power,
                ..common.flags("validate")
            };
            let cfg = effective(common.config.as_ref(), flags)?;
            commands::validate(&cfg, common.out.as_deref())
        }
        Command::Demo {
            name,
            config,
            seed,
            reps,
            out,
            format,
        } => {
            let flags = RunConfig {
                command: Some("demo".into()),
                demo: Some(name.name().into()),
                seed,
                reps,
                format,
                ..Default::default()
            };
            let cfg = effective(config.as_ref(), flags)?;
            commands::demo(name, &cfg, out.as_deref())
        }
    }
}

/// 2 for bad input, 3 for numeric or I/O failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<SpecError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<possim_core::Error>() {
            return if e.is_spec_error() { 2 } else { 3 };
        }
    }
    3
}

fn init_threads() -> Result<(), SpecError> {
    let Ok(v) = std::env::var("POSSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| SpecError(format!("POSSIM_THREADS: `{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| SpecError(format!("POSSIM_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(outcome) if outcome.violation => ExitCode::from(4),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
