//! `fracspec` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracspec::spectral_oracle::SpectrumMethod;

use crate::config::{ConfigError, Format, RunConfig};

/// Spectrum of the fractional Ornstein-Uhlenbeck covariance operator and
/// small-noise filtering error asymptotics.
///
/// Settings are read from `--config` (flat `key = value` lines) and then
/// overridden by flags. Exit codes: 0 ok, 1 validation failure, 2 usage,
/// 3 solver failure, 4 truncation refusal.
#[derive(Debug, Parser)]
#[command(name = "fracspec", version, about, long_about = None)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads [default: machine parallelism]. Results do not depend on it.
    #[arg(long, global = true, env = "FRACSPEC_THREADS")]
    threads: Option<usize>,

    /// Output format [default: csv, json for `validate`].
    #[arg(long, global = true)]
    format: Option<Format>,

    /// Write to this file instead of standard output.
    #[arg(long, short, global = true, value_name = "FILE")]
    output: Option<PathBuf>,

    /// Write the effective configuration to this file before running.
    #[arg(long, global = true, value_name = "FILE")]
    save_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues and endpoint values: oracle, first-order and refined.
    Eigs {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of eigenpairs [default: 30].
        #[arg(long)]
        n_max: Option<usize>,
        /// Skip the refined solver.
        #[arg(long)]
        no_refine: bool,
    },
    /// Filtering error on an (eps, u) grid against its small-noise asymptote.
    Mse {
        #[command(flatten)]
        model: ModelArgs,
        /// Noise levels, comma separated [default: 1e-2,1e-3,1e-4].
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        eps: Option<Vec<f64>>,
        /// Scaled times t/T in (0, 1], comma separated [default: 0.5,1].
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        u: Option<Vec<f64>>,
        /// Eigenpair source: oracle, first_order or refined [default: oracle].
        #[arg(long)]
        spectrum: Option<SpectrumMethod>,
        /// Eigenpairs in the series [default: all grid pairs for oracle, 20000 otherwise].
        #[arg(long)]
        n_max: Option<usize>,
        /// Also solve the discretized Wiener-Hopf equation.
        #[arg(long)]
        wiener_hopf: bool,
    },
    /// Tabulate the auxiliary functions of the factorization.
    Special {
        #[command(flatten)]
        model: ModelArgs,
        /// Frequency for the finite-frequency profile [default: the limit profile].
        #[arg(long)]
        nu: Option<f64>,
        /// Evaluation points, comma separated [default: log grid on 1e-3..1e3].
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        points: Option<Vec<f64>>,
    },
    /// Run the acceptance checks and report a verdict per check.
    Validate {
        /// Run the fast subset only.
        #[arg(long)]
        quick: bool,
        /// Run only these checks, comma separated.
        #[arg(long = "check", value_delimiter = ',', num_args = 1..)]
        checks: Option<Vec<u32>>,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Hurst exponent in (0, 1) [default: 0.7].
    #[arg(long = "H", visible_alias = "hurst")]
    hurst: Option<f64>,
    /// Drift coefficient [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Observation gain [default: 1].
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Observation horizon [default: 1].
    #[arg(long = "T", visible_alias = "horizon")]
    horizon: Option<f64>,
    /// Gauss-Legendre nodes of the unit-interval grid [default: 1000].
    #[arg(long)]
    grid: Option<usize>,
    /// Graded levels of the semi-axis grid of the refined solver [default: 40].
    #[arg(long)]
    n_semi: Option<usize>,
    /// Gauss-Legendre order of each kernel integral [default: 64].
    #[arg(long)]
    gl_order: Option<usize>,
}

impl ModelArgs {
    fn apply(&self, c: &mut RunConfig) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut c.hurst, self.hurst);
        set(&mut c.beta, self.beta);
        set(&mut c.mu, self.mu);
        set(&mut c.horizon, self.horizon);
        if let Some(v) = self.grid {
            c.n_unit = v;
        }
        if let Some(v) = self.n_semi {
            c.n_semi = v;
        }
        if let Some(v) = self.gl_order {
            c.gl_order = v;
        }
    }
}

/// Failure of a run, with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error("{} stage: {}", .0.stage(), .0)]
    Solver(fracspec::Error),
    #[error("{failed} of {total} checks failed")]
    Validation { failed: usize, total: usize },
}

impl From<fracspec::Error> for CliError {
    fn from(e: fracspec::Error) -> Self {
        match e {
            fracspec::Error::Domain(msg) => CliError::Usage(format!("invalid parameter: {msg}")),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Solver(fracspec::Error::Truncation(_)) => 4,
            CliError::Solver(_) => 3,
        }
    }
}

/// Name of the subcommand and the effective configuration.
fn resolve(cli: &Cli) -> Result<(&'static str, RunConfig), CliError> {
    let mut c = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        c.apply_file(&text)?;
    }
    if cli.threads.is_some() {
        c.threads = cli.threads;
    }
    if cli.format.is_some() {
        c.format = cli.format;
    }
    if cli.output.is_some() {
        c.output = cli.output.clone();
    }
    let name = match &cli.command {
        Command::Eigs { model, n_max, no_refine } => {
            model.apply(&mut c);
            if n_max.is_some() {
                c.n_max = *n_max;
            }
            c.no_refine |= no_refine;
            "eigs"
        }
        Command::Mse { model, eps, u, spectrum, n_max, wiener_hopf } => {
            model.apply(&mut c);
            if let Some(v) = eps {
                c.eps = v.clone();
            }
            if let Some(v) = u {
                c.u = v.clone();
            }
            if let Some(v) = spectrum {
                c.spectrum = *v;
            }
            if n_max.is_some() {
                c.n_max = *n_max;
            }
            c.wiener_hopf |= wiener_hopf;
            "mse"
        }
        Command::Special { model, nu, points } => {
            model.apply(&mut c);
            if nu.is_some() {
                c.nu = *nu;
            }
            if let Some(v) = points {
                c.points = v.clone();
            }
            "special"
        }
        Command::Validate { quick, checks } => {
            c.quick |= quick;
            if let Some(v) = checks {
                c.checks = v.clone();
            }
            "validate"
        }
    };
    Ok((name, c))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let (name, cfg) = resolve(cli)?;
    if let Some(path) = &cli.save_config {
        std::fs::write(path, cfg.to_file_string()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let (text, outcome) = match name {
        "eigs" => (commands::eigs(&cfg)?, Ok(())),
        "mse" => (commands::mse(&cfg)?, Ok(())),
        "special" => (commands::special(&cfg)?, Ok(())),
        _ => commands::validate(&cfg)?,
    };
    match &cfg.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fracspec: {e}");
            ExitCode::from(e.code())
        }
    }
}
