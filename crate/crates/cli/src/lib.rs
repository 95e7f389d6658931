//! Command-line driver: loads a configuration, runs one workflow and writes
//! its tables and reports under the output directory.

use std::path::PathBuf;

use bgk_ness::config::RunConfig;
use bgk_ness::BgkError;
use clap::{Parser, Subcommand};

pub mod commands;
pub mod output;

/// Reference configuration with every default documented inline.
pub const REFERENCE_CONFIG: &str = include_str!("reference.toml");

#[derive(Debug, Parser)]
#[command(name = "bgk-ness", version, about = "Steady states of the 1-D nonlinear BGK equation between diffusive walls")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run even when the admissibility condition fails.
    #[arg(long, global = true)]
    pub force: bool,
    /// Monte Carlo seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the steady state and write profile, fixed-point and diagnostics reports.
    Solve,
    /// Simulate the particle process and compare against the deterministic solution.
    Mc {
        /// Profile table from `solve` to freeze instead of solving first.
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Solve at every `[sweep]` point and fit the approach to √(T₁T₂).
    Sweep,
    /// Solve, then run every bracket and diagnostic check.
    Validate,
    /// Print the reference configuration.
    DefaultConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Condition(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("solver error: {0}")]
    Solver(BgkError),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Condition(_) | CliError::Io { .. } => 2,
            CliError::NonConvergence(_) | CliError::Solver(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<BgkError> for CliError {
    fn from(e: BgkError) -> Self {
        match e {
            BgkError::Config(msg) => CliError::Config(msg),
            BgkError::Domain(_) => CliError::Config(e.to_string()),
            BgkError::Condition(_) => CliError::Condition(e.to_string()),
            BgkError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

/// Configuration after command-line overrides, validated.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml_str(&text)?
        }
        None => RunConfig::default(),
    };
    if cli.force {
        config.fixed_point.force = true;
    }
    if let Some(seed) = cli.seed {
        config.monte_carlo.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(w) = cli.workers {
        config.output.workers = w;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::DefaultConfig = cli.command {
        print!("{REFERENCE_CONFIG}");
        return Ok(());
    }
    let config = effective_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.output.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", config.output.workers)))?;
    let ctx = commands::Context::new(config)?;
    pool.install(|| match &cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Mc { profile } => commands::mc(&ctx, profile.as_deref()),
        Command::Sweep => commands::sweep(&ctx),
        Command::Validate => commands::validate(&ctx),
        Command::DefaultConfig => unreachable!(),
    })
}

/// Runs the command and maps the outcome to a process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bgk-ness: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs them as the binary would.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => main_with(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}
