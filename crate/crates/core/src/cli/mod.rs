//! Command-line front end: configuration, subcommand dispatch and CSV files.

mod commands;
mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{
    matrix, ControlsConfig, ImpulseConfig, ModelConfig, NeutralConfig, NonlinearityConfig,
    OutputConfig, QuadratureConfig, RunConfig, Setup, SigmaConfig, SynthesisConfig,
};

use crate::neutral::NeutralConvention;
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "impctl", version, about = "Impulsive evolution equations: simulation, Gramians and regularized control")]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Regularization parameter; also replaces the sweep schedule.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Preset name, replacing the config's model section.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    #[arg(long, global = true)]
    pub paper_literal_control: bool,
    #[arg(long, global = true, value_parser = parse_convention)]
    pub neutral_convention: Option<NeutralConvention>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Trajectory under the configured open-loop controls.
    Simulate,
    /// The controllability operators, eigenvalues and decay diagnostic.
    Gramian,
    /// Regularized control for `synthesis.alpha`.
    Synthesize,
    /// Closed-loop terminal identity residuals.
    Verify,
    /// Terminal error along the α schedule.
    Sweep,
    /// Impulsive/non-impulsive and controlled/uncontrolled trajectory pairs.
    Figures,
}

fn parse_convention(s: &str) -> Result<NeutralConvention, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("{0}")]
    NotConverged(Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } => CliError::NotConverged(e),
            e => CliError::Numerical(e),
        }
    }
}

/// Overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub model: Option<String>,
    pub jobs: usize,
    pub paper_literal_control: bool,
    pub neutral_convention: Option<NeutralConvention>,
}

impl From<&Cli> for Overrides {
    fn from(cli: &Cli) -> Self {
        Self {
            output: cli.output.clone(),
            alpha: cli.alpha,
            model: cli.model.clone(),
            jobs: cli.jobs as usize,
            paper_literal_control: cli.paper_literal_control,
            neutral_convention: cli.neutral_convention,
        }
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(dir) = &self.output {
            cfg.output.dir = dir.clone();
        }
        if let Some(a) = self.alpha {
            cfg.synthesis.alpha = a;
            cfg.synthesis.alphas = Some(vec![a]);
        }
        if let Some(name) = &self.model {
            cfg.model = ModelConfig {
                preset: Some(name.clone()),
                ..Default::default()
            };
        }
        if self.paper_literal_control {
            cfg.synthesis.paper_literal_control = true;
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            RunConfig::from_json(&text)
        }
    }
}

/// Runs `command` and returns the files written, in order.
pub fn run(command: Command, config: Option<&Path>, overrides: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = load_config(config)?;
    overrides.apply(&mut cfg);
    let alphas_given = cfg.synthesis.alphas.is_some();
    let mut setup = cfg.setup()?;
    if let Some(conv) = overrides.neutral_convention {
        match &setup.neutral {
            Some(n) => setup.neutral = Some(n.with_convention(conv)),
            None => log::warn!("--neutral-convention ignored: the model has no neutral term"),
        }
    }
    let out = commands::Output::create(&cfg.output.dir)?;
    let ctx = commands::Context {
        setup: &setup,
        out: &out,
        jobs: overrides.jobs.max(1),
        alphas_given,
    };
    match command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Gramian => commands::gramian(&ctx),
        Command::Synthesize => commands::synthesize(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Figures => commands::figures(&ctx),
    }
    .or_else(|e| match e {
        CliError::NotConverged(Error::NotConverged { ref history, .. }) => {
            out.write("iterate_history.csv", &commands::history_csv(history))?;
            Err(e)
        }
        e => Err(e),
    })?;
    Ok(out.written())
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli.command, cli.config.as_deref(), &Overrides::from(cli)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
