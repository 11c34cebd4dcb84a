//! Seeded, reproducible experiments over the `s3bell` library.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod table;

pub use config::{Estimator, Experiment, ExperimentConfig, Format, Model, Overrides};
pub use experiments::{compare_models, run, Artifact, Envelope};
pub use table::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "s3bell", version, about = "S³ singlet-correlation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Correlation curve over an angle grid
    Curve(Overrides),
    /// CHSH value at a settings quad
    Chsh(Overrides),
    /// S³ and ℝP³ geodesic distances from the identity
    Geodesic(Overrides),
    /// Enumerated bounds of the CHSH-type expressions
    Bounds(Overrides),
    /// Joint, single and zero-event probabilities over the grid
    Probabilities(Overrides),
    /// S³ ensemble and flat sign model side by side
    FlatVsS3(Overrides),
}

impl Command {
    pub fn split(self) -> (Experiment, Overrides) {
        match self {
            Command::Curve(o) => (Experiment::Curve, o),
            Command::Chsh(o) => (Experiment::Chsh, o),
            Command::Geodesic(o) => (Experiment::Geodesic, o),
            Command::Bounds(o) => (Experiment::Bounds, o),
            Command::Probabilities(o) => (Experiment::Probabilities, o),
            Command::FlatVsS3(o) => (Experiment::FlatVsS3, o),
        }
    }
}

/// Run on the configured worker pool, or the global one.
pub fn execute(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    match config.workers {
        None => run(config),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {w} workers: {e}")))?
            .install(|| run(config)),
    }
}

/// Execute and write the artifact to `--out` or `stdout`.
pub fn execute_and_write(
    config: &ExperimentConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let artifact = execute(config)?;
    match &config.out {
        Some(path) => fs::write(path, &artifact.text).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?,
        None => stdout
            .write_all(artifact.text.as_bytes())
            .map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                source: e,
            })?,
    }
    for line in &artifact.summary {
        let _ = writeln!(stderr, "{line}");
    }
    Ok(())
}

/// Full command line handling; returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
            } else {
                let _ = write!(stdout, "{}", e.render());
            }
            return code;
        }
    };
    let (experiment, flags) = cli.command.split();
    let result = ExperimentConfig::resolve(experiment, flags)
        .and_then(|c| execute_and_write(&c, stdout, stderr));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "s3bell: {e}");
            e.exit_code()
        }
    }
}
