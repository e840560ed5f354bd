//! Batch runner behind the `ptomo` binary.
//!
//! Each subcommand is a pure function from a [`RunConfig`] to a set of
//! [`Artifact`]s (file name plus contents); [`write_outcome`] puts them on
//! disk. Tables are CSV; every file starts with a `# config_hash=` line.

pub mod commands;
pub mod config;

pub use commands::{Command, Outcome};
pub use config::{Overrides, RunConfig};

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("numeric failure: {0}")]
    Numeric(#[from] ptomo_core::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) | CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, hash: &str) -> String {
        let mut s = format!("# config_hash={hash}\n{}\n", self.header.join(","));
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Writes every artifact into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents).map_err(|e| io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Writes the outcome's files, then reports non-convergence if any step
/// failed to converge (the partial outputs stay on disk).
pub fn write_outcome(cfg: &RunConfig, outcome: &Outcome) -> Result<Vec<PathBuf>, CliError> {
    let paths = write_artifacts(&cfg.output_dir, &outcome.artifacts)?;
    if !outcome.nonconverged.is_empty() {
        return Err(CliError::NonConvergence(outcome.nonconverged.join("; ")));
    }
    Ok(paths)
}

/// Runs a subcommand and writes its outputs.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let outcome = commands::execute(command, cfg)?;
    write_outcome(cfg, &outcome)?;
    Ok(outcome)
}
