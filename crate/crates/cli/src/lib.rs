//! Experiment runner for the `softbolt` solver: configuration, scenario
//! presets, verdicts and artifact output.

pub mod config;
pub mod families;
pub mod output;
pub mod scenario;

pub use config::{load_config, load_config_with, parse_config, ConfigError, RunConfig};
pub use scenario::{execute, execute_detailed, BoundsReport, Outcome, Scenario, TrajectoryRun};

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] softbolt::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

/// Exit status of a finished run.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Core(softbolt::Error::InvalidConfig(_) | softbolt::Error::InvalidInput(_)) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Result of `simulate`: where the artifacts went and what they say.
#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub report: BoundsReport,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            EXIT_PASS
        } else {
            EXIT_VERDICT_FAILED
        }
    }
}

/// Executes `cfg` and writes its artifacts under `out_root`.
pub fn simulate(cfg: &RunConfig, out_root: &Path) -> Result<RunSummary, CliError> {
    let outcome = execute(cfg)?;
    let dir = cfg.run_dir(out_root);
    output::write_artifacts(&outcome, &dir)?;
    Ok(RunSummary {
        dir,
        report: outcome.report,
    })
}
