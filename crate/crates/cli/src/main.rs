use clap::{Parser, Subcommand};
use softbolt_cli::{output, CliError, EXIT_PASS, EXIT_RUNTIME};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "softbolt",
    version,
    about = "Homogeneous Boltzmann solver and bound-verification runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write its artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Scenario preset, overriding the file's `scenario` key.
        #[arg(long)]
        scenario: Option<String>,
        /// `key.path=value` override; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Worker thread cap.
        #[arg(long)]
        threads: Option<usize>,
        /// Output root, overriding the file's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the bounds report of a run directory.
    Report { run_dir: PathBuf },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate {
            config,
            scenario,
            set,
            threads,
            out,
        } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build_global()
                    .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))?;
            }
            let cfg = softbolt_cli::load_config_with(&config, scenario.as_deref(), &set)?;
            let root = out.unwrap_or_else(|| cfg.output_dir.clone());
            let summary = softbolt_cli::simulate(&cfg, &root)?;
            print!("{}", output::render_report(&summary.dir)?);
            println!("artifacts in {}", summary.dir.display());
            if !summary.report.passed() {
                eprintln!("{} verdict(s) did not pass", summary.report.failures.len());
            }
            Ok(summary.exit_code())
        }
        Command::Validate { config } => {
            let cfg = softbolt_cli::load_config(&config)?;
            println!(
                "ok: scenario {}, N = {}, n = {}, n_sigma = {}, L = {}, gamma = {}",
                cfg.scenario_name(),
                cfg.grid.dim,
                cfg.grid.n,
                cfg.grid.n_sigma,
                cfg.grid.half_width,
                cfg.kernel.gamma
            );
            Ok(EXIT_PASS)
        }
        Command::Report { run_dir } => {
            print!("{}", output::render_report(&run_dir)?);
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_RUNTIME as u8))
}
