//! Command-line front end: `perfhom run <config.toml>`.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{write_report, Provenance};

#[derive(Debug, Parser)]
#[command(name = "perfhom", version, about = "Nonlocal diffusion on perforated domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a TOML configuration.
    Run {
        /// Path to the TOML run configuration.
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated field names to write under `fields/`.
        #[arg(long, value_delimiter = ',')]
        emit_fields: Vec<String>,
    },
    /// Parse a configuration and print it with defaults filled in.
    Check {
        /// Path to the TOML run configuration.
        config: PathBuf,
    },
}

fn load(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Check { config } => {
            print!("{}", load(&config)?.normalized());
            Ok(())
        }
        Command::Run {
            config,
            output_dir,
            emit_fields,
        } => {
            let cfg = load(&config)?;
            let dir = output_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.solver.threads)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            let outcome = pool.install(|| run::run(&cfg, &emit_fields))?;
            let provenance = Provenance {
                version: env!("CARGO_PKG_VERSION"),
                seed: cfg.solver.seed,
                timestamp: chrono::Utc::now().to_rfc3339(),
                threads: pool.current_num_threads(),
            };
            let written = write_report(
                &dir,
                cfg.experiment.name(),
                &cfg.normalized(),
                &outcome.report,
                &provenance,
                cfg.output.csv,
                cfg.output.summary,
            )?;
            for f in &outcome.report.findings {
                println!("finding: {f}");
            }
            for t in &outcome.report.tables {
                println!("{}: {} rows", t.name, t.rows.len());
            }
            for p in &written.files {
                println!("wrote {}", p.display());
            }
            match outcome.failure {
                Some(e) => Err(e),
                None => Ok(()),
            }
        }
    }
}
