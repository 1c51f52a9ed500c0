use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ontocohort::LrConfig;
use ontocohort_cli::{generate, run, serve, write_report, CliError, RunOptions, ServeOptions};
use ontocohort_service::DEFAULT_BODY_LIMIT;
use tracing_subscriber::EnvFilter;

/// Ontology-guided cohort filtering, augmentation and evaluation.
#[derive(Parser)]
#[command(name = "ontocohort", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic ontology and visit dataset.
    Generate {
        /// Generator config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter, augment and evaluate, writing a JSON report and a text table.
    Run {
        /// Data directory as written by `generate`.
        #[arg(long)]
        data: PathBuf,
        /// Filter config (JSON).
        #[arg(long)]
        filter: PathBuf,
        /// Augment config (JSON): one run or a list of named runs.
        #[arg(long)]
        augment: PathBuf,
        /// Task name from the data manifest, or a label key.
        #[arg(long)]
        task: String,
        /// Report path; the table goes next to it with a .txt extension.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        cv_seed: u64,
        /// Sizes of the random baseline cohorts.
        #[arg(long, value_delimiter = ',', default_values_t = [3000, 6000, 8000])]
        random_sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        random_seed: u64,
    },
    /// Serve the HTTP API with a data directory preloaded.
    Serve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, env = "ONTOCOHORT_LISTEN", default_value = "127.0.0.1:8080")]
        listen: String,
        /// Request body limit in bytes.
        #[arg(long, env = "ONTOCOHORT_BODY_LIMIT", default_value_t = DEFAULT_BODY_LIMIT)]
        body_limit: usize,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let manifest = generate(&config, seed, &out)?;
            println!(
                "wrote {} nodes, {} visits to {}",
                manifest.node_count,
                manifest.visit_count,
                out.display()
            );
        }
        Command::Run {
            data,
            filter,
            augment,
            task,
            out,
            folds,
            cv_seed,
            random_sizes,
            random_seed,
        } => {
            let opts = RunOptions {
                data,
                filter,
                augment,
                task,
                folds,
                cv_seed,
                random_sizes,
                random_seed,
                lr: LrConfig::default(),
            };
            let outcome = run(&opts)?;
            for w in &outcome.report.warnings {
                tracing::warn!("{w}");
            }
            write_report(&outcome.report, &out)?;
            print!("{}", outcome.report.table());
        }
        Command::Serve {
            data,
            listen,
            body_limit,
        } => {
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| CliError::Environment(e.to_string()))?;
            runtime.block_on(serve(&ServeOptions {
                data,
                listen,
                body_limit,
            }))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
