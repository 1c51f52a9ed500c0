//! Batch entry points behind the `ontocohort` binary: fixture generation,
//! the filter/augment/evaluate pipeline and the HTTP service.

pub mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};

use ontocohort::cohort::synth::{generate_synthetic, SynthConfig, SynthManifest};
use ontocohort::cohort::{load_data_dir, DataDir};
use ontocohort::DataError;
use ontocohort_service::{AppState, ServiceConfig, Session};
use serde::de::DeserializeOwned;
use thiserror::Error;

pub use pipeline::{
    run, write_report, AugmentConfig, AugmentEntry, RunOptions, RunOutcome, RunReport,
};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or config files.
    #[error("config error: {0}")]
    Config(String),
    /// The outside world got in the way: unwritable output, busy port.
    #[error("environment error: {0}")]
    Environment(String),
    /// Input data failed to load or validate.
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Environment(_) => 3,
            Self::Data(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidConfig(_) => Self::Config(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

/// Reads and parses a JSON config file; any failure is a config error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn load_data(dir: &Path) -> Result<DataDir, CliError> {
    Ok(load_data_dir(dir)?)
}

/// Writes a generated fixture to `out` and returns its manifest.
pub fn generate(config: &Path, seed: u64, out: &Path) -> Result<SynthManifest, CliError> {
    let config: SynthConfig = read_json(config)?;
    let data = generate_synthetic(&config, seed)?;
    data.write_to(out).map_err(|e| match e {
        DataError::Io { .. } => CliError::Environment(e.to_string()),
        other => other.into(),
    })?;
    Ok(data.manifest)
}

#[derive(Clone, Debug)]
pub struct ServeOptions {
    pub data: PathBuf,
    pub listen: String,
    pub body_limit: usize,
}

/// Preloads `data`, binds `listen` and serves until the process is stopped.
pub async fn serve(opts: &ServeOptions) -> Result<(), CliError> {
    let data = load_data(&opts.data)?;
    let session = Session::from_data_dir(data).map_err(|e| CliError::Data(e.body.message))?;
    let listener = tokio::net::TcpListener::bind(&opts.listen)
        .await
        .map_err(|e| CliError::Environment(format!("cannot listen on {}: {e}", opts.listen)))?;
    let addr = listener
        .local_addr()
        .map_err(|e| CliError::Environment(e.to_string()))?;
    tracing::info!(%addr, "serving");
    let config = ServiceConfig {
        body_limit: opts.body_limit,
    };
    ontocohort_service::serve(listener, AppState::with_session(session), &config)
        .await
        .map_err(|e| CliError::Environment(e.to_string()))
}
