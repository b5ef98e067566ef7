//! Batch front end: `analyze`, `sensitivity` and `synth` subcommands.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 invalid configuration or
//! arguments, 3 invalid data. Failures are reported as one JSON object on
//! stderr.

pub mod analyze;
pub mod config;
pub mod sensitivity;
pub mod tables;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::ingest::IngestError;
use crate::scopes::ScopeError;
use crate::synthetic::{self, DatasetSpec, SynthError, RNG_NAME};

pub use analyze::{
    analyze_dataset, build_manifest, load_dataset, write_outputs, AnalysisOutput, RunManifest,
};
pub use config::{canonical_json, content_hash, RunConfig};
pub use sensitivity::{run_sensitivity, SensitivityReport, SweepParam};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{message}")]
    Config {
        field: Option<String>,
        message: String,
    },
    #[error("{message}")]
    Data { message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn config(field: Option<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data {
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } => 2,
            CliError::Data { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Config { .. } => "config",
            CliError::Data { .. } => "data",
        }
    }

    /// Machine-readable report written to stderr.
    pub fn to_json(&self) -> String {
        let field = match self {
            CliError::Config { field, .. } => field.clone(),
            _ => None,
        };
        json!({
            "status": "error",
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "field": field,
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<ScopeError> for CliError {
    fn from(e: ScopeError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Ingest(_) => CliError::data(e.to_string()),
            _ => CliError::config(Some("spec".into()), e.to_string()),
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    fs::write(path, contents).map_err(io_err)
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::config(Some("--config".into()), format!("{}: {e}", path.display()))
    })?;
    RunConfig::from_json(&text)
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn input_text(bytes: &[u8]) -> Result<&str, CliError> {
    std::str::from_utf8(bytes).map_err(|e| CliError::data(format!("input is not UTF-8: {e}")))
}

fn resolve(
    flag: Option<PathBuf>,
    from_config: &Option<PathBuf>,
    name: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| from_config.clone()).ok_or_else(|| {
        CliError::config(
            Some(name.to_string()),
            format!("no {name} given on the command line or in the config"),
        )
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "causalkit",
    version,
    about = "Epsilon-machine and complexity-signature analysis of panel time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: signatures, strata, clusters, pooled machines, manifest.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one machine JSON per (dyad, variable).
        #[arg(long)]
        emit_dyad_machines: bool,
    },
    /// Re-run the analysis for each value of one parameter.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        /// One of k, delta, l_max.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic panel dataset from a JSON spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            config,
            input,
            out,
            emit_dyad_machines,
        } => {
            let cfg = read_config(&config)?;
            let input = resolve(input, &cfg.input_path, "input")?;
            let out = resolve(out, &cfg.output_dir, "output directory")?;
            run_analyze(cfg, &input, &out, emit_dyad_machines)
        }
        Command::Sensitivity {
            config,
            param,
            values,
            input,
            out,
        } => {
            let cfg = read_config(&config)?;
            let input = resolve(input, &cfg.input_path, "input")?;
            let out = resolve(out, &cfg.output_dir, "output directory")?;
            run_sensitivity_cmd(cfg, &input, &out, param, &values)
        }
        Command::Synth { spec, out } => run_synth(&spec, &out),
    }
}

pub fn run_analyze(
    mut cfg: RunConfig,
    input: &Path,
    out_dir: &Path,
    emit_dyad_machines: bool,
) -> Result<(), CliError> {
    let seed_from_env = cfg.apply_seed_env()?;
    cfg.validate()?;
    let bytes = read_input(input)?;
    let ds = load_dataset(input_text(&bytes)?, &cfg)?;
    log::info!("loaded {} records for {} dyads", ds.len(), ds.n_dyads());
    let output = analyze_dataset(&cfg, &ds)?;
    let manifest = build_manifest("analyze", &cfg, seed_from_env, &bytes, &ds, &output);
    write_outputs(out_dir, &cfg, &manifest, &output, emit_dyad_machines)
}

pub fn run_sensitivity_cmd(
    mut cfg: RunConfig,
    input: &Path,
    out_dir: &Path,
    param: SweepParam,
    values: &[String],
) -> Result<(), CliError> {
    let seed_from_env = cfg.apply_seed_env()?;
    cfg.validate()?;
    let bytes = read_input(input)?;
    let ds = load_dataset(input_text(&bytes)?, &cfg)?;
    let report = run_sensitivity(&cfg, &ds, param, values)?;
    sensitivity::write_sensitivity(out_dir, &cfg, seed_from_env, &bytes, &report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub tool: analyze::ToolInfo,
    pub spec: DatasetSpec,
    pub spec_hash: String,
    pub seed: u64,
    pub rng: String,
    pub n_records: usize,
    pub csv_sha256: String,
}

/// Writes the dataset CSV to `out` and its manifest to `<out>.manifest.json`.
pub fn run_synth(spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(spec_path).map_err(|e| {
        CliError::config(
            Some("--spec".into()),
            format!("{}: {e}", spec_path.display()),
        )
    })?;
    let spec: DatasetSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::config(Some("spec".into()), format!("invalid dataset spec: {e}")))?;
    let ds = synthetic::gen_dyad_dataset(&spec)?;
    let csv = ds.to_csv();
    write_file(out, &csv)?;
    let manifest = SynthManifest {
        tool: analyze::ToolInfo::default(),
        spec_hash: content_hash(&spec),
        seed: spec.seed,
        rng: RNG_NAME.into(),
        n_records: ds.len(),
        csv_sha256: config::sha256_hex(csv.as_bytes()),
        spec,
    };
    let mut manifest_path = out.as_os_str().to_owned();
    manifest_path.push(".manifest.json");
    write_file(Path::new(&manifest_path), &analyze::pretty_json(&manifest))
}
