//! Config-driven runner for the qspe-learn toolkit.
//!
//! A run reads one JSON config (or the manifest of an earlier run), executes
//! a scenario and writes `report.json`, an optional `<scenario>.csv` and
//! `manifest.json` into the output directory. Files are staged and renamed
//! into place only after the scenario completes.

pub mod config;
pub mod scenarios;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use qspe_learn::model::HamiltonianSpec;
use serde::{Deserialize, Serialize};

use config::{config_hash, Diagnostic, Manifest, RunConfig, Scenario, SCHEMA};
use scenarios::{Results, Table};

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "QSPE_LEARN_OUTPUT";

/// Output directory used when nothing else is given.
pub const DEFAULT_OUTPUT: &str = "qspe-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub seed: u64,
    pub config_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<HamiltonianSpec>,
    pub warnings: Vec<String>,
    pub results: Results,
}

/// Run failure, split by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid configuration (exit 2).
    Config(String),
    /// The scenario or output stage failed (exit 1).
    Scenario(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Scenario(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Scenario(e) => write!(f, "scenario failed: {e:#}"),
        }
    }
}

impl std::error::Error for Failure {}

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

/// Files written by a successful run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub report: PathBuf,
    pub table: Option<PathBuf>,
    pub manifest: PathBuf,
}

/// Output directory: flag, then config, then environment, then default.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

/// Parses and checks a config without running it.
pub fn validate(path: &Path) -> Result<Vec<Diagnostic>, Failure> {
    let input = config::load(path).map_err(|e| Failure::Config(e.to_string()))?;
    Ok(input.into_config().diagnostics())
}

/// Loads, validates and resolves the config to run.
fn prepare(args: &RunArgs) -> Result<(RunConfig, PathBuf, Vec<Diagnostic>), Failure> {
    let mut cfg = config::load(&args.config)
        .map_err(|e| Failure::Config(e.to_string()))?
        .into_config();
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let diags = cfg.diagnostics();
    let errors: Vec<String> = diags.iter().filter(|d| d.is_error()).map(ToString::to_string).collect();
    if !errors.is_empty() {
        return Err(Failure::Config(errors.join("; ")));
    }
    let dir = output_dir(args.output.as_deref(), cfg.output.as_deref());
    // The output location is not part of the experiment.
    cfg.output = None;
    Ok((cfg, dir, diags))
}

fn table_csv(table: &Table) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    Ok(w.into_inner()?)
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let path = dir.join(name);
    tmp.persist(&path)?;
    Ok(path)
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Executes a config or manifest and writes its artifacts.
pub fn run(args: &RunArgs) -> Result<Artifacts, Failure> {
    let (cfg, dir, diags) = prepare(args)?;
    for d in &diags {
        log::warn!("{d}");
    }
    let hash = config_hash(&cfg);
    let (spec, results, table) = scenarios::execute(&cfg).map_err(Failure::Scenario)?;
    let report = Report {
        schema: SCHEMA,
        seed: cfg.seed,
        config_sha256: hash.clone(),
        spec,
        warnings: diags.iter().map(ToString::to_string).collect(),
        results,
    };
    let manifest = Manifest {
        schema: SCHEMA,
        scenario: cfg.scenario,
        seed: cfg.seed,
        config_sha256: hash,
        config: cfg,
    };
    write_all(&dir, manifest.scenario, &report, table.as_ref(), &manifest).map_err(Failure::Scenario)
}

fn write_all(
    dir: &Path,
    scenario: Scenario,
    report: &Report,
    table: Option<&Table>,
    manifest: &Manifest,
) -> anyhow::Result<Artifacts> {
    // Serialize everything before touching the output directory.
    let report_bytes = json_bytes(report)?;
    let table_bytes = table.map(table_csv).transpose()?;
    let manifest_bytes = json_bytes(manifest)?;
    std::fs::create_dir_all(dir)?;
    let report = write_atomic(dir, "report.json", &report_bytes)?;
    let table = match table_bytes {
        Some(b) => Some(write_atomic(dir, &format!("{}.csv", scenario.name()), &b)?),
        None => None,
    };
    let manifest = write_atomic(dir, "manifest.json", &manifest_bytes)?;
    Ok(Artifacts {
        dir: dir.to_path_buf(),
        report,
        table,
        manifest,
    })
}
