//! Scenario runner behind the `fdr` binary.
//!
//! Every subcommand reads one [`Scenario`], writes fixed-header CSV files
//! plus a `<command>.json` result into the output directory, prints a short
//! summary and maps its outcome onto exit code 0 (ok), 1 (violation) or
//! 2 (configuration error).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

mod commands;
pub mod scenario;

pub use scenario::{DriftSpec, GridSpec, ModelSpec, Scenario, SimSpec};

pub const OUTPUT_DIR_ENV: &str = "FDR_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "fdr-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fdr_core::Error),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use fdr_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::Dimension(_) | E::InvalidArgument(_) | E::PathFormat(_) | E::Io(_) | E::ContractInDelivery { .. } => 2,
                _ => 1,
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CheckDrift,
    SccProbe,
    DetectAffine,
    Simulate,
    Price,
    MartingaleTest,
    EstimateVol,
    Reconstruct,
    SccLoop,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::CheckDrift,
        Command::SccProbe,
        Command::DetectAffine,
        Command::Simulate,
        Command::Price,
        Command::MartingaleTest,
        Command::EstimateVol,
        Command::Reconstruct,
        Command::SccLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::CheckDrift => "check-drift",
            Command::SccProbe => "scc-probe",
            Command::DetectAffine => "detect-affine",
            Command::Simulate => "simulate",
            Command::Price => "price",
            Command::MartingaleTest => "martingale-test",
            Command::EstimateVol => "estimate-vol",
            Command::Reconstruct => "reconstruct",
            Command::SccLoop => "scc-loop",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Command-line values that take precedence over the scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub tolerance: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(sim) = scenario.sim.as_mut() {
            if let Some(seed) = self.seed {
                sim.seed = seed;
            }
            if let Some(n) = self.n_paths {
                sim.n_paths = n;
            }
        }
        if self.tolerance.is_some() {
            scenario.tolerance = self.tolerance;
        }
    }
}

/// Flag, then scenario, then `FDR_OUTPUT_DIR`, then `fdr-out`.
pub fn resolve_output_dir(flag: Option<&Path>, scenario: &Scenario, env: Option<&str>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| scenario.output_dir.clone())
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Violation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Violation => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub command: Command,
    pub status: Status,
    /// One-line verdicts, in the order they were printed.
    pub verdicts: Vec<String>,
    /// Machine-readable copy of every number in the summary.
    pub data: serde_json::Value,
    pub artifacts: Vec<PathBuf>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

pub(crate) struct Output {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub(crate) fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.artifacts.push(p.clone());
        p
    }

    pub(crate) fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let fail = |e: csv::Error| CliError::Io {
            path: path.clone(),
            message: e.to_string(),
        };
        w.write_record(header).map_err(fail)?;
        for r in rows {
            w.write_record(r).map_err(fail)?;
        }
        w.flush().map_err(io_err(&path))?;
        Ok(())
    }

    pub(crate) fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).expect("serialisable");
        std::fs::write(&path, text + "\n").map_err(io_err(&path))
    }
}

/// What a subcommand hands back before timing and persistence.
pub(crate) struct Outcome {
    pub status: Status,
    pub verdicts: Vec<String>,
    pub data: serde_json::Value,
}

/// Runs `command`, writing artifacts into `output_dir`.
pub fn run(command: Command, scenario: &Scenario, output_dir: &Path) -> Result<RunResult, CliError> {
    let start = Instant::now();
    let mut out = Output::new(output_dir)?;
    let outcome = commands::dispatch(command, scenario, &mut out)?;
    let mut timings_ms = BTreeMap::new();
    timings_ms.insert("total".to_string(), start.elapsed().as_secs_f64() * 1e3);
    let result_path = out.path(&format!("{}.json", command.name()));
    let result = RunResult {
        command,
        status: outcome.status,
        verdicts: outcome.verdicts,
        data: outcome.data,
        artifacts: out.artifacts.clone(),
        timings_ms,
    };
    let text = serde_json::to_string_pretty(&result).expect("serialisable");
    std::fs::write(&result_path, text + "\n").map_err(io_err(&result_path))?;
    Ok(result)
}

/// Reads, overrides and runs a scenario file; the whole CLI minus argument
/// parsing and printing.
pub fn run_file(
    command: Command,
    scenario_path: &Path,
    overrides: &Overrides,
    env_output_dir: Option<&str>,
) -> Result<RunResult, CliError> {
    let text = std::fs::read_to_string(scenario_path).map_err(|e| CliError::Config(format!("{}: {e}", scenario_path.display())))?;
    let mut scenario = Scenario::from_json(&text)?;
    overrides.apply(&mut scenario);
    let dir = resolve_output_dir(overrides.output_dir.as_deref(), &scenario, env_output_dir);
    run(command, &scenario, &dir)
}
