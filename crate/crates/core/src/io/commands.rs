//! File-level stages: simulate to a data directory, run estimators on a data directory,
//! evaluate solution files.

use super::formats::*;
use super::{read_file, write_file, IoError};
use crate::config::{ScenarioConfig, TrajectorySource};
use crate::fivegfix::run_5g_standalone;
use crate::fusion::run_fusion;
use crate::ins::run_ins_standalone;
use crate::metrics::{cdf_csv, emit_cdf};
use crate::pipeline::{evaluate, initial_state, simulate_on, synthetic_truth, Evaluation, PipelineError};
use crate::scenario::{ConnectivityStats, Trajectory};
use crate::sensors::epoch_grid;
use crate::solution::{NavSolution, SolutionSource};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// File names inside data, run and evaluation directories.
pub mod files {
    pub const TRAJECTORY: &str = "trajectory.csv";
    pub const SITES: &str = "sites.csv";
    pub const VISIBILITY: &str = "visibility.csv";
    pub const FIVEG: &str = "fiveg.jsonl";
    pub const IMU: &str = "imu.csv";
    pub const ODOMETER: &str = "odometer.csv";
    pub const CONNECTIVITY: &str = "connectivity.json";
    pub const MANIFEST: &str = "manifest.json";
    pub const FIVEG_SA: &str = "5g_sa.csv";
    pub const DETECTOR: &str = "5g_sa_detector.jsonl";
    pub const INS_SA: &str = "ins_sa.csv";
    pub const FUSED: &str = "fused.csv";
    pub const FUSED_EVENTS: &str = "fused_events.jsonl";
    pub const OUTAGES: &str = "outages.json";
    pub const TABLE: &str = "table.txt";
}

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance of a simulated data directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub config_sha256: String,
    pub files: Vec<ManifestFile>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical TOML rendering of a resolved config.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    sha256_hex(cfg.to_toml_string().as_bytes())
}

/// Which estimators `cmd_run` executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    FiveGSa,
    InsSa,
    Fused,
    All,
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "5g-sa" => Ok(RunMode::FiveGSa),
            "ins-sa" => Ok(RunMode::InsSa),
            "fused" => Ok(RunMode::Fused),
            "all" => Ok(RunMode::All),
            _ => Err(format!("unknown mode `{s}`, expected 5g-sa, ins-sa, fused or all")),
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::FiveGSa => "5g-sa",
            RunMode::InsSa => "ins-sa",
            RunMode::Fused => "fused",
            RunMode::All => "all",
        })
    }
}

/// File stem used for per-solution evaluation outputs.
pub fn slug(source: SolutionSource) -> &'static str {
    match source {
        SolutionSource::FiveGStandalone => "5g_sa",
        SolutionSource::InsStandalone => "ins_sa",
        SolutionSource::Fused => "fused",
    }
}

fn parse_at<T>(path: &Path, f: impl Fn(&[u8]) -> Result<T, ParseError>) -> Result<T, PipelineError> {
    let data = read_file(path)?;
    f(&data).map_err(|source| IoError::Parse { path: path.to_path_buf(), source }.into())
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

/// Truth trajectory named by the config; relative file paths resolve against `base`.
pub fn load_truth(cfg: &ScenarioConfig, base: Option<&Path>) -> Result<Trajectory, PipelineError> {
    match &cfg.scenario.trajectory {
        TrajectorySource::File { path } => parse_at(&resolve(base, path), parse_trajectory),
        _ => synthetic_truth(cfg),
    }
}

/// Config with any building file merged into the inline building list.
pub fn resolve_buildings(cfg: &ScenarioConfig, base: Option<&Path>) -> Result<ScenarioConfig, PipelineError> {
    let mut cfg = cfg.clone();
    if let Some(p) = cfg.visibility.buildings_file.take() {
        let zone = cfg.zone()?;
        let more = parse_at(&resolve(base, &p), |d| parse_buildings(d, zone))?;
        cfg.visibility.buildings.extend(more);
    }
    Ok(cfg)
}

/// Simulates every sensor and writes the data directory with its manifest.
pub fn cmd_simulate(cfg: &ScenarioConfig, base: Option<&Path>, out: &Path) -> Result<Manifest, PipelineError> {
    let truth = load_truth(cfg, base)?;
    let sim = simulate_on(&resolve_buildings(cfg, base)?, truth)?;
    let outputs = [
        (files::TRAJECTORY, write_trajectory(&sim.truth)),
        (files::SITES, write_sites(&sim.sites)),
        (files::VISIBILITY, write_visibility(sim.model.windows())),
        (files::FIVEG, write_meas5g(&sim.fiveg)),
        (files::IMU, write_imu(&sim.imu.samples)),
        (files::ODOMETER, write_odo(&sim.odo)),
        (files::CONNECTIVITY, to_json(&sim.connectivity)),
    ];
    let mut manifest = Manifest { version: MANIFEST_VERSION, seed: cfg.seed, config_sha256: config_hash(cfg), files: Vec::new() };
    for (name, text) in outputs {
        write_file(&out.join(name), text.as_bytes())?;
        manifest.files.push(ManifestFile { name: name.to_string(), bytes: text.len() as u64, sha256: sha256_hex(text.as_bytes()) });
    }
    write_file(&out.join(files::MANIFEST), to_json(&manifest).as_bytes())?;
    Ok(manifest)
}

fn check_manifest(cfg: &ScenarioConfig, data: &Path) -> Result<(), PipelineError> {
    let path = data.join(files::MANIFEST);
    if !path.exists() {
        return Ok(());
    }
    let m: Manifest =
        parse_at(&path, |d| serde_json::from_slice(d).map_err(|e| ParseError { line: e.line() as u64, message: e.to_string() }))?;
    if m.config_sha256 != config_hash(cfg) {
        log::warn!("{} was produced with a different config (seed {}); results may not match it", path.display(), m.seed);
    }
    Ok(())
}

fn required(dir: &Path, name: &str, hint: &str) -> Result<PathBuf, PipelineError> {
    let p = dir.join(name);
    if p.exists() {
        Ok(p)
    } else {
        Err(PipelineError::Data(format!("missing input file {}; {hint}", p.display())))
    }
}

/// Runs the selected estimators on a data directory and writes their solutions to `out`.
/// Returns the written paths.
pub fn cmd_run(cfg: &ScenarioConfig, mode: RunMode, data: &Path, out: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    cfg.validate()?;
    check_manifest(cfg, data)?;
    let zone = cfg.zone()?;
    let hint = "run `simulate` first or provide the file in the documented format";
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<(), PipelineError> {
        let p = out.join(name);
        write_file(&p, text.as_bytes())?;
        written.push(p);
        Ok(())
    };
    let truth = || parse_at(&required(data, files::TRAJECTORY, hint)?, parse_trajectory);

    if matches!(mode, RunMode::FiveGSa | RunMode::All) {
        let sites = parse_at(&required(data, files::SITES, hint)?, parse_sites)?;
        let meas = parse_at(&required(data, files::FIVEG, hint)?, parse_meas5g)?;
        let (t0, t1) = match data.join(files::TRAJECTORY).exists() {
            true => {
                let t = truth()?;
                (t.start_time(), t.end_time())
            }
            false => match (meas.first(), meas.last()) {
                (Some(a), Some(b)) => (a.t, b.t),
                _ => return Err(PipelineError::Data("5G measurement file is empty".into())),
            },
        };
        let epochs = epoch_grid(t0, t1, cfg.fiveg_fix.rate_hz);
        let run = run_5g_standalone(&meas, &sites, cfg.scenario.h_ue_m, &cfg.sensors.fiveg.path_loss, &cfg.fiveg_fix, &epochs, zone)?;
        emit(files::FIVEG_SA, write_solutions(&run.solutions))?;
        emit(files::DETECTOR, write_detector(&run.detector))?;
    }
    if mode == RunMode::InsSa || mode == RunMode::Fused || mode == RunMode::All {
        let truth = truth()?;
        let init = initial_state(cfg, &truth)?;
        let imu = parse_at(&required(data, files::IMU, hint)?, parse_imu)?;
        let odo = parse_at(&required(data, files::ODOMETER, hint)?, parse_odo)?;
        if mode != RunMode::Fused {
            let sols = run_ins_standalone(&init.nav, &imu, &odo, &cfg.sensors.wheel, &cfg.ins)?;
            emit(files::INS_SA, write_solutions(&sols))?;
        }
        if mode != RunMode::InsSa {
            let p = out.join(files::FIVEG_SA);
            if !p.exists() {
                return Err(PipelineError::Data(format!(
                    "fused mode needs the 5G-SA solution {}; run with --mode 5g-sa first",
                    p.display()
                )));
            }
            let fiveg = parse_at(&p, parse_solutions)?;
            let run = run_fusion(&init, &imu, &odo, &fiveg, &cfg.sensors.wheel, &cfg.fusion)?;
            emit(files::FUSED, write_fused_nav(&run.states))?;
            emit(files::FUSED_EVENTS, write_events(&run.events))?;
        }
    }
    Ok(written)
}

/// Groups solutions by source, rejecting a source that appears in two inputs.
fn group(inputs: Vec<Vec<NavSolution>>) -> Result<Vec<Vec<NavSolution>>, PipelineError> {
    let mut out: Vec<Vec<NavSolution>> = Vec::new();
    for sols in inputs {
        for src in SolutionSource::ALL {
            let part: Vec<NavSolution> = sols.iter().filter(|s| s.source == src).copied().collect();
            if part.is_empty() {
                continue;
            }
            if out.iter().any(|g| g[0].source == src) {
                return Err(PipelineError::Data(format!("solution source {src} given more than once")));
            }
            out.push(part);
        }
    }
    out.sort_by_key(|g| g[0].source);
    Ok(out)
}

/// Evaluates solution files against a truth trajectory. Outage statistics come from
/// `connectivity` when given.
pub fn cmd_eval(
    cfg: &ScenarioConfig,
    truth: &Path,
    connectivity: Option<&Path>,
    solutions: &[PathBuf],
    out: &Path,
) -> Result<Evaluation, PipelineError> {
    if solutions.is_empty() {
        return Err(PipelineError::Data("no solution files given".into()));
    }
    let truth = parse_at(truth, parse_trajectory)?;
    let stats = match connectivity {
        Some(p) => parse_at(p, |d| serde_json::from_slice(d).map_err(|e| ParseError { line: e.line() as u64, message: e.to_string() }))?,
        None => ConnectivityStats { fractions: Vec::new(), outages: Vec::new(), epochs: 0 },
    };
    let inputs = solutions.iter().map(|p| parse_at(p, parse_any_solutions)).collect::<Result<Vec<_>, _>>()?;
    let groups = group(inputs)?;
    let refs: Vec<&[NavSolution]> = groups.iter().map(Vec::as_slice).collect();
    let ev = evaluate(&truth, cfg.zone()?, &stats, &refs)?;
    for (report, series) in ev.reports.iter().zip(&ev.series) {
        let name = slug(report.label);
        write_file(&out.join(format!("report_{name}.json")), to_json(report).as_bytes())?;
        let cdf = emit_cdf(series, cfg.evaluation.cdf_points)?;
        write_file(&out.join(format!("cdf_{name}.csv")), cdf_csv(&cdf).as_bytes())?;
    }
    write_file(&out.join(files::OUTAGES), to_json(&ev.outages).as_bytes())?;
    write_file(&out.join(files::TABLE), ev.table.as_bytes())?;
    Ok(ev)
}

/// Simulate, run all three estimators and evaluate, under `out/data`, `out/run` and
/// `out/eval`.
pub fn cmd_pipeline(cfg: &ScenarioConfig, base: Option<&Path>, out: &Path) -> Result<Evaluation, PipelineError> {
    let (data, run, eval) = (out.join("data"), out.join("run"), out.join("eval"));
    cmd_simulate(cfg, base, &data)?;
    cmd_run(cfg, RunMode::All, &data, &run)?;
    let sols = [files::FIVEG_SA, files::INS_SA, files::FUSED].map(|f| run.join(f));
    cmd_eval(cfg, &data.join(files::TRAJECTORY), Some(&data.join(files::CONNECTIVITY)), &sols, &eval)
}
