//! In-memory orchestration: scenario, sensor simulation, the three estimators and
//! evaluation. File handling lives in `io`.

use crate::config::{ConfigError, ScenarioConfig};
use crate::fivegfix::{run_5g_standalone, FiveGRun, FixError};
use crate::fusion::{error_state, inject_error, run_fusion, FusionConfig, FusionError, FusionRun, FusionState, Vec15, ATT, POS};
use crate::geo::EarthOptions;
use crate::geo::{attitude_to_quaternion, GeoError, UtmZone};
use crate::ins::{on_grid, run_ins_standalone, InsError, MechState};
use crate::metrics::{
    compute_errors, compute_report_with_outages, outage_report, render_table, ErrorReport, ErrorSeries, MetricsError, OutageReport,
};
use crate::scenario::{
    build_schedule, connectivity_stats, deploy_bs, BsSite, ConnectivityStats, DeployError, Trajectory, TrajectoryError, VisibilityError,
    VisibilityMode, VisibilityModel,
};
use crate::sensors::{epoch_grid, gen_5g, gen_imu, gen_odo, stream_rng, streams, BiasState, ImuStream, Meas5G, OdoSample, SensorError};
use crate::solution::{NavSolution, SolutionSource};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Deploy(#[from] DeployError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Fix(#[from] FixError),
    #[error(transparent)]
    Ins(#[from] InsError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}

impl PipelineError {
    /// Process exit code: 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Fusion(FusionError::Config(_)) => 2,
            PipelineError::Fusion(FusionError::NotPsd(_))
            | PipelineError::Fusion(FusionError::Ins(InsError::Diverged(_)))
            | PipelineError::Ins(InsError::Diverged(_))
            | PipelineError::Fix(FixError::NotPsd) => 4,
            _ => 3,
        }
    }
}

/// Everything the simulator produces for one (config, seed).
#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: Trajectory,
    pub zone: UtmZone,
    pub sites: Vec<BsSite>,
    pub model: VisibilityModel,
    pub fiveg: Vec<Meas5G>,
    pub imu: ImuStream,
    pub odo: Vec<OdoSample>,
    pub fiveg_epochs: Vec<f64>,
    pub connectivity: ConnectivityStats,
}

/// Truth from the synthetic sources of the config. File trajectories are loaded by `io`.
pub fn synthetic_truth(cfg: &ScenarioConfig) -> Result<Trajectory, PipelineError> {
    let spec =
        cfg.track_spec().ok_or_else(|| PipelineError::Data("trajectory source is a file; load it with io::read_trajectory".into()))?;
    Ok(spec.generate()?)
}

/// Truth decimated to `rate_hz` epochs.
pub fn decimate(truth: &Trajectory, rate_hz: f64) -> Result<Trajectory, PipelineError> {
    Ok(Trajectory::new(truth.epochs().iter().copied().filter(|e| on_grid(e.t, rate_hz)).collect())?)
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<Simulation, PipelineError> {
    simulate_on(cfg, synthetic_truth(cfg)?)
}

/// Simulates every sensor along a given truth trajectory.
pub fn simulate_on(cfg: &ScenarioConfig, truth: Trajectory) -> Result<Simulation, PipelineError> {
    simulate_with_bias(cfg, truth, None)
}

/// As [`simulate_on`], with the IMU bias processes started at `initial_bias` instead of a
/// draw from their stationary distribution.
pub fn simulate_with_bias(cfg: &ScenarioConfig, truth: Trajectory, initial_bias: Option<BiasState>) -> Result<Simulation, PipelineError> {
    cfg.validate()?;
    let zone = cfg.zone()?;
    let s = &cfg.sensors;
    let d = &cfg.deployment;
    let sites = deploy_bs(&truth, zone, d.spacing_m, d.lateral_offset_m, d.height_m)?;
    let grid = decimate(&truth, s.fiveg_rate_hz)?;
    let v = &cfg.visibility;
    let model = match v.mode {
        VisibilityMode::Scheduled => {
            let mut rng = stream_rng(cfg.seed, streams::SCHEDULE);
            let windows = build_schedule(&sites, &grid, &cfg.outage_windows(), &v.random_nlos, v.max_range_m, &mut rng);
            VisibilityModel::scheduled(windows, v.max_range_m)?
        }
        VisibilityMode::Geometric => VisibilityModel::geometric(v.buildings.clone(), v.max_range_m, v.n_block)?,
    };
    let connectivity = connectivity_stats(&model, &sites, &grid);
    let fiveg = gen_5g(&truth, &sites, &model, &s.fiveg, s.fiveg_rate_hz, &mut stream_rng(cfg.seed, streams::FIVEG))?;
    let imu = gen_imu(&truth, &s.imu, s.imu_rate_hz, initial_bias, EarthOptions::default(), &mut stream_rng(cfg.seed, streams::IMU))?;
    let odo = gen_odo(&truth, &s.wheel, &s.odometer, s.odo_rate_hz, &mut stream_rng(cfg.seed, streams::ODO))?;
    let fiveg_epochs = epoch_grid(truth.start_time(), truth.end_time(), cfg.fiveg_fix.rate_hz);
    Ok(Simulation { truth, zone, sites, model, fiveg, imu, odo, fiveg_epochs, connectivity })
}

/// Truth navigation state at the first epoch.
pub fn truth_start(truth: &Trajectory) -> MechState {
    let e = truth.epochs()[0];
    MechState { pos: e.pos, v_l: e.v_l, q: attitude_to_quaternion(&e.att), t: e.t }
}

/// Initial estimate shared by the INS and fused solutions: the truth start displaced by a
/// draw from the configured initial position, velocity and attitude uncertainty. Biases
/// start at zero and the covariance is the configured prior.
pub fn initial_state(cfg: &ScenarioConfig, truth: &Trajectory) -> Result<FusionState, PipelineError> {
    let start = truth_start(truth);
    let p0 = cfg.fusion.initial.covariance();
    let mut rng = stream_rng(cfg.seed, streams::INIT);
    let mut dx = Vec15::zeros();
    for i in POS..ATT + 3 {
        let n: f64 = StandardNormal.sample(&mut rng);
        dx[i] = -p0[(i, i)].sqrt() * n;
    }
    let (nav, _) = inject_error(&start, &BiasState::zero(), &dx)?;
    Ok(FusionState::new(nav, BiasState::zero(), p0))
}

pub fn run_fiveg(cfg: &ScenarioConfig, sim: &Simulation) -> Result<FiveGRun, PipelineError> {
    Ok(run_5g_standalone(
        &sim.fiveg,
        &sim.sites,
        cfg.scenario.h_ue_m,
        &cfg.sensors.fiveg.path_loss,
        &cfg.fiveg_fix,
        &sim.fiveg_epochs,
        sim.zone,
    )?)
}

pub fn run_ins(cfg: &ScenarioConfig, sim: &Simulation, init: &FusionState) -> Result<Vec<NavSolution>, PipelineError> {
    Ok(run_ins_standalone(&init.nav, &sim.imu.samples, &sim.odo, &cfg.sensors.wheel, &cfg.ins)?)
}

pub fn run_fused(cfg: &ScenarioConfig, sim: &Simulation, init: &FusionState, fiveg: &[NavSolution]) -> Result<FusionRun, PipelineError> {
    Ok(run_fusion(init, &sim.imu.samples, &sim.odo, fiveg, &cfg.sensors.wheel, &cfg.fusion)?)
}

/// Unaided inertial propagation of `entry` over the IMU samples up to `t_end`, using the
/// same mechanization and bias model as the filter.
pub fn free_inertial(cfg: &ScenarioConfig, sim: &Simulation, entry: &FusionState, t_end: f64) -> Result<FusionState, PipelineError> {
    let end = sim.imu.samples.partition_point(|m| m.t <= t_end + 1e-9);
    let fcfg = FusionConfig { use_fiveg: false, use_odometer: false, ..cfg.fusion };
    let run = run_fusion(entry, &sim.imu.samples[..end], &[], &[], &cfg.sensors.wheel, &fcfg)?;
    Ok(run.states.last().copied().unwrap_or(*entry))
}

/// Fused and standalone errors over one scripted outage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageBridge {
    pub t_start: f64,
    pub t_end: f64,
    pub fused_max_m: f64,
    pub fiveg_max_m: f64,
    pub fused_exit_m: f64,
    /// Error at the same exit epoch of an unaided propagation from the fused entry state.
    pub free_inertial_exit_m: f64,
}

/// Compares the fused solution during each configured outage with 5G coasting and with
/// free-inertial propagation from the fused state at outage entry.
pub fn outage_bridges(
    cfg: &ScenarioConfig,
    sim: &Simulation,
    est: &Estimates,
    ev: &Evaluation,
) -> Result<Vec<OutageBridge>, PipelineError> {
    let fused = ev.series_for(SolutionSource::Fused).ok_or_else(|| PipelineError::Data("no fused series".into()))?;
    let fiveg = ev.series_for(SolutionSource::FiveGStandalone).ok_or_else(|| PipelineError::Data("no 5G series".into()))?;
    let window_max = |e: &ErrorSeries, a: f64, b: f64| {
        e.t.iter().zip(&e.err_3d).filter(|(t, _)| **t >= a && **t < b).map(|(_, v)| *v).fold(0.0, f64::max)
    };
    let mut out = Vec::new();
    for (a, b) in cfg.outage_windows() {
        let i = fused.t.partition_point(|x| *x < b - 1e-9);
        if i >= fused.t.len() {
            continue;
        }
        let t_exit = fused.t[i];
        let k = est.fused.states.partition_point(|s| s.t < a - 1e-9);
        let Some(entry) = est.fused.states.get(k) else { continue };
        let free = free_inertial(cfg, sim, entry, t_exit)?;
        let sol = NavSolution { t: free.t, pos: free.nav.pos, cov_diag: None, n_los_bs: 0, source: SolutionSource::InsStandalone };
        let free_err = compute_errors(&[sol], &sim.truth, sim.zone)?;
        out.push(OutageBridge {
            t_start: a,
            t_end: b,
            fused_max_m: window_max(fused, a, b),
            fiveg_max_m: window_max(fiveg, a, b),
            fused_exit_m: fused.err_3d[i],
            free_inertial_exit_m: free_err.err_3d[0],
        });
    }
    Ok(out)
}

/// Outputs of the three estimators on one simulation.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub fiveg: FiveGRun,
    pub ins: Vec<NavSolution>,
    pub fused: FusionRun,
}

pub fn run_all(cfg: &ScenarioConfig, sim: &Simulation) -> Result<Estimates, PipelineError> {
    let init = initial_state(cfg, &sim.truth)?;
    let fiveg = run_fiveg(cfg, sim)?;
    let ins = run_ins(cfg, sim, &init)?;
    let fused = run_fused(cfg, sim, &init, &fiveg.solutions)?;
    Ok(Estimates { fiveg, ins, fused })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub series: Vec<ErrorSeries>,
    pub reports: Vec<ErrorReport>,
    pub outages: Vec<OutageReport>,
    pub table: String,
}

impl Evaluation {
    pub fn report(&self, source: SolutionSource) -> Option<&ErrorReport> {
        self.reports.iter().find(|r| r.label == source)
    }

    pub fn series_for(&self, source: SolutionSource) -> Option<&ErrorSeries> {
        self.series.iter().find(|r| r.source == source)
    }
}

/// Error series, reports, outage summaries and the comparison table for each solution.
pub fn evaluate(
    truth: &Trajectory,
    zone: UtmZone,
    stats: &ConnectivityStats,
    solutions: &[&[NavSolution]],
) -> Result<Evaluation, PipelineError> {
    let mut ev = Evaluation { series: Vec::new(), reports: Vec::new(), outages: Vec::new(), table: String::new() };
    for sol in solutions {
        let e = compute_errors(sol, truth, zone)?;
        if e.excluded > 0 {
            log::warn!("{}: {} epochs outside the truth span were skipped", e.source, e.excluded);
        }
        ev.reports.push(compute_report_with_outages(&e, stats)?);
        ev.outages.push(outage_report(&e, stats)?);
        ev.series.push(e);
    }
    ev.table = render_table(&ev.reports);
    Ok(ev)
}

impl Estimates {
    pub fn evaluate(&self, sim: &Simulation) -> Result<Evaluation, PipelineError> {
        evaluate(&sim.truth, sim.zone, &sim.connectivity, &[&self.fiveg.solutions, &self.ins, &self.fused.solutions])
    }
}

/// Truth error state of a filter output: truth navigation state interpolated at `s.t`
/// and the simulated bias of the IMU sample at or after it.
pub fn truth_error(sim: &Simulation, s: &FusionState) -> Result<Vec15, PipelineError> {
    let e = sim.truth.interpolate(s.t)?;
    let nav = MechState { pos: e.pos, v_l: e.v_l, q: attitude_to_quaternion(&e.att), t: e.t };
    let k = sim.imu.samples.partition_point(|x| x.t < s.t - 1e-9).min(sim.imu.bias.len().saturating_sub(1));
    let bias = sim.imu.bias.get(k).copied().unwrap_or_else(BiasState::zero);
    Ok(error_state(s, &nav, &bias))
}

/// Normalized estimation error squared of every filter output, as (t, nees).
pub fn nees_series(sim: &Simulation, run: &FusionRun) -> Result<Vec<(f64, f64)>, PipelineError> {
    run.states
        .iter()
        .map(|s| {
            let dx = truth_error(sim, s)?;
            let chol = s.cov.cholesky().ok_or(FusionError::NotPsd(s.t))?;
            Ok((s.t, dx.dot(&chol.solve(&dx))))
        })
        .collect()
}
