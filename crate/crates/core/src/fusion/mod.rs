//! Loosely coupled 15-state error-state EKF: mechanized INS aided by 5G position solutions
//! and odometer velocity with non-holonomic constraints.

mod model;
mod update;

pub use model::{bias_decay, error_state, gm_process_variance, inject_error, propagate_truth, transition, Transition};
pub use update::{correct, feedback, project_odometer, update, Block, Correction, FusionMeasurement, OdoSigmas, UpdateEvent};

use crate::geo::{EarthOptions, GeoError};
use crate::ins::{on_grid, InsError, MechState};
use crate::sensors::{BiasState, GaussMarkovParams, ImuSample, OdoSample, WheelConfig};
use crate::solution::{NavSolution, SolutionSource};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type Mat15 = SMatrix<f64, 15, 15>;
pub type Vec15 = SVector<f64, 15>;

pub const POS: usize = 0;
pub const VEL: usize = 3;
pub const ATT: usize = 6;
pub const BG: usize = 9;
pub const BA: usize = 12;

const MAX_MECH_STEP_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("step length {0} s must be positive")]
    InvalidStep(f64),
    #[error("covariance lost positive semi-definiteness at t = {0} s")]
    NotPsd(f64),
    #[error("IMU gap of {gap} s before t = {t} s exceeds the {max} s limit")]
    ImuGap { t: f64, gap: f64, max: f64 },
    #[error("no aiding block present in the measurement at t = {0} s")]
    EmptyMeasurement(f64),
    #[error("IMU stream is empty")]
    EmptyStream,
    #[error("invalid fusion setting: {0}")]
    Config(String),
    #[error(transparent)]
    Ins(#[from] InsError),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Nominal navigation state, bias estimate and error covariance ordered
/// (δpos, δvel, δatt, δω, δf).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionState {
    pub nav: MechState,
    pub bias: BiasState,
    pub cov: Mat15,
    pub t: f64,
}

impl FusionState {
    pub fn new(nav: MechState, bias: BiasState, cov: Mat15) -> Self {
        Self { nav, bias, cov, t: nav.t }
    }
}

pub(crate) fn check_psd(p: &Mat15, t: f64) -> Result<(), FusionError> {
    let scale = p.diagonal().amax();
    if !p.iter().all(|v| v.is_finite()) || (p - p.transpose()).amax() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(FusionError::NotPsd(t));
    }
    let jitter = 1e-12 * scale.max(1.0);
    match (p + Mat15::identity() * jitter).cholesky() {
        Some(_) => Ok(()),
        None => Err(FusionError::NotPsd(t)),
    }
}

pub(crate) fn check_psd3(p: &Matrix3<f64>, t: f64) -> Result<(), FusionError> {
    let ok = p.iter().all(|v| v.is_finite())
        && (p - p.transpose()).amax() <= 1e-9 * p.amax()
        && p.symmetric_eigenvalues().min() >= -1e-12 * p.amax().max(1.0);
    if ok {
        Ok(())
    } else {
        Err(FusionError::NotPsd(t))
    }
}

/// Prediction over `dt`: full nonlinear mechanization of the mean, bias decay, and
/// P ← Φ P Φᵀ + Q.
pub fn predict(s: &FusionState, imu: &ImuSample, gm: &GaussMarkovParams, dt: f64) -> Result<FusionState, FusionError> {
    predict_with(s, imu, gm, dt, EarthOptions::default())
}

pub fn predict_with(
    s: &FusionState,
    imu: &ImuSample,
    gm: &GaussMarkovParams,
    dt: f64,
    opts: EarthOptions,
) -> Result<FusionState, FusionError> {
    let tr = transition(s, imu, gm, dt, opts)?;
    let p = tr.phi * s.cov * tr.phi.transpose() + tr.q;
    let p = 0.5 * (p + p.transpose());
    check_psd(&p, tr.nav.t)?;
    Ok(FusionState { nav: tr.nav, bias: tr.bias, cov: p, t: tr.nav.t })
}

/// Initial one-sigma uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSigmas {
    pub position_m: f64,
    pub velocity_ms: f64,
    /// Pitch and roll, degrees.
    pub tilt_deg: f64,
    pub azimuth_deg: f64,
    pub gyro_bias_deg_h: f64,
    pub accel_bias_ms2: f64,
}

impl Default for InitialSigmas {
    fn default() -> Self {
        Self { position_m: 0.3, velocity_ms: 0.05, tilt_deg: 0.05, azimuth_deg: 0.5, gyro_bias_deg_h: 50.0, accel_bias_ms2: 0.02 }
    }
}

impl InitialSigmas {
    pub fn covariance(&self) -> Mat15 {
        let tilt = self.tilt_deg.to_radians();
        let sig = [
            self.position_m,
            self.position_m,
            self.position_m,
            self.velocity_ms,
            self.velocity_ms,
            self.velocity_ms,
            tilt,
            tilt,
            self.azimuth_deg.to_radians(),
            (self.gyro_bias_deg_h / 3600.0).to_radians(),
            (self.gyro_bias_deg_h / 3600.0).to_radians(),
            (self.gyro_bias_deg_h / 3600.0).to_radians(),
            self.accel_bias_ms2,
            self.accel_bias_ms2,
            self.accel_bias_ms2,
        ];
        Mat15::from_diagonal(&Vec15::from_iterator(sig.iter().map(|s| s * s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub initial: InitialSigmas,
    /// Bias and noise model assumed by the filter.
    pub imu_model: GaussMarkovParams,
    pub odometer: OdoSigmas,
    pub use_fiveg: bool,
    pub use_odometer: bool,
    /// Let odometer updates observe attitude through the projection `R̂·v_b`. Disabled,
    /// the velocity block of H is the identity.
    pub odometer_attitude_coupling: bool,
    /// Minimum spacing between consumed 5G solutions, s.
    pub fiveg_interval_s: f64,
    /// Multiplier applied to the reported 5G covariance.
    pub fiveg_cov_scale: f64,
    /// Per-block innovation gate as a χ²(3) probability.
    pub gate_probability: f64,
    pub max_imu_gap_s: f64,
    pub output_rate_hz: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            initial: InitialSigmas::default(),
            imu_model: GaussMarkovParams::default(),
            odometer: OdoSigmas::default(),
            use_fiveg: true,
            use_odometer: true,
            odometer_attitude_coupling: true,
            fiveg_interval_s: 1.0,
            fiveg_cov_scale: 1.0,
            gate_probability: 0.999,
            max_imu_gap_s: 1.0,
            output_rate_hz: 10.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: &str| Err(FusionError::Config(m.to_string()));
        if !(self.gate_probability > 0.0 && self.gate_probability < 1.0) {
            return bad("gate_probability must lie in (0, 1)");
        }
        if !(self.fiveg_interval_s >= 0.0) || !(self.fiveg_cov_scale > 0.0) {
            return bad("fiveg_interval_s must be non-negative and fiveg_cov_scale positive");
        }
        if !(self.max_imu_gap_s > 0.0) || !(self.output_rate_hz > 0.0) {
            return bad("max_imu_gap_s and output_rate_hz must be positive");
        }
        let o = &self.odometer;
        if !(o.speed_ms > 0.0 && o.lateral_ms > 0.0 && o.vertical_ms > 0.0) {
            return bad("odometer sigmas must be positive");
        }
        self.imu_model.validate().map_err(|e| FusionError::Config(e.to_string()))
    }

    /// Squared Mahalanobis gate for a three-dimensional block.
    pub fn gate(&self) -> f64 {
        ChiSquared::new(3.0).expect("three degrees of freedom").inverse_cdf(self.gate_probability)
    }
}

/// Filter output at the output epochs plus the update log.
#[derive(Debug, Clone, Default)]
pub struct FusionRun {
    pub solutions: Vec<NavSolution>,
    pub states: Vec<FusionState>,
    pub events: Vec<UpdateEvent>,
}

impl FusionRun {
    pub fn state_at(&self, t: f64) -> Option<&FusionState> {
        let i = self.states.partition_point(|s| s.t < t - 1e-9);
        self.states.get(i).filter(|s| (s.t - t).abs() < 1e-9)
    }
}

/// Runs the filter over time-sorted streams. `fiveg` is the standalone 5G solution stream;
/// only epochs backed by at least one LOS fix and carrying a covariance are consumed.
pub fn run_fusion(
    init: &FusionState,
    imu: &[ImuSample],
    odo: &[OdoSample],
    fiveg: &[NavSolution],
    wheel: &WheelConfig,
    cfg: &FusionConfig,
) -> Result<FusionRun, FusionError> {
    cfg.validate()?;
    if imu.is_empty() {
        return Err(FusionError::EmptyStream);
    }
    let gate = cfg.gate();
    let mut run = FusionRun::default();
    let mut s = *init;
    let mut n_los = 0u32;
    let emit = |s: &FusionState, n_los: u32, run: &mut FusionRun| {
        let d = s.cov.diagonal();
        run.solutions.push(NavSolution {
            t: s.t,
            pos: s.nav.pos,
            cov_diag: Some([d[POS], d[POS + 1], d[POS + 2]]),
            n_los_bs: n_los,
            source: SolutionSource::Fused,
        });
        run.states.push(*s);
    };
    if on_grid(s.t, cfg.output_rate_hz) {
        emit(&s, 0, &mut run);
    }
    let (mut i5, mut io) = (0usize, 0usize);
    let mut last_5g = f64::NEG_INFINITY;
    let start = imu.partition_point(|m| m.t <= s.t + 1e-9);
    for m in &imu[start..] {
        let dt = m.t - s.t;
        if dt > cfg.max_imu_gap_s {
            return Err(FusionError::ImuGap { t: m.t, gap: dt, max: cfg.max_imu_gap_s });
        }
        let n = (dt / MAX_MECH_STEP_S - 1e-9).ceil().max(1.0) as usize;
        for _ in 0..n {
            s = predict(&s, m, &cfg.imu_model, dt / n as f64)?;
        }
        s.t = m.t;
        s.nav.t = m.t;
        let half = 0.5 * dt;

        let mut z = FusionMeasurement { t: m.t, pos_5g: None, v_odo_l: None, odo_attitude_coupling: cfg.odometer_attitude_coupling };
        while i5 < fiveg.len() && fiveg[i5].t <= m.t + half {
            let f = &fiveg[i5];
            i5 += 1;
            if !cfg.use_fiveg || f.t <= m.t - half || f.n_los_bs == 0 || f.t < last_5g + cfg.fiveg_interval_s - 1e-6 {
                continue;
            }
            if let Some(c) = f.cov_diag {
                let r = Matrix3::from_diagonal(&Vector3::from(c)) * cfg.fiveg_cov_scale;
                z.pos_5g = Some((f.pos, r));
                n_los = f.n_los_bs;
                last_5g = f.t;
            }
        }
        while io < odo.len() && odo[io].t <= m.t + half {
            let o = &odo[io];
            io += 1;
            if cfg.use_odometer && o.t > m.t - half {
                z.v_odo_l = Some(project_odometer(o, wheel, &s.nav.q, &cfg.odometer));
            }
        }
        if z.pos_5g.is_some() || z.v_odo_l.is_some() {
            let (next, events) = update(&s, &z, gate)?;
            s = next;
            run.events.extend(events);
        }
        if on_grid(s.t, cfg.output_rate_hz) {
            emit(&s, n_los, &mut run);
            n_los = 0;
        }
    }
    Ok(run)
}
