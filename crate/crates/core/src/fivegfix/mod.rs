//! 5G standalone positioning: NLOS rejection, single-site range/angle fixes and the
//! constant-velocity Kalman filter that fuses them.

mod cvkf;

pub use cvkf::{cv_kf_step, CvKfState};

use crate::geo::consts::SPEED_OF_LIGHT;
use crate::geo::{utm_to_geodetic, GeoError, UtmPosition, UtmZone};
use crate::scenario::BsSite;
use crate::sensors::{Meas5G, PathLoss};
use crate::solution::{NavSolution, SolutionSource};
use nalgebra::{Matrix3, Vector6};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FixError {
    #[error("ranges must be positive (r_time = {r_time}, r_power = {r_power})")]
    NonPositiveRange { r_time: f64, r_power: f64 },
    #[error("detector threshold must be positive, got {0}")]
    InvalidGamma(f64),
    #[error("range {range} m does not exceed the height difference {dz} m")]
    InsideCylinder { range: f64, dz: f64 },
    #[error("measurement classified NLOS cannot produce a fix")]
    NlosInput,
    #[error("horizontal angle is degenerate (UE above the site)")]
    DegenerateAngle,
    #[error("covariance is not symmetric positive semi-definite")]
    NotPsd,
    #[error("step length must be positive, got {0} s")]
    InvalidStep(f64),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Time-of-flight and power-implied ranges for one measurement, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangePair {
    pub r_time: f64,
    pub r_power: f64,
}

impl RangePair {
    pub fn from_measurement(m: &Meas5G, path_loss: &PathLoss) -> Self {
        Self { r_time: 0.5 * SPEED_OF_LIGHT * m.rtt, r_power: path_loss.range_from_power(m.rx_power) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LosDecision {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
}

/// One-sided range-differencing test: NLOS iff r_time − r_power > γ.
pub fn nlos_detect(pair: &RangePair, gamma: f64) -> Result<LosDecision, FixError> {
    if !(gamma > 0.0) {
        return Err(FixError::InvalidGamma(gamma));
    }
    if !(pair.r_time > 0.0 && pair.r_power > 0.0) {
        return Err(FixError::NonPositiveRange { r_time: pair.r_time, r_power: pair.r_power });
    }
    Ok(if pair.r_time - pair.r_power > gamma { LosDecision::Nlos } else { LosDecision::Los })
}

/// Per-fix measurement uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixSigmas {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub height_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleBsFix {
    pub pos: UtmPosition,
    pub r_2d: f64,
    pub bs_id: u32,
    pub t: f64,
    pub est_cov: Matrix3<f64>,
}

/// Position from one site's range and horizontal angle, assuming the UE height `h_ue`.
pub fn single_bs_fix(m: &Meas5G, bs: &BsSite, h_ue: f64, sigmas: &FixSigmas, decision: LosDecision) -> Result<SingleBsFix, FixError> {
    if decision == LosDecision::Nlos {
        return Err(FixError::NlosInput);
    }
    if m.aod_h_degenerate {
        return Err(FixError::DegenerateAngle);
    }
    let r = m.range_time();
    let dz = h_ue - bs.pos.height;
    if !(r > dz.abs()) {
        return Err(FixError::InsideCylinder { range: r, dz });
    }
    let r_2d = ((r - dz.abs()) * (r + dz.abs())).sqrt();
    let (s, c) = m.aod_h.sin_cos();
    let pos = UtmPosition { easting: bs.pos.easting + r_2d * s, northing: bs.pos.northing + r_2d * c, height: h_ue, zone: bs.pos.zone };
    let along = if r_2d > 0.0 { r / r_2d * sigmas.range_m } else { f64::MAX.sqrt() };
    let across = r_2d * sigmas.azimuth_rad;
    let (a2, x2) = (along * along, across * across);
    let est_cov = Matrix3::new(
        a2 * s * s + x2 * c * c,
        (a2 - x2) * s * c,
        0.0,
        (a2 - x2) * s * c,
        a2 * c * c + x2 * s * s,
        0.0,
        0.0,
        0.0,
        sigmas.height_m * sigmas.height_m,
    );
    Ok(SingleBsFix { pos, r_2d, bs_id: bs.id, t: m.t, est_cov })
}

/// Settings of the standalone 5G positioning chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixConfig {
    pub detector_enabled: bool,
    pub gamma_m: f64,
    pub range_sigma_m: f64,
    pub aod_sigma_deg: f64,
    pub height_sigma_m: f64,
    /// White-acceleration spectral density of the constant-velocity model, m²/s³.
    pub q_accel: f64,
    pub init_velocity_sigma_ms: f64,
    pub rate_hz: f64,
}

impl Default for FixConfig {
    fn default() -> Self {
        Self {
            detector_enabled: true,
            gamma_m: 10.0,
            range_sigma_m: 0.1,
            aod_sigma_deg: 0.05,
            height_sigma_m: 0.05,
            q_accel: 2.0,
            init_velocity_sigma_ms: 5.0,
            rate_hz: 10.0,
        }
    }
}

impl FixConfig {
    pub fn sigmas(&self) -> FixSigmas {
        FixSigmas { range_m: self.range_sigma_m, azimuth_rad: self.aod_sigma_deg.to_radians(), height_m: self.height_sigma_m }
    }
}

/// Detector output for one measurement, kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorRecord {
    pub t: f64,
    pub bs_id: u32,
    pub r_time: f64,
    pub r_power: f64,
    pub decision: LosDecision,
    pub truth_los: bool,
}

/// Confusion counts of the NLOS detector against the simulator's truth flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorStats {
    pub nlos: usize,
    pub los: usize,
    /// NLOS measurements flagged NLOS.
    pub true_positives: usize,
    /// LOS measurements flagged NLOS.
    pub false_positives: usize,
}

impl DetectorStats {
    pub fn from_records(records: &[DetectorRecord]) -> Self {
        let mut s = Self::default();
        for r in records {
            let flagged = r.decision == LosDecision::Nlos;
            if r.truth_los {
                s.los += 1;
                s.false_positives += flagged as usize;
            } else {
                s.nlos += 1;
                s.true_positives += flagged as usize;
            }
        }
        s
    }

    /// Fraction of NLOS measurements detected; 1 when there are none.
    pub fn recall(&self) -> f64 {
        if self.nlos == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.nlos as f64
        }
    }

    /// Fraction of LOS measurements wrongly flagged; 0 when there are none.
    pub fn false_positive_rate(&self) -> f64 {
        if self.los == 0 {
            0.0
        } else {
            self.false_positives as f64 / self.los as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiveGRun {
    pub solutions: Vec<NavSolution>,
    pub detector: Vec<DetectorRecord>,
    /// Full filter state per emitted solution.
    pub states: Vec<CvKfState>,
}

/// Runs detector, fixes and the constant-velocity filter at every epoch in `epochs`.
///
/// Epochs without usable fixes coast on the prediction. Nothing is emitted before the
/// first fix initializes the filter. Per-measurement failures are logged and skipped.
pub fn run_5g_standalone(
    meas: &[Meas5G],
    sites: &[BsSite],
    h_ue: f64,
    path_loss: &PathLoss,
    cfg: &FixConfig,
    epochs: &[f64],
    zone: UtmZone,
) -> Result<FiveGRun, FixError> {
    let by_id: HashMap<u32, &BsSite> = sites.iter().map(|s| (s.id, s)).collect();
    let half = 0.5 / cfg.rate_hz;
    let sigmas = cfg.sigmas();
    let mut state: Option<CvKfState> = None;
    let mut run = FiveGRun { solutions: Vec::new(), detector: Vec::new(), states: Vec::new() };
    let mut next = 0usize;
    for &t in epochs {
        while next < meas.len() && meas[next].t < t - half {
            next += 1;
        }
        let mut fixes = Vec::new();
        while next < meas.len() && meas[next].t < t + half {
            let m = &meas[next];
            next += 1;
            let Some(bs) = by_id.get(&m.bs_id) else {
                log::warn!("measurement at t = {} s references unknown site {}", m.t, m.bs_id);
                continue;
            };
            let pair = RangePair::from_measurement(m, path_loss);
            let decision = if cfg.detector_enabled {
                match nlos_detect(&pair, cfg.gamma_m) {
                    Ok(d) => d,
                    Err(e) => {
                        log::warn!("t = {} s, site {}: {e}", m.t, m.bs_id);
                        continue;
                    }
                }
            } else {
                LosDecision::Los
            };
            run.detector.push(DetectorRecord {
                t: m.t,
                bs_id: m.bs_id,
                r_time: pair.r_time,
                r_power: pair.r_power,
                decision,
                truth_los: m.truth_los,
            });
            if decision == LosDecision::Nlos {
                continue;
            }
            match single_bs_fix(m, bs, h_ue, &sigmas, decision) {
                Ok(f) => fixes.push(f),
                Err(e) => log::debug!("t = {} s, site {}: {e}", m.t, m.bs_id),
            }
        }
        let n_los = fixes.len() as u32;
        let updated = match state {
            Some(s) => Some(cv_kf_step(&s, &fixes, t - s.t, cfg.q_accel)?),
            None if !fixes.is_empty() => Some(CvKfState::from_fixes(&fixes, t, cfg.init_velocity_sigma_ms)?),
            None => None,
        };
        if let Some(s) = updated {
            let utm = UtmPosition { easting: s.x[0], northing: s.x[1], height: s.x[2], zone };
            run.solutions.push(NavSolution {
                t,
                pos: utm_to_geodetic(&utm)?,
                cov_diag: Some([s.p[(0, 0)], s.p[(1, 1)], s.p[(2, 2)]]),
                n_los_bs: n_los,
                source: SolutionSource::FiveGStandalone,
            });
            run.states.push(s);
        }
        state = updated;
    }
    Ok(run)
}

impl CvKfState {
    /// Starts at the first fix with zero velocity, then absorbs the remaining fixes.
    pub fn from_fixes(fixes: &[SingleBsFix], t: f64, velocity_sigma: f64) -> Result<Self, FixError> {
        let first = &fixes[0];
        let mut x = Vector6::zeros();
        x[0] = first.pos.easting;
        x[1] = first.pos.northing;
        x[2] = first.pos.height;
        let mut p = nalgebra::Matrix6::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(&first.est_cov);
        for i in 3..6 {
            p[(i, i)] = velocity_sigma * velocity_sigma;
        }
        let s = CvKfState { x, p, t };
        cvkf::update_all(&s, &fixes[1..])
    }
}
