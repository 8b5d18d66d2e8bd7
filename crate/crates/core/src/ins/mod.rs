//! Strapdown mechanization in the local-level frame, standalone dead reckoning and the
//! optional stationarity pause.

mod stationarity;

pub use stationarity::{stationarity_detect, StationarityThresholds};

use crate::geo::{compute_earth_terms_with, radii, EarthNavTerms, EarthOptions, GeoError, GeodeticPosition, Quaternion};
use crate::sensors::{BiasState, ImuSample, OdoSample, WheelConfig};
use crate::solution::{NavSolution, SolutionSource};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

const MAX_STEP_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InsError {
    #[error("step length {0} s outside (0, 0.1]")]
    InvalidStep(f64),
    #[error("non-finite state after step at t = {0} s")]
    Diverged(f64),
    #[error("IMU stream is empty")]
    EmptyStream,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Position, l-frame velocity (E, N, U) and b→l attitude at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechState {
    pub pos: GeodeticPosition,
    pub v_l: Vector3<f64>,
    pub q: Quaternion,
    pub t: f64,
}

impl MechState {
    /// Velocity in the body frame (longitudinal, lateral, vertical).
    pub fn body_velocity(&self) -> BodyVelocity {
        BodyVelocity(self.q.to_rotation_matrix().transpose() * self.v_l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyVelocity(pub Vector3<f64>);

/// Quantities of one step that the error-state filter linearizes around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub terms: EarthNavTerms,
    /// Bias-corrected specific force and angular rate.
    pub f_b: Vector3<f64>,
    pub w_b: Vector3<f64>,
    /// Body rate relative to the l-frame.
    pub w_lb: Vector3<f64>,
    pub dt: f64,
}

/// One mechanization step with every external-effect term enabled.
pub fn mechanize_step(s: &MechState, imu: &ImuSample, bias: &BiasState, dt: f64) -> Result<MechState, InsError> {
    mechanize_step_with(s, imu, bias, dt, EarthOptions::default()).map(|(next, _)| next)
}

/// Mechanization step returning the linearization trace.
///
/// Attitude follows the first-order quaternion update q + ½·dt·Ω(ω_lb)·q, velocity uses
/// the Euler-integrated navigation equation and position integrates the mean of the old
/// and new velocity through the curvature radii at the start of the step.
pub fn mechanize_step_with(
    s: &MechState,
    imu: &ImuSample,
    bias: &BiasState,
    dt: f64,
    opts: EarthOptions,
) -> Result<(MechState, StepTrace), InsError> {
    if !(dt > 0.0 && dt <= MAX_STEP_S) {
        return Err(InsError::InvalidStep(dt));
    }
    let f_b = imu.f_b - bias.df;
    let w_b = imu.w_b - bias.dw;
    let terms = compute_earth_terms_with(&s.pos, &s.v_l, &s.q, opts)?;
    let r = terms.r_b_l;
    let w_lb = w_b - r.transpose() * terms.omega_il_l();
    let q = s.q.integrate_first_order(&w_lb, dt);
    let coriolis = (2.0 * terms.omega_ie_l + terms.omega_el_l).cross(&s.v_l);
    let v_l = s.v_l + dt * (r * f_b - coriolis + terms.g_l);
    let pos = advance_position(&s.pos, &s.v_l, &v_l, dt, terms.meridian_radius, terms.normal_radius);
    let t = s.t + dt;
    let finite = pos.lat.is_finite() && pos.lon.is_finite() && pos.h.is_finite() && v_l.iter().all(|x| x.is_finite());
    if !finite {
        return Err(InsError::Diverged(t));
    }
    let pos = GeodeticPosition::new(pos.lat, pos.lon, pos.h)?;
    Ok((MechState { pos, v_l, q, t }, StepTrace { terms, f_b, w_b, w_lb, dt }))
}

/// Trapezoidal position update with radii evaluated at the start of the step.
pub(crate) fn advance_position(
    p: &GeodeticPosition,
    v0: &Vector3<f64>,
    v1: &Vector3<f64>,
    dt: f64,
    meridian: f64,
    normal: f64,
) -> GeodeticPosition {
    let w = 0.5 * dt * (v0 + v1);
    GeodeticPosition { lat: p.lat + w.y / (meridian + p.h), lon: p.lon + w.x / ((normal + p.h) * p.lat.cos()), h: p.h + w.z }
}

/// Local-level displacement (E, N, U) in metres from `a` to `b`, using the radii at `a`.
pub fn position_difference(a: &GeodeticPosition, b: &GeodeticPosition) -> Vector3<f64> {
    let r = radii(a.lat);
    Vector3::new(crate::geo::wrap_pi(b.lon - a.lon) * (r.normal + a.h) * a.lat.cos(), (b.lat - a.lat) * (r.meridian + a.h), b.h - a.h)
}

/// Applies an (E, N, U) metre displacement to a geodetic position.
pub fn displace(p: &GeodeticPosition, d: &Vector3<f64>) -> Result<GeodeticPosition, GeoError> {
    let r = radii(p.lat);
    GeodeticPosition::new(p.lat + d.y / (r.meridian + p.h), p.lon + d.x / ((r.normal + p.h) * p.lat.cos()), p.h + d.z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsOptions {
    pub output_rate_hz: f64,
    /// Pause mechanization while stationary (off by default).
    pub zupt: bool,
    pub stationarity: StationarityThresholds,
}

impl Default for InsOptions {
    fn default() -> Self {
        Self { output_rate_hz: 10.0, zupt: false, stationarity: StationarityThresholds::default() }
    }
}

/// Whether `t` falls on the output grid of `rate_hz`.
pub(crate) fn on_grid(t: f64, rate_hz: f64) -> bool {
    let x = t * rate_hz;
    (x - x.round()).abs() < 1e-6
}

/// Free-inertial dead reckoning from `init` with zero assumed biases.
///
/// The odometer stream is consulted only for the stationarity pause.
pub fn run_ins_standalone(
    init: &MechState,
    imu: &[ImuSample],
    odo: &[OdoSample],
    wheel: &WheelConfig,
    opts: &InsOptions,
) -> Result<Vec<NavSolution>, InsError> {
    run_ins_with(init, imu, odo, wheel, opts, EarthOptions::default())
}

pub fn run_ins_with(
    init: &MechState,
    imu: &[ImuSample],
    odo: &[OdoSample],
    wheel: &WheelConfig,
    opts: &InsOptions,
    earth: EarthOptions,
) -> Result<Vec<NavSolution>, InsError> {
    let emit = |s: &MechState| NavSolution { t: s.t, pos: s.pos, cov_diag: None, n_los_bs: 0, source: SolutionSource::InsStandalone };
    let mut out = vec![emit(init)];
    let mut s = *init;
    let zero = BiasState::zero();
    let start = imu.partition_point(|m| m.t <= init.t + 1e-9);
    let (mut imu_lo, mut odo_lo, mut odo_hi) = (0usize, 0usize, 0usize);
    for k in start..imu.len() {
        let m = &imu[k];
        let dt = m.t - s.t;
        let mut paused = false;
        if opts.zupt {
            let w = opts.stationarity.window_s;
            while imu[imu_lo].t < m.t - w {
                imu_lo += 1;
            }
            while odo_hi < odo.len() && odo[odo_hi].t <= m.t + 1e-9 {
                odo_hi += 1;
            }
            while odo_lo < odo_hi && odo[odo_lo].t < m.t - w {
                odo_lo += 1;
            }
            let covered = m.t - imu[imu_lo].t >= w - 1e-9;
            if covered && odo_hi > odo_lo {
                let g = crate::geo::normal_gravity(s.pos.lat, s.pos.h);
                paused = stationarity_detect(&imu[imu_lo..=k], &odo[odo_lo..odo_hi], wheel, &opts.stationarity, g);
            }
        }
        if paused {
            s = MechState { v_l: Vector3::zeros(), t: s.t + dt, ..s };
        } else {
            s = mechanize_step_with(&s, m, &zero, dt, earth)?.0;
        }
        s.t = m.t;
        if on_grid(s.t, opts.output_rate_hz) {
            out.push(emit(&s));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{attitude_to_quaternion, normal_gravity, quaternion_to_attitude, Attitude};
    use std::f64::consts::FRAC_PI_2;

    fn toronto() -> GeodeticPosition {
        GeodeticPosition::from_degrees(43.6452, -79.3806, 1.5).unwrap()
    }

    fn at_rest(az: f64) -> MechState {
        MechState { pos: toronto(), v_l: Vector3::zeros(), q: attitude_to_quaternion(&Attitude::level(az)), t: 0.0 }
    }

    #[test]
    fn rejects_bad_steps() {
        let s = at_rest(0.0);
        let m = ImuSample { t: 0.0, f_b: Vector3::zeros(), w_b: Vector3::zeros() };
        for dt in [0.0, -0.01, 0.2] {
            assert_eq!(mechanize_step(&s, &m, &BiasState::zero(), dt), Err(InsError::InvalidStep(dt)));
        }
    }

    #[test]
    fn stationary_equilibrium_holds() {
        let init = at_rest(0.3);
        let terms = crate::geo::compute_earth_terms(&init.pos, &init.v_l, &init.q).unwrap();
        let rt = terms.r_b_l.transpose();
        let f = rt * Vector3::new(0.0, 0.0, normal_gravity(init.pos.lat, init.pos.h));
        let w = rt * terms.omega_ie_l;
        let mut s = init;
        for k in 1..=1000 {
            let m = ImuSample { t: k as f64 * 0.01, f_b: f, w_b: w };
            s = mechanize_step(&s, &m, &BiasState::zero(), 0.01).unwrap();
        }
        assert!(position_difference(&init.pos, &s.pos).norm() < 1e-3);
        assert!((s.q.conjugate() * init.q).to_rotation_vector().norm() < 1e-5);
        assert!((s.q.norm() - 1.0).abs() < 1e-9);
    }

    // Level vehicle, Earth terms off: a body yaw rate of (π/2)/s moves the heading 90° in 1 s;
    // azimuth is clockwise so a positive body z rate decreases it.
    #[test]
    fn pure_yaw_quarter_turn() {
        let mut s = at_rest(FRAC_PI_2);
        let g = normal_gravity(s.pos.lat, s.pos.h);
        for k in 1..=100 {
            let m = ImuSample { t: k as f64 * 0.01, f_b: Vector3::new(0.0, 0.0, g), w_b: Vector3::new(0.0, 0.0, -FRAC_PI_2) };
            s = mechanize_step_with(&s, &m, &BiasState::zero(), 0.01, EarthOptions::NONE).unwrap().0;
        }
        let (att, _) = quaternion_to_attitude(&s.q);
        assert!((att.azimuth.to_degrees() - 180.0).abs() < 0.02, "{}", att.azimuth.to_degrees());
    }

    #[test]
    fn earth_rate_compensation_is_live() {
        let init = at_rest(0.0);
        let g = normal_gravity(init.pos.lat, init.pos.h);
        let m = |t: f64| ImuSample { t, f_b: Vector3::new(0.0, 0.0, g), w_b: Vector3::zeros() };
        let (mut with, mut without) = (init, init);
        for k in 1..=60_000 {
            let t = k as f64 * 0.01;
            with = mechanize_step_with(&with, &m(t), &BiasState::zero(), 0.01, EarthOptions { earth_rate: true, transport_rate: false })
                .unwrap()
                .0;
            without = mechanize_step_with(&without, &m(t), &BiasState::zero(), 0.01, EarthOptions::NONE).unwrap().0;
        }
        let a_with = quaternion_to_attitude(&with.q).0.azimuth;
        let a_without = quaternion_to_attitude(&without.q).0.azimuth;
        let diff = crate::geo::wrap_pi(a_with - a_without);
        // A gyro reading zero while the Earth turns means the body turns westward relative to
        // the l-frame: azimuth grows by ω_e·sin(φ)·t.
        let expected = crate::geo::consts::EARTH_RATE * init.pos.lat.sin() * 600.0;
        assert!(diff > 0.0);
        assert!((diff / expected - 1.0).abs() < 0.2, "{diff} vs {expected}");
    }

    #[test]
    fn time_reversal_returns_home() {
        let mut s = MechState { v_l: Vector3::new(3.0, 4.0, 0.0), ..at_rest(0.6) };
        let init = s;
        let g = normal_gravity(s.pos.lat, s.pos.h);
        let stream: Vec<(Vector3<f64>, Vector3<f64>)> = (0..500)
            .map(|k| {
                let u = k as f64 * 0.01;
                (Vector3::new(0.3 * u.sin(), 0.1, g), Vector3::new(0.01, -0.02, 0.2 * u.cos()))
            })
            .collect();
        for (k, (f, w)) in stream.iter().enumerate() {
            let m = ImuSample { t: (k + 1) as f64 * 0.01, f_b: *f, w_b: *w };
            s = mechanize_step_with(&s, &m, &BiasState::zero(), 0.01, EarthOptions::NONE).unwrap().0;
        }
        let mut back = MechState { v_l: -s.v_l, t: 0.0, ..s };
        for (k, (f, w)) in stream.iter().rev().enumerate() {
            let m = ImuSample { t: (k + 1) as f64 * 0.01, f_b: *f, w_b: -w };
            back = mechanize_step_with(&back, &m, &BiasState::zero(), 0.01, EarthOptions::NONE).unwrap().0;
        }
        assert!(position_difference(&init.pos, &back.pos).norm() < 0.05);
        assert!((back.v_l + init.v_l).norm() < 0.05);
    }

    #[test]
    fn displacement_helpers_invert() {
        let p = toronto();
        let d = Vector3::new(120.0, -45.0, 3.0);
        let q = displace(&p, &d).unwrap();
        assert!((position_difference(&p, &q) - d).norm() < 1e-9);
    }
}
