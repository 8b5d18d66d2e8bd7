//! Synthetic 5G observables, IMU and odometer streams with parametric error models.

mod fiveg;
mod imu;
mod odo;

pub use fiveg::{gen_5g, geometry, FiveGNoise, Meas5G, PathLoss};
pub use imu::{gen_imu, gm_discrete_step, ideal_imu, ImuStream};
pub use odo::{gen_odo, OdoNoise};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensorError {
    #[error("rate must be positive, got {0} Hz")]
    InvalidRate(f64),
    #[error("IMU rate {0} Hz below the 50 Hz minimum")]
    ImuRateTooLow(f64),
    #[error("Gauss-Markov beta must be non-negative, got {0}")]
    NegativeBeta(f64),
    #[error("wheel radius must be positive, got {0} m")]
    InvalidWheel(f64),
    #[error("attitude jumps {deg:.2}° between samples at t = {t} s")]
    AttitudeDiscontinuity { t: f64, deg: f64 },
    #[error("invalid noise parameter: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    Trajectory(#[from] crate::scenario::TrajectoryError),
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
}

/// One IMU record: specific force (m/s²) and angular rate (rad/s) in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub f_b: Vector3<f64>,
    pub w_b: Vector3<f64>,
}

/// One wheel-encoder record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdoSample {
    pub t: f64,
    /// Wheel rotation rate, rev/s.
    pub wheel_rate: f64,
}

impl OdoSample {
    /// Forward speed v = 2π·r_wheel·ω.
    pub fn speed(&self, wheel: &WheelConfig) -> f64 {
        2.0 * std::f64::consts::PI * wheel.r_wheel_m * self.wheel_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WheelConfig {
    pub r_wheel_m: f64,
}

impl Default for WheelConfig {
    fn default() -> Self {
        Self { r_wheel_m: 0.3 }
    }
}

impl WheelConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.r_wheel_m > 0.0 && self.r_wheel_m.is_finite() {
            Ok(())
        } else {
            Err(SensorError::InvalidWheel(self.r_wheel_m))
        }
    }
}

/// Gyro (`dw`, rad/s) and accelerometer (`df`, m/s²) biases.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasState {
    pub dw: Vector3<f64>,
    pub df: Vector3<f64>,
}

impl BiasState {
    pub fn zero() -> Self {
        Self::default()
    }
}

/// First-order Gauss-Markov bias dynamics plus additive white sensor noise.
///
/// `sigma_*` is the steady-state bias standard deviation when the matching `beta_*` is
/// positive. With `beta = 0` the process is a random walk and `sigma` is read as its
/// density (units per √s); `sigma = 0` then gives a constant bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussMarkovParams {
    /// Gyro bias inverse correlation times, 1/s.
    pub beta_w: [f64; 3],
    /// Accelerometer bias inverse correlation times, 1/s.
    pub beta_f: [f64; 3],
    /// Gyro bias standard deviations, rad/s.
    pub sigma_w: [f64; 3],
    /// Accelerometer bias standard deviations, m/s².
    pub sigma_f: [f64; 3],
    /// Angular random walk, rad/s/√Hz.
    pub gyro_noise_density: f64,
    /// Velocity random walk, m/s²/√Hz.
    pub accel_noise_density: f64,
}

impl Default for GaussMarkovParams {
    /// A consumer-grade MEMS unit: 50 °/h and 2 mg bias with 300 s correlation time,
    /// 0.3 °/√h angular and 0.1 m/s/√h velocity random walk.
    fn default() -> Self {
        let beta = 1.0 / 300.0;
        Self {
            beta_w: [beta; 3],
            beta_f: [beta; 3],
            sigma_w: [(50.0f64 / 3600.0).to_radians(); 3],
            sigma_f: [0.02; 3],
            gyro_noise_density: (0.3f64 / 60.0).to_radians(),
            accel_noise_density: 0.1 / 60.0,
        }
    }
}

impl GaussMarkovParams {
    /// All error sources switched off.
    pub fn ideal() -> Self {
        Self { beta_w: [0.0; 3], beta_f: [0.0; 3], sigma_w: [0.0; 3], sigma_f: [0.0; 3], gyro_noise_density: 0.0, accel_noise_density: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        for b in self.beta_w.iter().chain(&self.beta_f) {
            if !(*b >= 0.0) || !b.is_finite() {
                return Err(SensorError::NegativeBeta(*b));
            }
        }
        let sigmas = self.sigma_w.iter().chain(&self.sigma_f).chain([&self.gyro_noise_density, &self.accel_noise_density]);
        for s in sigmas {
            if !(*s >= 0.0) || !s.is_finite() {
                return Err(SensorError::InvalidNoise(format!("standard deviation {s}")));
            }
        }
        Ok(())
    }
}

/// Deterministic generator for one named stream of a seeded scenario.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream identifiers so that the schedule, 5G, IMU, odometer and initial-error draws never
/// share state.
pub mod streams {
    pub const SCHEDULE: u64 = 1;
    pub const FIVEG: u64 = 2;
    pub const IMU: u64 = 3;
    pub const ODO: u64 = 4;
    pub const INIT: u64 = 5;
}

/// Epoch times k/rate covering [t0, t1].
pub fn epoch_grid(t0: f64, t1: f64, rate_hz: f64) -> Vec<f64> {
    let k0 = (t0 * rate_hz - 1e-9).ceil() as i64;
    let k1 = (t1 * rate_hz + 1e-9).floor() as i64;
    (k0..=k1).map(|k| k as f64 / rate_hz).collect()
}
