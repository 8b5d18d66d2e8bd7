use super::{epoch_grid, OdoSample, SensorError, WheelConfig};
use crate::scenario::Trajectory;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdoNoise {
    /// Fractional scale-factor error (0.01 reads 1% fast).
    pub scale_factor: f64,
    /// White speed noise, m/s.
    pub speed_sigma_ms: f64,
}

impl Default for OdoNoise {
    fn default() -> Self {
        Self { scale_factor: 0.001, speed_sigma_ms: 0.02 }
    }
}

/// Wheel-rate samples from the truth's horizontal ground speed. A wheel at rest reads zero;
/// otherwise the reading is clamped at zero for the forward-only encoder model.
pub fn gen_odo<R: Rng>(
    traj: &Trajectory,
    wheel: &WheelConfig,
    noise: &OdoNoise,
    rate_hz: f64,
    rng: &mut R,
) -> Result<Vec<OdoSample>, SensorError> {
    if !(rate_hz > 0.0) {
        return Err(SensorError::InvalidRate(rate_hz));
    }
    wheel.validate()?;
    if !(noise.speed_sigma_ms >= 0.0) || !noise.scale_factor.is_finite() {
        return Err(SensorError::InvalidNoise("odometer noise".into()));
    }
    let circumference = 2.0 * PI * wheel.r_wheel_m;
    epoch_grid(traj.start_time(), traj.end_time(), rate_hz)
        .into_iter()
        .map(|t| {
            let e = traj.interpolate(t)?;
            let speed = e.v_l.x.hypot(e.v_l.y);
            let n: f64 = rng.sample(StandardNormal);
            let measured = if speed == 0.0 { 0.0 } else { (speed * (1.0 + noise.scale_factor) + noise.speed_sigma_ms * n).max(0.0) };
            Ok(OdoSample { t, wheel_rate: measured / circumference })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Attitude, GeodeticPosition};
    use crate::scenario::TrajectoryEpoch;
    use crate::sensors::{stream_rng, streams};
    use nalgebra::Vector3;

    fn constant_speed(v: f64) -> Trajectory {
        let pos = GeodeticPosition::from_degrees(43.6, -79.4, 1.5).unwrap();
        let epochs = (0..=10)
            .map(|k| TrajectoryEpoch { t: k as f64 * 0.1, pos, v_l: Vector3::new(v, 0.0, 0.0), att: Attitude::level(0.0) })
            .collect();
        Trajectory::new(epochs).unwrap()
    }

    fn run(v: f64, noise: OdoNoise) -> Vec<OdoSample> {
        gen_odo(&constant_speed(v), &WheelConfig { r_wheel_m: 0.3 }, &noise, 10.0, &mut stream_rng(3, streams::ODO)).unwrap()
    }

    #[test]
    fn wheel_rate_inverts_speed() {
        let quiet = OdoNoise { scale_factor: 0.0, speed_sigma_ms: 0.0 };
        // 9.4248 / (2π·0.3) = 5.0000117 rev/s.
        for s in run(9.4248, quiet) {
            assert!((s.wheel_rate - 5.000_011_692_174_984).abs() < 1e-12);
        }
        for s in run(2.0 * PI * 0.3 * 5.0, quiet) {
            assert!((s.wheel_rate - 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_reads_zero() {
        for s in run(0.0, OdoNoise::default()) {
            assert_eq!(s.wheel_rate, 0.0);
            assert_eq!(s.speed(&WheelConfig { r_wheel_m: 0.3 }), 0.0);
        }
    }

    #[test]
    fn scale_factor_error() {
        let wheel = WheelConfig { r_wheel_m: 0.3 };
        for s in run(10.0, OdoNoise { scale_factor: 0.01, speed_sigma_ms: 0.0 }) {
            assert!((s.speed(&wheel) - 10.1).abs() < 1e-12);
        }
    }
}
