use crate::sensors::{ImuSample, OdoSample, WheelConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarityThresholds {
    pub window_s: f64,
    /// Upper bound on the variance of ‖ω‖ over the window, (rad/s)².
    pub gyro_norm_var: f64,
    /// Upper bound on |mean ‖f‖ − g|, m/s².
    pub accel_norm_dev_ms2: f64,
    /// Upper bound on every odometer speed in the window, m/s.
    pub odo_speed_ms: f64,
}

impl Default for StationarityThresholds {
    fn default() -> Self {
        Self { window_s: 0.5, gyro_norm_var: 1e-5, accel_norm_dev_ms2: 0.08, odo_speed_ms: 0.05 }
    }
}

/// True when the gyro-norm variance, the accelerometer-norm deviation from `gravity` and
/// the odometer speed are all below their thresholds. Empty windows are never stationary.
pub fn stationarity_detect(imu: &[ImuSample], odo: &[OdoSample], wheel: &WheelConfig, th: &StationarityThresholds, gravity: f64) -> bool {
    if imu.is_empty() || odo.is_empty() {
        return false;
    }
    let n = imu.len() as f64;
    let norms: Vec<f64> = imu.iter().map(|m| m.w_b.norm()).collect();
    let mean_w = norms.iter().sum::<f64>() / n;
    let var_w = norms.iter().map(|x| (x - mean_w).powi(2)).sum::<f64>() / n;
    let mean_f = imu.iter().map(|m| m.f_b.norm()).sum::<f64>() / n;
    let max_speed = odo.iter().map(|o| o.speed(wheel).abs()).fold(0.0, f64::max);
    var_w < th.gyro_norm_var && (mean_f - gravity).abs() < th.accel_norm_dev_ms2 && max_speed < th.odo_speed_ms
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn ideal_rest_is_stationary() {
        let g = 9.80;
        let imu: Vec<ImuSample> =
            (0..50).map(|k| ImuSample { t: k as f64 * 0.01, f_b: Vector3::new(0.0, 0.0, g), w_b: Vector3::zeros() }).collect();
        let odo: Vec<OdoSample> = (0..5).map(|k| OdoSample { t: k as f64 * 0.1, wheel_rate: 0.0 }).collect();
        let th = StationarityThresholds::default();
        assert!(stationarity_detect(&imu, &odo, &WheelConfig::default(), &th, g));
        assert!(!stationarity_detect(&imu, &[], &WheelConfig::default(), &th, g));
        let rolling: Vec<OdoSample> = odo.iter().map(|o| OdoSample { wheel_rate: 1.0, ..*o }).collect();
        assert!(!stationarity_detect(&imu, &rolling, &WheelConfig::default(), &th, g));
    }
}
