use super::{epoch_grid, SensorError};
use crate::geo::consts::SPEED_OF_LIGHT;
use crate::geo::{geodetic_to_utm_in_zone, wrap_two_pi, UtmPosition};
use crate::scenario::{visibility, BsSite, LinkState, Trajectory};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// One BS-to-UE observable set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meas5G {
    pub t: f64,
    pub bs_id: u32,
    #[serde(rename = "rtt_s")]
    pub rtt: f64,
    /// Azimuth of the BS→UE direction, clockwise from grid north.
    #[serde(rename = "aod_h_rad")]
    pub aod_h: f64,
    #[serde(rename = "aod_v_rad")]
    pub aod_v: f64,
    #[serde(rename = "rx_power_dbm")]
    pub rx_power: f64,
    /// Simulation-only truth label.
    pub truth_los: bool,
    /// Set when the UE is directly above or below the site and `aod_h` carries no information.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub aod_h_degenerate: bool,
}

impl Meas5G {
    /// Time-of-flight range c·τ/2, metres.
    pub fn range_time(&self) -> f64 {
        0.5 * SPEED_OF_LIGHT * self.rtt
    }
}

/// Log-distance path loss referenced to free space at `ref_distance_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLoss {
    pub tx_power_dbm: f64,
    pub carrier_hz: f64,
    pub exponent: f64,
    pub ref_distance_m: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self { tx_power_dbm: 30.0, carrier_hz: 28e9, exponent: 2.0, ref_distance_m: 1.0 }
    }
}

impl PathLoss {
    fn reference_loss_db(&self) -> f64 {
        20.0 * (4.0 * PI * self.ref_distance_m * self.carrier_hz / SPEED_OF_LIGHT).log10()
    }

    pub fn rx_power_dbm(&self, range_m: f64) -> f64 {
        self.tx_power_dbm - self.reference_loss_db() - 10.0 * self.exponent * (range_m / self.ref_distance_m).log10()
    }

    /// Range implied by a received power, metres.
    pub fn range_from_power(&self, rx_power_dbm: f64) -> f64 {
        let excess = self.tx_power_dbm - self.reference_loss_db() - rx_power_dbm;
        self.ref_distance_m * 10f64.powf(excess / (10.0 * self.exponent))
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let ok = self.carrier_hz > 0.0 && self.exponent > 0.0 && self.ref_distance_m > 0.0 && self.tx_power_dbm.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SensorError::InvalidNoise("path-loss parameters must be positive".into()))
        }
    }
}

/// 5G measurement error model. Defaults are declared choices for a 400 MHz mmWave carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiveGNoise {
    /// Range-equivalent RTT noise, metres (timing σ = 2σ_r/c).
    pub range_sigma_m: f64,
    pub aod_h_sigma_deg: f64,
    pub aod_v_sigma_deg: f64,
    pub power_sigma_db: f64,
    pub nlos_bias_min_m: f64,
    pub nlos_bias_max_m: f64,
    /// Extra attenuation applied to NLOS received power, dB.
    pub nlos_extra_attenuation_db: f64,
    pub path_loss: PathLoss,
}

impl Default for FiveGNoise {
    fn default() -> Self {
        Self {
            range_sigma_m: 0.1,
            aod_h_sigma_deg: 0.05,
            aod_v_sigma_deg: 0.1,
            power_sigma_db: 0.02,
            nlos_bias_min_m: 10.0,
            nlos_bias_max_m: 80.0,
            nlos_extra_attenuation_db: 0.0,
            path_loss: PathLoss::default(),
        }
    }
}

impl FiveGNoise {
    pub fn noiseless() -> Self {
        Self { range_sigma_m: 0.0, aod_h_sigma_deg: 0.0, aod_v_sigma_deg: 0.0, power_sigma_db: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let sig = [self.range_sigma_m, self.aod_h_sigma_deg, self.aod_v_sigma_deg, self.power_sigma_db];
        if sig.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(SensorError::InvalidNoise("5G sigmas must be non-negative".into()));
        }
        if !(self.nlos_bias_min_m >= 0.0 && self.nlos_bias_max_m >= self.nlos_bias_min_m) {
            return Err(SensorError::InvalidNoise("NLOS bias range must satisfy 0 <= min <= max".into()));
        }
        if !(self.nlos_extra_attenuation_db >= 0.0) {
            return Err(SensorError::InvalidNoise("NLOS attenuation must be non-negative".into()));
        }
        self.path_loss.validate()
    }
}

/// Noise-free observables from a site to a UE in the same grid: (range, aod_h, aod_v, degenerate).
pub fn geometry(bs: &UtmPosition, ue: &UtmPosition) -> (f64, f64, f64, bool) {
    let (dx, dy, dz) = (ue.easting - bs.easting, ue.northing - bs.northing, ue.height - bs.height);
    let r = (dx * dx + dy * dy + dz * dz).sqrt();
    let horizontal = dx.hypot(dy);
    if horizontal <= 1e-9 * r.max(1.0) {
        return (r, 0.0, if dz >= 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 }, true);
    }
    (r, wrap_two_pi(dx.atan2(dy)), (dz / r).clamp(-1.0, 1.0).asin(), false)
}

/// Generates measurements for every 5G epoch and every non-blocked site.
///
/// Draw order per measurement is fixed (range, azimuth, elevation, power, NLOS bias), so a
/// given seed reproduces the stream bit-exactly.
pub fn gen_5g<R: Rng>(
    traj: &Trajectory,
    sites: &[BsSite],
    model: &crate::scenario::VisibilityModel,
    noise: &FiveGNoise,
    rate_hz: f64,
    rng: &mut R,
) -> Result<Vec<Meas5G>, SensorError> {
    if !(rate_hz > 0.0) {
        return Err(SensorError::InvalidRate(rate_hz));
    }
    noise.validate()?;
    let mut out = Vec::new();
    let (s_az, s_el) = (noise.aod_h_sigma_deg.to_radians(), noise.aod_v_sigma_deg.to_radians());
    for t in epoch_grid(traj.start_time(), traj.end_time(), rate_hz) {
        let epoch = traj.interpolate(t)?;
        for bs in sites {
            let state = visibility(model, bs, &epoch);
            if state == LinkState::Blocked {
                continue;
            }
            let ue = geodetic_to_utm_in_zone(&epoch.pos, bs.pos.zone)?;
            let (r, az, el, degenerate) = geometry(&bs.pos, &ue);
            let n_r: f64 = rng.sample(StandardNormal);
            let n_az: f64 = rng.sample(StandardNormal);
            let n_el: f64 = rng.sample(StandardNormal);
            let n_p: f64 = rng.sample(StandardNormal);
            let los = state == LinkState::Los;
            let (bias, atten) = if los {
                (0.0, 0.0)
            } else {
                let b = if noise.nlos_bias_max_m > noise.nlos_bias_min_m {
                    rng.random_range(noise.nlos_bias_min_m..noise.nlos_bias_max_m)
                } else {
                    noise.nlos_bias_min_m
                };
                (b, noise.nlos_extra_attenuation_db)
            };
            let rtt = 2.0 * (r + bias + noise.range_sigma_m * n_r) / SPEED_OF_LIGHT;
            let aod_h = if degenerate { 0.0 } else { wrap_two_pi(az + s_az * n_az) };
            let aod_v = (el + s_el * n_el).clamp(-FRAC_PI_2, FRAC_PI_2);
            let rx_power = noise.path_loss.rx_power_dbm(r) - atten + noise.power_sigma_db * n_p;
            out.push(Meas5G {
                t,
                bs_id: bs.id,
                rtt: rtt.max(f64::MIN_POSITIVE),
                aod_h,
                aod_v,
                rx_power,
                truth_los: los,
                aod_h_degenerate: degenerate,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::UtmZone;

    fn utm(e: f64, n: f64, h: f64) -> UtmPosition {
        UtmPosition { easting: e, northing: n, height: h, zone: UtmZone::new(17, true).unwrap() }
    }

    // Δ = (120, 160, −23), r = √40529; reference values from an independent scalar script.
    #[test]
    fn worked_geometry_example() {
        let (r, az, el, deg) = geometry(&utm(500.0, 1000.0, 25.0), &utm(620.0, 1160.0, 2.0));
        assert!(!deg);
        assert!((r - 40529f64.sqrt()).abs() < 1e-12);
        assert!((r - 201.318_156_160_839_1).abs() < 1e-9);
        assert!((2.0 * r / SPEED_OF_LIGHT - 1.343_050_172_135_011_5e-6).abs() < 1e-18);
        assert!((az - 0.643_501_108_793_284_4).abs() < 1e-12);
        assert!((el + 0.114_497_026_767_450_15).abs() < 1e-12);
    }

    #[test]
    fn overhead_ue_is_degenerate() {
        let (r, az, el, deg) = geometry(&utm(500.0, 1000.0, 25.0), &utm(500.0, 1000.0, 40.0));
        assert!(deg);
        assert_eq!((r, az, el), (15.0, 0.0, FRAC_PI_2));
    }

    #[test]
    fn path_loss_inverts() {
        let pl = PathLoss::default();
        for r in [1.0, 12.5, 201.3, 999.0] {
            assert!((pl.range_from_power(pl.rx_power_dbm(r)) - r).abs() < 1e-9 * r);
        }
        // Free-space loss at 1 m and 28 GHz is 61.39 dB.
        assert!((pl.tx_power_dbm - pl.rx_power_dbm(1.0) - 61.390_943_848_727_76).abs() < 1e-9);
    }

    #[test]
    fn jsonl_keys() {
        let m = Meas5G { t: 1.5, bs_id: 3, rtt: 1e-6, aod_h: 0.5, aod_v: -0.1, rx_power: -70.0, truth_los: true, aod_h_degenerate: false };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"t":1.5,"bs_id":3,"rtt_s":1e-6,"aod_h_rad":0.5,"aod_v_rad":-0.1,"rx_power_dbm":-70.0,"truth_los":true}"#);
        let back: Meas5G = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
