//! Versioned scenario configuration, read from TOML.

use crate::fivegfix::FixConfig;
use crate::fusion::FusionConfig;
use crate::geo::UtmZone;
use crate::ins::InsOptions;
use crate::scenario::{downtown_tour, Building, RandomNlos, TrackSpec, VisibilityMode};
use crate::sensors::{FiveGNoise, GaussMarkovParams, OdoNoise, WheelConfig};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const CONFIG_VERSION: u32 = 1;

/// Scripted full-outage windows of the bundled scenario, seconds.
pub const DEFAULT_OUTAGES: [(f64, f64); 4] = [(141.5, 150.5), (396.5, 405.5), (688.5, 697.5), (1003.0, 1012.0)];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported config version {0}, expected {CONFIG_VERSION}")]
    Version(u32),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(key: &str, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySource {
    /// The bundled 20-minute tour starting at the given origin.
    DowntownTour { origin_lat_deg: f64, origin_lon_deg: f64 },
    /// A maneuver script.
    Synthetic { spec: TrackSpec },
    /// Truth trajectory CSV in the documented format.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// UTM zone label such as "17N".
    pub zone: String,
    /// Constant UE antenna height, metres (ellipsoidal).
    pub h_ue_m: f64,
    pub trajectory: TrajectorySource,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            zone: "17N".into(),
            h_ue_m: 1.5,
            trajectory: TrajectorySource::DowntownTour { origin_lat_deg: 43.6452, origin_lon_deg: -79.3806 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentSection {
    pub spacing_m: f64,
    /// Offset to the right of the direction of travel, metres.
    pub lateral_offset_m: f64,
    /// Antenna height, metres (ellipsoidal).
    pub height_m: f64,
}

impl Default for DeploymentSection {
    fn default() -> Self {
        Self { spacing_m: 250.0, lateral_offset_m: 10.0, height_m: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilitySection {
    pub mode: VisibilityMode,
    pub max_range_m: f64,
    /// Windows [t_start, t_end) in seconds during which every site is blocked.
    pub outages: Vec<[f64; 2]>,
    pub random_nlos: RandomNlos,
    /// Building prisms for the geometric mode.
    pub buildings: Vec<Building>,
    /// GeoJSON building polygons added to `buildings`; relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buildings_file: Option<PathBuf>,
    /// Number of building crossings that turn NLOS into blocked in the geometric mode.
    pub n_block: usize,
}

impl Default for VisibilitySection {
    fn default() -> Self {
        Self {
            mode: VisibilityMode::Scheduled,
            max_range_m: 300.0,
            outages: DEFAULT_OUTAGES.iter().map(|&(a, b)| [a, b]).collect(),
            random_nlos: RandomNlos::default(),
            buildings: Vec::new(),
            buildings_file: None,
            n_block: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub imu_rate_hz: f64,
    pub odo_rate_hz: f64,
    pub fiveg_rate_hz: f64,
    pub imu: GaussMarkovParams,
    pub odometer: OdoNoise,
    pub wheel: WheelConfig,
    pub fiveg: FiveGNoise,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            imu_rate_hz: 100.0,
            odo_rate_hz: 10.0,
            fiveg_rate_hz: 10.0,
            imu: GaussMarkovParams::default(),
            odometer: OdoNoise::default(),
            wheel: WheelConfig::default(),
            fiveg: FiveGNoise::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub cdf_points: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { cdf_points: 200 }
    }
}

/// Everything that determines a run. `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub deployment: DeploymentSection,
    #[serde(default)]
    pub visibility: VisibilitySection,
    #[serde(default)]
    pub sensors: SensorSection,
    #[serde(default)]
    pub fiveg_fix: FixConfig,
    #[serde(default)]
    pub ins: InsOptions,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

impl ScenarioConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            version: CONFIG_VERSION,
            seed,
            scenario: ScenarioSection::default(),
            deployment: DeploymentSection::default(),
            visibility: VisibilitySection::default(),
            sensors: SensorSection::default(),
            fiveg_fix: FixConfig::default(),
            ins: InsOptions::default(),
            fusion: FusionConfig::default(),
            evaluation: EvaluationSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(s).map_err(|e| ConfigError::Parse { path: String::new(), message: e.to_string() })?;
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| ConfigError::Parse { path: e.path().to_string(), message: e.inner().message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn zone(&self) -> Result<UtmZone, ConfigError> {
        UtmZone::parse(&self.scenario.zone).map_err(|e| invalid("scenario.zone", e))
    }

    /// Maneuver script for the synthetic sources; `None` for file trajectories.
    pub fn track_spec(&self) -> Option<TrackSpec> {
        match &self.scenario.trajectory {
            TrajectorySource::DowntownTour { origin_lat_deg, origin_lon_deg } => {
                Some(downtown_tour(*origin_lat_deg, *origin_lon_deg, self.scenario.h_ue_m, self.sensors.imu_rate_hz))
            }
            TrajectorySource::Synthetic { spec } => Some(spec.clone()),
            TrajectorySource::File { .. } => None,
        }
    }

    pub fn outage_windows(&self) -> Vec<(f64, f64)> {
        self.visibility.outages.iter().map(|w| (w[0], w[1])).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.version));
        }
        self.zone()?;
        let s = &self.sensors;
        for (key, v) in [
            ("sensors.imu_rate_hz", s.imu_rate_hz),
            ("sensors.odo_rate_hz", s.odo_rate_hz),
            ("sensors.fiveg_rate_hz", s.fiveg_rate_hz),
            ("fiveg_fix.rate_hz", self.fiveg_fix.rate_hz),
            ("deployment.spacing_m", self.deployment.spacing_m),
            ("visibility.max_range_m", self.visibility.max_range_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, format!("must be positive, got {v}")));
            }
        }
        if s.imu_rate_hz < 50.0 {
            return Err(invalid("sensors.imu_rate_hz", "must be at least 50 Hz"));
        }
        s.imu.validate().map_err(|e| invalid("sensors.imu", e))?;
        s.wheel.validate().map_err(|e| invalid("sensors.wheel", e))?;
        s.fiveg.validate().map_err(|e| invalid("sensors.fiveg", e))?;
        self.fusion.validate().map_err(|e| invalid("fusion", e))?;
        if !(self.fiveg_fix.gamma_m > 0.0) {
            return Err(invalid("fiveg_fix.gamma_m", "must be positive"));
        }
        for (i, w) in self.visibility.outages.iter().enumerate() {
            if !(w[1] > w[0]) {
                return Err(invalid(&format!("visibility.outages[{i}]"), "end must follow start"));
            }
        }
        if self.evaluation.cdf_points == 0 {
            return Err(invalid("evaluation.cdf_points", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ScenarioConfig::with_seed(7);
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ScenarioConfig::from_toml_str("version = 1\nseed = 3\n").unwrap();
        assert_eq!(cfg, ScenarioConfig::with_seed(3));
        assert_eq!(cfg.outage_windows().len(), 4);
    }

    #[test]
    fn seed_is_mandatory() {
        let err = ScenarioConfig::from_toml_str("version = 1\n").unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = ScenarioConfig::from_toml_str("version = 1\nseed = 1\n[fusion.odometer]\nspeed_ms = 0.1\nbogus = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("fusion.odometer") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(ScenarioConfig::from_toml_str("version = 2\nseed = 1\n"), Err(ConfigError::Version(2))));
        let err = ScenarioConfig::from_toml_str("version = 1\nseed = 1\n[deployment]\nspacing_m = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("deployment.spacing_m"));
        let err = ScenarioConfig::from_toml_str("version = 1\nseed = 1\n[scenario]\nzone = \"99Q\"\n").unwrap_err();
        assert!(err.to_string().contains("scenario.zone"));
    }

    #[test]
    fn file_trajectory_parses() {
        let cfg =
            ScenarioConfig::from_toml_str("version = 1\nseed = 1\n[scenario.trajectory]\nkind = \"file\"\npath = \"truth.csv\"\n").unwrap();
        assert!(cfg.track_spec().is_none());
    }
}
