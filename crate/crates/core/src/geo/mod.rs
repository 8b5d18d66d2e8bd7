//! Coordinate frames, Earth model and rotation algebra shared by every estimator.
//!
//! Frame conventions used across the crate:
//!
//! - l-frame: local level, East-North-Up.
//! - b-frame: vehicle body, x forward (longitudinal), y left (lateral), z up (vertical).
//! - Quaternions are scalar-first and rotate b-frame vectors into the l-frame.
//! - Azimuth is measured clockwise from north, pitch is positive nose up and roll is
//!   positive right side down.

mod earth;
mod quaternion;
mod utm;

pub(crate) use earth::compute_earth_terms_with;
pub use earth::{compute_earth_terms, earth_rate_l, normal_gravity, radii, transport_rate_l, EarthNavTerms, EarthOptions, Radii};
pub use quaternion::{attitude_to_quaternion, quaternion_to_attitude, skew, Attitude, AttitudeStatus, Quaternion};
pub use utm::{central_meridian, geodetic_to_utm, geodetic_to_utm_in_zone, utm_to_geodetic, zone_for, UtmPosition, UtmZone};

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Physical constants of the WGS-84 model and of radio propagation.
pub mod consts {
    /// Speed of light in vacuum, m/s (exact).
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// WGS-84 semi-major axis, m.
    pub const SEMI_MAJOR_AXIS: f64 = 6_378_137.0;
    /// WGS-84 flattening.
    pub const FLATTENING: f64 = 1.0 / 298.257_223_563;
    /// First eccentricity squared.
    pub const ECCENTRICITY_SQ: f64 = FLATTENING * (2.0 - FLATTENING);
    /// Earth rotation rate, rad/s.
    pub const EARTH_RATE: f64 = 7.292_115e-5;
    /// Normal gravity at the equator, m/s².
    pub const GRAVITY_EQUATOR: f64 = 9.780_325_335_9;
    /// Somigliana constant k = (b·γp − a·γe) / (a·γe).
    pub const SOMIGLIANA_K: f64 = 0.001_931_852_652_41;
    /// Linear free-air gradient of normal gravity, (m/s²)/m.
    pub const GRAVITY_HEIGHT_GRADIENT: f64 = 3.086e-6;
    /// UTM central scale factor.
    pub const UTM_SCALE: f64 = 0.9996;
    /// UTM false easting, m.
    pub const UTM_FALSE_EASTING: f64 = 500_000.0;
    /// UTM false northing for the southern hemisphere, m.
    pub const UTM_FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("latitude {lat_deg:.6}° lies outside the UTM band (|lat| <= 84°)")]
    OutsideUtmBand { lat_deg: f64 },
    #[error("latitude {lat_deg:.9}° is at the pole singularity")]
    PoleSingularity { lat_deg: f64 },
    #[error("invalid latitude {0} rad")]
    InvalidLatitude(f64),
    #[error("invalid UTM zone {0}")]
    InvalidZone(i32),
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Geodetic WGS-84 position: latitude/longitude in radians, ellipsoidal height in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPosition {
    pub lat: f64,
    pub lon: f64,
    pub h: f64,
}

impl GeodeticPosition {
    /// Builds a validated position; longitude is wrapped to (−π, π].
    pub fn new(lat: f64, lon: f64, h: f64) -> Result<Self, GeoError> {
        if !(lat.is_finite() && lon.is_finite() && h.is_finite()) {
            return Err(GeoError::NonFinite);
        }
        if lat.abs() > FRAC_PI_2 {
            return Err(GeoError::InvalidLatitude(lat));
        }
        Ok(Self { lat, lon: wrap_pi(lon), h })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, h: f64) -> Result<Self, GeoError> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), h)
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_pi(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Wraps an angle to [0, 2π).
pub fn wrap_two_pi(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Degrees value whose `to_radians()` reproduces `rad` exactly when such a value exists
/// within a few ulps of the naive conversion.
///
/// Text formats store angles in degrees; this keeps save/load of radian values lossless
/// for every value that was itself obtained from a degree value.
pub fn degrees_exact(rad: f64) -> f64 {
    let d0 = rad.to_degrees();
    if d0.to_radians() == rad || !d0.is_finite() {
        return d0;
    }
    let (mut up, mut down) = (d0, d0);
    for _ in 0..4 {
        up = next_up(up);
        down = next_down(down);
        if up.to_radians() == rad {
            return up;
        }
        if down.to_radians() == rad {
            return down;
        }
    }
    d0
}

/// Radian value that survives a degrees text round trip bit-exactly.
pub fn snap_radians(rad: f64) -> f64 {
    rad.to_degrees().to_radians()
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wraps_longitude() {
        let p = GeodeticPosition::new(0.1, 3.0 * PI / 2.0, 0.0).unwrap();
        assert!((p.lon + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_pi(PI), PI);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_latitude() {
        assert!(GeodeticPosition::new(1.6, 0.0, 0.0).is_err());
        assert_eq!(GeodeticPosition::new(f64::NAN, 0.0, 0.0), Err(GeoError::NonFinite));
    }

    proptest! {
        #[test]
        fn degree_text_round_trip_is_exact(d in -180.0f64..180.0) {
            let rad = d.to_radians();
            let back = degrees_exact(rad);
            let text = format!("{back}");
            let parsed: f64 = text.parse().unwrap();
            prop_assert_eq!(parsed.to_radians(), rad);
        }

        #[test]
        fn snapped_values_round_trip(r in -3.2f64..3.2) {
            let s = snap_radians(r);
            prop_assert_eq!(degrees_exact(s).to_radians(), s);
        }
    }
}
