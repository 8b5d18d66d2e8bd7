//! Transverse Mercator via the Krüger series to sixth order in the third flattening.

use super::consts::*;
use super::{wrap_pi, GeoError, GeodeticPosition};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

const UTM_LAT_LIMIT_DEG: f64 = 84.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtmZone {
    pub number: u8,
    pub north: bool,
}

impl UtmZone {
    pub fn new(number: i32, north: bool) -> Result<Self, GeoError> {
        if !(1..=60).contains(&number) {
            return Err(GeoError::InvalidZone(number));
        }
        Ok(Self { number: number as u8, north })
    }

    /// Parses labels such as `17N` or `33S`.
    pub fn parse(label: &str) -> Result<Self, GeoError> {
        let label = label.trim();
        let Some(hemi) = label.chars().last() else {
            return Err(GeoError::InvalidZone(-1));
        };
        let north = match hemi {
            'N' | 'n' => true,
            'S' | 's' => false,
            _ => return Err(GeoError::InvalidZone(-1)),
        };
        let digits = &label[..label.len() - 1];
        let number: i32 = digits.parse().map_err(|_| GeoError::InvalidZone(-1))?;
        Self::new(number, north)
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.number, if self.north { 'N' } else { 'S' })
    }
}

impl std::fmt::Display for UtmZone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// UTM grid position. `height` carries the ellipsoidal height unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtmPosition {
    pub easting: f64,
    pub northing: f64,
    pub height: f64,
    pub zone: UtmZone,
}

struct Series {
    a_rect: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
    e: f64,
}

fn series() -> &'static Series {
    static S: OnceLock<Series> = OnceLock::new();
    S.get_or_init(|| {
        let n = FLATTENING / (2.0 - FLATTENING);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let n5 = n4 * n;
        let n6 = n5 * n;
        let a_rect = SEMI_MAJOR_AXIS / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4 - 127.0 / 288.0 * n5 + 7891.0 / 37800.0 * n6,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 + 281.0 / 630.0 * n5 - 1983433.0 / 1935360.0 * n6,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4 + 15061.0 / 26880.0 * n5 + 167603.0 / 181440.0 * n6,
            49561.0 / 161280.0 * n4 - 179.0 / 168.0 * n5 + 6601661.0 / 7257600.0 * n6,
            34729.0 / 80640.0 * n5 - 3418889.0 / 1995840.0 * n6,
            212378941.0 / 319334400.0 * n6,
        ];
        let beta = [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4 - 81.0 / 512.0 * n5 + 96199.0 / 604800.0 * n6,
            1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4 + 46.0 / 105.0 * n5 - 1118711.0 / 3870720.0 * n6,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 - 209.0 / 4480.0 * n5 + 5569.0 / 90720.0 * n6,
            4397.0 / 161280.0 * n4 - 11.0 / 504.0 * n5 - 830251.0 / 7257600.0 * n6,
            4583.0 / 161280.0 * n5 - 108847.0 / 3991680.0 * n6,
            20648693.0 / 638668800.0 * n6,
        ];
        Series { a_rect, alpha, beta, e: ECCENTRICITY_SQ.sqrt() }
    })
}

/// Central meridian of a zone, radians.
pub fn central_meridian(zone: u8) -> f64 {
    (f64::from(zone) * 6.0 - 183.0).to_radians()
}

/// Standard zone for a position (no Norway/Svalbard exceptions).
pub fn zone_for(p: &GeodeticPosition) -> UtmZone {
    let lon_deg = wrap_pi(p.lon).to_degrees();
    let mut number = ((lon_deg + 180.0) / 6.0).floor() as i32 + 1;
    if number > 60 {
        number = 1;
    }
    UtmZone { number: number.clamp(1, 60) as u8, north: p.lat >= 0.0 }
}

pub fn geodetic_to_utm(p: &GeodeticPosition) -> Result<UtmPosition, GeoError> {
    geodetic_to_utm_in_zone(p, zone_for(p))
}

/// Forward mapping into a caller-chosen zone (scenarios pin one zone for their lifetime).
pub fn geodetic_to_utm_in_zone(p: &GeodeticPosition, zone: UtmZone) -> Result<UtmPosition, GeoError> {
    if !(p.lat.is_finite() && p.lon.is_finite() && p.h.is_finite()) {
        return Err(GeoError::NonFinite);
    }
    if p.lat.abs().to_degrees() > UTM_LAT_LIMIT_DEG {
        return Err(GeoError::OutsideUtmBand { lat_deg: p.lat.to_degrees() });
    }
    let s = series();
    let lam = wrap_pi(p.lon - central_meridian(zone.number));
    let tau = p.lat.tan();
    let sigma = (s.e * (s.e * tau / (1.0 + tau * tau).sqrt()).atanh()).sinh();
    let tau_p = tau * (1.0 + sigma * sigma).sqrt() - sigma * (1.0 + tau * tau).sqrt();
    let (sin_lam, cos_lam) = lam.sin_cos();
    let xi_p = tau_p.atan2(cos_lam);
    let eta_p = (sin_lam / (tau_p * tau_p + cos_lam * cos_lam).sqrt()).asinh();
    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    let easting = UTM_FALSE_EASTING + UTM_SCALE * s.a_rect * eta;
    let mut northing = UTM_SCALE * s.a_rect * xi;
    if !zone.north {
        northing += UTM_FALSE_NORTHING_SOUTH;
    }
    Ok(UtmPosition { easting, northing, height: p.h, zone })
}

pub fn utm_to_geodetic(u: &UtmPosition) -> Result<GeodeticPosition, GeoError> {
    if !(u.easting.is_finite() && u.northing.is_finite() && u.height.is_finite()) {
        return Err(GeoError::NonFinite);
    }
    let s = series();
    let northing = if u.zone.north { u.northing } else { u.northing - UTM_FALSE_NORTHING_SOUTH };
    let xi = northing / (UTM_SCALE * s.a_rect);
    let eta = (u.easting - UTM_FALSE_EASTING) / (UTM_SCALE * s.a_rect);
    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j as f64 + 1.0);
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let sinh_eta = eta_p.sinh();
    let (sin_xi, cos_xi) = xi_p.sin_cos();
    let tau_p = sin_xi / (sinh_eta * sinh_eta + cos_xi * cos_xi).sqrt();
    let lam = sinh_eta.atan2(cos_xi);

    // Newton iteration for tau from the conformal tau'.
    let e2 = ECCENTRICITY_SQ;
    let mut tau = tau_p;
    for _ in 0..10 {
        let sigma = (s.e * (s.e * tau / (1.0 + tau * tau).sqrt()).atanh()).sinh();
        let tau_i = tau * (1.0 + sigma * sigma).sqrt() - sigma * (1.0 + tau * tau).sqrt();
        let d_tau =
            (tau_p - tau_i) / (1.0 + tau_i * tau_i).sqrt() * (1.0 + (1.0 - e2) * tau * tau) / ((1.0 - e2) * (1.0 + tau * tau).sqrt());
        tau += d_tau;
        if d_tau.abs() <= 1e-15 * tau.abs().max(1.0) {
            break;
        }
    }
    let lat = tau.atan();
    let lon = wrap_pi(lam + central_meridian(u.zone.number));
    GeodeticPosition::new(lat, lon, u.height)
}
