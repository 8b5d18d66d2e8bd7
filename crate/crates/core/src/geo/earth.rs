use super::consts::*;
use super::{GeoError, GeodeticPosition, Quaternion};
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::FRAC_PI_2;

const POLE_MARGIN: f64 = 1e-9;

/// Meridian (M) and normal (N) radii of curvature, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    pub meridian: f64,
    pub normal: f64,
}

pub fn radii(lat: f64) -> Radii {
    let s = lat.sin();
    let w2 = 1.0 - ECCENTRICITY_SQ * s * s;
    let w = w2.sqrt();
    Radii { meridian: SEMI_MAJOR_AXIS * (1.0 - ECCENTRICITY_SQ) / (w2 * w), normal: SEMI_MAJOR_AXIS / w }
}

/// Somigliana normal gravity with a linear free-air height correction, m/s².
pub fn normal_gravity(lat: f64, h: f64) -> f64 {
    let s2 = lat.sin().powi(2);
    let gamma0 = GRAVITY_EQUATOR * (1.0 + SOMIGLIANA_K * s2) / (1.0 - ECCENTRICITY_SQ * s2).sqrt();
    gamma0 - GRAVITY_HEIGHT_GRADIENT * h
}

pub fn earth_rate_l(lat: f64) -> Vector3<f64> {
    Vector3::new(0.0, EARTH_RATE * lat.cos(), EARTH_RATE * lat.sin())
}

pub fn transport_rate_l(p: &GeodeticPosition, v_l: &Vector3<f64>, r: &Radii) -> Vector3<f64> {
    let rn = r.normal + p.h;
    Vector3::new(-v_l.y / (r.meridian + p.h), v_l.x / rn, v_l.x * p.lat.tan() / rn)
}

/// Switches for the external-effect terms. Tests disable them to isolate single-axis motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EarthOptions {
    pub earth_rate: bool,
    pub transport_rate: bool,
}

impl Default for EarthOptions {
    fn default() -> Self {
        Self { earth_rate: true, transport_rate: true }
    }
}

impl EarthOptions {
    pub const NONE: EarthOptions = EarthOptions { earth_rate: false, transport_rate: false };
}

/// External-effect terms needed by one mechanization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthNavTerms {
    pub omega_ie_l: Vector3<f64>,
    pub omega_el_l: Vector3<f64>,
    pub g_l: Vector3<f64>,
    pub r_b_l: Matrix3<f64>,
    pub meridian_radius: f64,
    pub normal_radius: f64,
}

impl EarthNavTerms {
    /// ω_il^l = ω_ie^l + ω_el^l.
    pub fn omega_il_l(&self) -> Vector3<f64> {
        self.omega_ie_l + self.omega_el_l
    }
}

pub fn compute_earth_terms(p: &GeodeticPosition, v_l: &Vector3<f64>, q: &Quaternion) -> Result<EarthNavTerms, GeoError> {
    compute_earth_terms_with(p, v_l, q, EarthOptions::default())
}

pub(crate) fn compute_earth_terms_with(
    p: &GeodeticPosition,
    v_l: &Vector3<f64>,
    q: &Quaternion,
    opts: EarthOptions,
) -> Result<EarthNavTerms, GeoError> {
    if (p.lat.abs() - FRAC_PI_2).abs() < POLE_MARGIN {
        return Err(GeoError::PoleSingularity { lat_deg: p.lat.to_degrees() });
    }
    let r = radii(p.lat);
    let omega_ie_l = if opts.earth_rate { earth_rate_l(p.lat) } else { Vector3::zeros() };
    let omega_el_l = if opts.transport_rate { transport_rate_l(p, v_l, &r) } else { Vector3::zeros() };
    Ok(EarthNavTerms {
        omega_ie_l,
        omega_el_l,
        g_l: Vector3::new(0.0, 0.0, -normal_gravity(p.lat, p.h)),
        r_b_l: q.to_rotation_matrix(),
        meridian_radius: r.meridian,
        normal_radius: r.normal,
    })
}
