use super::{wrap_pi, wrap_two_pi};
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::ops::Mul;

const GIMBAL_MARGIN: f64 = 1e-6;

/// Euler attitude of the body frame relative to the l-frame, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attitude {
    pub pitch: f64,
    pub roll: f64,
    pub azimuth: f64,
}

impl Attitude {
    pub fn new(pitch: f64, roll: f64, azimuth: f64) -> Self {
        Self { pitch, roll: wrap_pi(roll), azimuth: wrap_two_pi(azimuth) }
    }

    pub fn level(azimuth: f64) -> Self {
        Self::new(0.0, 0.0, azimuth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttitudeStatus {
    Ok,
    /// Pitch within 1e-6 rad of ±π/2: roll and azimuth are not separable.
    GimbalLock,
}

/// Scalar-first quaternion rotating b-frame vectors into the l-frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    fn axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, axis.x * s, axis.y * s, axis.z * s)
    }

    /// Exponential map of a rotation vector.
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            return Self::new(1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z).normalize();
        }
        Self::axis_angle(v / angle, angle)
    }

    /// Rotation vector of a unit quaternion (shortest rotation).
    pub fn to_rotation_vector(&self) -> Vector3<f64> {
        let q = if self.w < 0.0 { Self::new(-self.w, -self.x, -self.y, -self.z) } else { *self };
        let v = Vector3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v / q.w;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    /// Direction cosine matrix R_b^l.
    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let Quaternion { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_rotation_matrix() * v
    }

    /// 4×4 operator Ω(ω) with q̇ = ½ Ω(ω) q for a body-referenced rate ω.
    pub fn rate_operator(w: &Vector3<f64>) -> Matrix4<f64> {
        Matrix4::new(
            0.0, -w.x, -w.y, -w.z, //
            w.x, 0.0, w.z, -w.y, //
            w.y, -w.z, 0.0, w.x, //
            w.z, w.y, -w.x, 0.0,
        )
    }

    /// First-order update q + ½·dt·Ω(ω)·q followed by renormalization.
    pub fn integrate_first_order(&self, body_rate: &Vector3<f64>, dt: f64) -> Self {
        let q = self.as_vector();
        let next = q + 0.5 * dt * Self::rate_operator(body_rate) * q;
        Self::from_vector(&next).normalize()
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        let l = self;
        Quaternion::new(
            l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        )
    }
}

/// Skew-symmetric cross-product matrix: skew(a)·b = a × b.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// R_b^l = Rz(π/2 − azimuth) · Ry(−pitch) · Rx(roll) expressed as a quaternion.
pub fn attitude_to_quaternion(a: &Attitude) -> Quaternion {
    let yaw = Quaternion::axis_angle(Vector3::z(), FRAC_PI_2 - a.azimuth);
    let pitch = Quaternion::axis_angle(Vector3::y(), -a.pitch);
    let roll = Quaternion::axis_angle(Vector3::x(), a.roll);
    let q = (yaw * pitch * roll).normalize();
    if q.w < 0.0 {
        Quaternion::new(-q.w, -q.x, -q.y, -q.z)
    } else {
        q
    }
}

pub fn quaternion_to_attitude(q: &Quaternion) -> (Attitude, AttitudeStatus) {
    let r = q.normalize().to_rotation_matrix();
    let pitch = r[(2, 0)].atan2((r[(2, 1)] * r[(2, 1)] + r[(2, 2)] * r[(2, 2)]).sqrt());
    let status = if (pitch.abs() - FRAC_PI_2).abs() < GIMBAL_MARGIN { AttitudeStatus::GimbalLock } else { AttitudeStatus::Ok };
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    (Attitude::new(pitch, roll, FRAC_PI_2 - yaw), status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn angle_diff(a: f64, b: f64) -> f64 {
        wrap_pi(a - b).abs()
    }

    #[test]
    fn east_facing_level_attitude_is_identity() {
        let q = attitude_to_quaternion(&Attitude::level(FRAC_PI_2));
        assert!((q.w - 1.0).abs() < 1e-15 && q.x.abs() < 1e-15 && q.z.abs() < 1e-15);
    }

    #[test]
    fn zero_attitude_faces_north() {
        let q = attitude_to_quaternion(&Attitude::new(0.0, 0.0, 0.0));
        // A quarter turn about the up axis maps body-forward onto north.
        let s = 0.5f64.sqrt();
        assert!((q.w - s).abs() < 1e-15 && (q.z - s).abs() < 1e-15);
        let fwd = q.rotate(&Vector3::x());
        assert!((fwd - Vector3::y()).norm() < 1e-15);
        let (att, status) = quaternion_to_attitude(&q);
        assert_eq!(status, AttitudeStatus::Ok);
        assert!(angle_diff(att.azimuth, 0.0) < 1e-15);
    }

    #[test]
    fn azimuth_quarter_turn_round_trip() {
        let q0 = attitude_to_quaternion(&Attitude::level(0.0));
        let q1 = attitude_to_quaternion(&Attitude::level(FRAC_PI_2));
        let rel = q0.conjugate() * q1;
        assert!((rel.to_rotation_vector().norm() - FRAC_PI_2).abs() < 1e-12);
        let (att, _) = quaternion_to_attitude(&q1);
        assert!(angle_diff(att.azimuth, FRAC_PI_2) < 1e-12);
    }

    #[test]
    fn forward_axis_follows_pitch_and_azimuth() {
        let a = Attitude::new(0.2, 0.0, 1.0);
        let fwd = attitude_to_quaternion(&a).rotate(&Vector3::x());
        let expected = Vector3::new(0.2f64.cos() * 1.0f64.sin(), 0.2f64.cos() * 1.0f64.cos(), 0.2f64.sin());
        assert!((fwd - expected).norm() < 1e-14);
    }

    #[test]
    fn positive_roll_lowers_right_side() {
        let q = attitude_to_quaternion(&Attitude::new(0.0, 0.3, FRAC_PI_2));
        // body y points left; after positive roll it rises.
        assert!(q.rotate(&Vector3::y()).z > 0.0);
    }

    #[test]
    fn gimbal_lock_is_flagged() {
        let q = attitude_to_quaternion(&Attitude::new(FRAC_PI_2, 0.1, 1.0));
        let (_, status) = quaternion_to_attitude(&q);
        assert_eq!(status, AttitudeStatus::GimbalLock);
    }

    #[test]
    fn first_order_update_matches_closed_form_for_small_steps() {
        let w = Vector3::new(0.0, 0.0, 0.3);
        let q = Quaternion::IDENTITY.integrate_first_order(&w, 0.01);
        let exact = 2.0 * (0.5f64 * 0.003).atan();
        assert!((q.to_rotation_vector().z - exact).abs() < 1e-15);
        assert!((q.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rate_operator_is_right_multiplication() {
        let q = attitude_to_quaternion(&Attitude::new(0.1, -0.2, 2.0));
        let w = Vector3::new(0.3, -0.1, 0.7);
        let lhs = Quaternion::rate_operator(&w) * q.as_vector();
        let rhs = (q * Quaternion::new(0.0, w.x, w.y, w.z)).as_vector();
        assert!((lhs - rhs).norm() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn attitude_round_trip(
            pitch in -89.0f64..89.0,
            roll in -179.9f64..179.9,
            az in 0.0f64..359.99,
        ) {
            let a = Attitude::new(pitch.to_radians(), roll.to_radians(), az.to_radians());
            let q = attitude_to_quaternion(&a);
            prop_assert!((q.norm() - 1.0).abs() < 1e-12);
            let (b, status) = quaternion_to_attitude(&q);
            prop_assert_eq!(status, AttitudeStatus::Ok);
            prop_assert!((b.pitch - a.pitch).abs() < 1e-10);
            prop_assert!(angle_diff(b.roll, a.roll) < 1e-10);
            prop_assert!(angle_diff(b.azimuth, a.azimuth) < 1e-10);
        }

        #[test]
        fn rotation_matrices_are_orthonormal(
            w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
        ) {
            let q = Quaternion::new(w, x, y, z);
            prop_assume!(q.norm() > 1e-3);
            let r = q.normalize().to_rotation_matrix();
            let err = (r.transpose() * r - Matrix3::identity()).abs().max();
            prop_assert!(err < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rotation_vector_round_trip(x in -1.8f64..1.8, y in -1.8f64..1.8, z in -1.8f64..1.8) {
            let v = Vector3::new(x, y, z);
            let back = Quaternion::from_rotation_vector(&v).to_rotation_vector();
            prop_assert!((back - v).norm() < 1e-12);
        }
    }
}
