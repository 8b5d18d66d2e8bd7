use super::{inject_error, FusionError, FusionState, Mat15, Vec15, ATT, POS, VEL};
use crate::geo::{GeodeticPosition, Quaternion};
use crate::ins::position_difference;
use crate::sensors::{OdoSample, WheelConfig};
use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

/// Aiding vector: a 5G position with its covariance and an l-frame odometer velocity with
/// its covariance. Either block may be absent, not both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionMeasurement {
    pub t: f64,
    pub pos_5g: Option<(GeodeticPosition, Matrix3<f64>)>,
    pub v_odo_l: Option<(Vector3<f64>, Matrix3<f64>)>,
    /// Include the attitude sensitivity of the projected odometer velocity in H.
    pub odo_attitude_coupling: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Position,
    Velocity,
}

/// One block update as written to the event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub t: f64,
    pub block: Block,
    pub innovation: [f64; 3],
    /// Squared Mahalanobis distance of the innovation.
    pub nis: f64,
    pub accepted: bool,
}

/// Error-state estimate and posterior covariance before feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub dx: Vec15,
    pub cov: Mat15,
}

fn selector(offset: usize) -> SMatrix<f64, 3, 15> {
    let mut h = SMatrix::<f64, 3, 15>::zeros();
    for i in 0..3 {
        h[(i, offset + i)] = 1.0;
    }
    h
}

/// Sensitivity of an l-frame odometer velocity to the error state. The measurement is
/// projected through the estimated attitude, so it carries `[v×]ε` besides `δv`.
pub fn velocity_jacobian(v_odo_l: &Vector3<f64>) -> SMatrix<f64, 3, 15> {
    let mut h = selector(VEL);
    h.fixed_view_mut::<3, 3>(0, ATT).copy_from(&v_odo_l.cross_matrix());
    h
}

/// Sequential block updates on the error state in Joseph form. `gate` is the squared
/// Mahalanobis threshold per block; rejected blocks leave the estimate untouched.
pub fn correct(s: &FusionState, z: &FusionMeasurement, gate: f64) -> Result<(Correction, Vec<UpdateEvent>), FusionError> {
    if z.pos_5g.is_none() && z.v_odo_l.is_none() {
        return Err(FusionError::EmptyMeasurement(z.t));
    }
    let mut blocks: Vec<(Block, Vector3<f64>, SMatrix<f64, 3, 15>, Matrix3<f64>)> = Vec::with_capacity(2);
    if let Some((p, r)) = &z.pos_5g {
        blocks.push((Block::Position, position_difference(&s.nav.pos, p), selector(POS), *r));
    }
    if let Some((v, r)) = &z.v_odo_l {
        let h = if z.odo_attitude_coupling { velocity_jacobian(v) } else { selector(VEL) };
        blocks.push((Block::Velocity, v - s.nav.v_l, h, *r));
    }
    let mut dx = Vec15::zeros();
    let mut p = s.cov;
    let mut events = Vec::with_capacity(blocks.len());
    for (block, y0, h, r) in blocks {
        super::check_psd3(&r, z.t)?;
        let y = y0 - h * dx;
        let pht = p * h.transpose();
        let sm = h * pht + r;
        let sinv = sm.try_inverse().ok_or(FusionError::NotPsd(z.t))?;
        let nis = (y.transpose() * sinv * y)[(0, 0)];
        let accepted = nis.is_finite() && nis <= gate;
        events.push(UpdateEvent { t: z.t, block, innovation: [y0.x, y0.y, y0.z], nis, accepted });
        if !accepted {
            continue;
        }
        let k = pht * sinv;
        dx += k * y;
        let ikh = Mat15::identity() - k * h;
        p = ikh * p * ikh.transpose() + k * r * k.transpose();
        p = 0.5 * (p + p.transpose());
    }
    super::check_psd(&p, z.t)?;
    Ok((Correction { dx, cov: p }, events))
}

/// Folds an error-state estimate into the nominal state and zeroes it.
pub fn feedback(s: &FusionState, c: &Correction) -> Result<FusionState, FusionError> {
    if c.dx.iter().all(|v| *v == 0.0) {
        return Ok(FusionState { cov: c.cov, ..*s });
    }
    let (nav, bias) = inject_error(&s.nav, &s.bias, &c.dx)?;
    Ok(FusionState { nav, bias, cov: c.cov, t: s.t })
}

/// Measurement update with closed-loop reset.
pub fn update(s: &FusionState, z: &FusionMeasurement, gate: f64) -> Result<(FusionState, Vec<UpdateEvent>), FusionError> {
    let (c, events) = correct(s, z, gate)?;
    Ok((feedback(s, &c)?, events))
}

/// Odometer speed and non-holonomic constraint standard deviations, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdoSigmas {
    pub speed_ms: f64,
    pub lateral_ms: f64,
    pub vertical_ms: f64,
}

impl Default for OdoSigmas {
    fn default() -> Self {
        Self { speed_ms: 0.032, lateral_ms: 0.1, vertical_ms: 0.2 }
    }
}

/// Body velocity (v_odo, 0, 0) rotated into the l-frame with its covariance.
pub fn project_odometer(odo: &OdoSample, wheel: &WheelConfig, q: &Quaternion, sig: &OdoSigmas) -> (Vector3<f64>, Matrix3<f64>) {
    let r = q.to_rotation_matrix();
    let v = r * Vector3::new(odo.speed(wheel), 0.0, 0.0);
    let d = Matrix3::from_diagonal(&Vector3::new(sig.speed_ms.powi(2), sig.lateral_ms.powi(2), sig.vertical_ms.powi(2)));
    let c = r * d * r.transpose();
    (v, 0.5 * (c + c.transpose()))
}
