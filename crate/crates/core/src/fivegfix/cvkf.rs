use super::{FixError, SingleBsFix};
use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

const SYM_TOL: f64 = 1e-9;
const EIG_FLOOR: f64 = -1e-12;

/// Constant-velocity filter state: grid position (E, N, U) and velocity, with covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvKfState {
    pub x: Vector6<f64>,
    pub p: Matrix6<f64>,
    pub t: f64,
}

pub(crate) fn check_psd(p: &Matrix6<f64>) -> Result<(), FixError> {
    let scale = p.amax().max(1e-300);
    if (p - p.transpose()).amax() > SYM_TOL * scale || !p.iter().all(|v| v.is_finite()) {
        return Err(FixError::NotPsd);
    }
    let sym = 0.5 * (p + p.transpose());
    if sym.symmetric_eigenvalues().min() < EIG_FLOOR * scale.max(1.0) {
        return Err(FixError::NotPsd);
    }
    Ok(())
}

/// Transition and white-acceleration process noise over `dt`.
pub fn cv_model(dt: f64, q_accel: f64) -> (Matrix6<f64>, Matrix6<f64>) {
    let mut f = Matrix6::identity();
    let mut q = Matrix6::zeros();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
        q[(i, i)] = q_accel * dt.powi(3) / 3.0;
        q[(i, i + 3)] = q_accel * dt * dt / 2.0;
        q[(i + 3, i)] = q_accel * dt * dt / 2.0;
        q[(i + 3, i + 3)] = q_accel * dt;
    }
    (f, q)
}

fn update_one(s: &CvKfState, fix: &SingleBsFix) -> CvKfState {
    let mut h = Matrix3x6::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    let z = Vector3::new(fix.pos.easting, fix.pos.northing, fix.pos.height);
    let innov = z - h * s.x;
    let cov = h * s.p * h.transpose() + fix.est_cov;
    let Some(inv) = cov.try_inverse() else {
        return *s;
    };
    let k = s.p * h.transpose() * inv;
    let x = s.x + k * innov;
    let ikh = Matrix6::identity() - k * h;
    let p = ikh * s.p * ikh.transpose() + k * fix.est_cov * k.transpose();
    CvKfState { x, p: 0.5 * (p + p.transpose()), t: s.t }
}

pub(crate) fn update_all(s: &CvKfState, fixes: &[SingleBsFix]) -> Result<CvKfState, FixError> {
    let mut out = *s;
    for f in fixes {
        out = update_one(&out, f);
    }
    check_psd(&out.p)?;
    Ok(out)
}

/// Predicts over `dt` with the constant-velocity model, then applies each fix as a direct
/// position observation (Joseph form). An empty fix list coasts.
pub fn cv_kf_step(state: &CvKfState, fixes: &[SingleBsFix], dt: f64, q_accel: f64) -> Result<CvKfState, FixError> {
    if !(dt > 0.0) {
        return Err(FixError::InvalidStep(dt));
    }
    check_psd(&state.p)?;
    let (f, q) = cv_model(dt, q_accel);
    let p = f * state.p * f.transpose() + q;
    let pred = CvKfState { x: f * state.x, p: 0.5 * (p + p.transpose()), t: state.t + dt };
    update_all(&pred, fixes)
}
