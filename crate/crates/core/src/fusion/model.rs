//! Error-state definitions and the discrete transition of the 15-state model.

use super::{FusionError, FusionState, Mat15, Vec15, ATT, BA, BG, POS, VEL};
use crate::geo::consts::{EARTH_RATE, ECCENTRICITY_SQ, GRAVITY_EQUATOR, GRAVITY_HEIGHT_GRADIENT, SEMI_MAJOR_AXIS, SOMIGLIANA_K};
use crate::geo::{skew, EarthOptions, Quaternion};
use crate::ins::{displace, mechanize_step_with, position_difference, MechState};
use crate::sensors::{BiasState, GaussMarkovParams, ImuSample};
use nalgebra::{Matrix3, Vector3};

/// True state reached by applying the error vector `dx` to the nominal `nav`/`bias`.
///
/// Position error is metres (E, N, U) through the radii at the nominal point, attitude error
/// is the l-frame rotation vector ε with R_true = Exp(ε)·R̂, the rest are additive.
pub fn inject_error(nav: &MechState, bias: &BiasState, dx: &Vec15) -> Result<(MechState, BiasState), FusionError> {
    let pos = displace(&nav.pos, &dx.fixed_rows::<3>(POS).into())?;
    let v_l = nav.v_l + dx.fixed_rows::<3>(VEL);
    let eps: Vector3<f64> = dx.fixed_rows::<3>(ATT).into();
    let q = (Quaternion::from_rotation_vector(&eps) * nav.q).normalize();
    let b = BiasState { dw: bias.dw + dx.fixed_rows::<3>(BG), df: bias.df + dx.fixed_rows::<3>(BA) };
    Ok((MechState { pos, v_l, q, t: nav.t }, b))
}

/// Error vector of the estimate `est` with respect to the true state.
pub fn error_state(est: &FusionState, truth: &MechState, truth_bias: &BiasState) -> Vec15 {
    let mut dx = Vec15::zeros();
    dx.fixed_rows_mut::<3>(POS).copy_from(&position_difference(&est.nav.pos, &truth.pos));
    dx.fixed_rows_mut::<3>(VEL).copy_from(&(truth.v_l - est.nav.v_l));
    dx.fixed_rows_mut::<3>(ATT).copy_from(&(truth.q * est.nav.q.conjugate()).to_rotation_vector());
    dx.fixed_rows_mut::<3>(BG).copy_from(&(truth_bias.dw - est.bias.dw));
    dx.fixed_rows_mut::<3>(BA).copy_from(&(truth_bias.df - est.bias.df));
    dx
}

/// Zero-noise bias decay e^{−β dt} per axis, ordered gyro then accelerometer.
pub fn bias_decay(gm: &GaussMarkovParams, dt: f64) -> [f64; 6] {
    let mut d = [1.0; 6];
    for i in 0..3 {
        d[i] = (-gm.beta_w[i] * dt).exp();
        d[i + 3] = (-gm.beta_f[i] * dt).exp();
    }
    d
}

/// Exact discrete variance added to a first-order Gauss-Markov state over `dt`.
pub fn gm_process_variance(beta: f64, sigma: f64, dt: f64) -> f64 {
    if beta == 0.0 {
        sigma * sigma * dt
    } else {
        -sigma * sigma * (-2.0 * beta * dt).exp_m1()
    }
}

/// Left Jacobian of SO(3).
fn left_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    let t = theta.norm();
    let k = skew(theta);
    if t < 1e-6 {
        return Matrix3::identity() + 0.5 * k + k * k / 6.0;
    }
    Matrix3::identity() + (1.0 - t.cos()) / (t * t) * k + (t - t.sin()) / (t * t * t) * k * k
}

/// Derivative of the rotation vector of normalize(1, a) with respect to a.
fn half_angle_jacobian(a: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let s = a.norm();
    if s < 1e-9 {
        return (2.0 * a, 2.0 * Matrix3::identity());
    }
    let u = a / s;
    let g = 2.0 * s.atan();
    let dg = 2.0 / (1.0 + s * s);
    let uu = u * u.transpose();
    (g * u, g / s * (Matrix3::identity() - uu) + dg * uu)
}

fn radius_derivatives(lat: f64) -> (f64, f64) {
    let (s, c) = lat.sin_cos();
    let w2 = 1.0 - ECCENTRICITY_SQ * s * s;
    let w = w2.sqrt();
    let dn = SEMI_MAJOR_AXIS * ECCENTRICITY_SQ * s * c / (w2 * w);
    let dm = 3.0 * SEMI_MAJOR_AXIS * (1.0 - ECCENTRICITY_SQ) * ECCENTRICITY_SQ * s * c / (w2 * w2 * w);
    (dm, dn)
}

fn gravity_lat_derivative(lat: f64) -> f64 {
    let s2 = lat.sin().powi(2);
    let w2 = 1.0 - ECCENTRICITY_SQ * s2;
    let d_ds2 = GRAVITY_EQUATOR * (SOMIGLIANA_K / w2.sqrt() + (1.0 + SOMIGLIANA_K * s2) * 0.5 * ECCENTRICITY_SQ / (w2 * w2.sqrt()));
    d_ds2 * (2.0 * lat).sin()
}

/// Output of one discrete propagation.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub nav: MechState,
    pub bias: BiasState,
    pub phi: Mat15,
    pub q: Mat15,
}

/// Mechanizes one step and returns the Jacobian of the discrete step with respect to the
/// error state, together with the discrete process noise.
pub fn transition(
    s: &FusionState,
    imu: &ImuSample,
    gm: &GaussMarkovParams,
    dt: f64,
    opts: EarthOptions,
) -> Result<Transition, FusionError> {
    if !(dt > 0.0) {
        return Err(FusionError::InvalidStep(dt));
    }
    let (next, tr) = mechanize_step_with(&s.nav, imu, &s.bias, dt, opts)?;
    let p = &s.nav.pos;
    let v = s.nav.v_l;
    let terms = &tr.terms;
    let r = terms.r_b_l;
    let mh = terms.meridian_radius + p.h;
    let nh = terms.normal_radius + p.h;
    let (sl, cl) = p.lat.sin_cos();
    let tl = sl / cl;
    let (dm, dn) = radius_derivatives(p.lat);

    // Partials of ω_ie and ω_el with respect to δp (metres) and v.
    let mut wie_p = Matrix3::zeros();
    if opts.earth_rate {
        wie_p.set_column(1, &(Vector3::new(0.0, -EARTH_RATE * sl, EARTH_RATE * cl) / mh));
    }
    let mut wel_p = Matrix3::zeros();
    let mut wel_v = Matrix3::zeros();
    if opts.transport_rate {
        let dlat = Vector3::new(v.y * dm / (mh * mh), -v.x * dn / (nh * nh), v.x * (1.0 / (cl * cl * nh) - tl * dn / (nh * nh)));
        wel_p.set_column(1, &(dlat / mh));
        wel_p.set_column(2, &Vector3::new(v.y / (mh * mh), -v.x / (nh * nh), -v.x * tl / (nh * nh)));
        wel_v = Matrix3::new(0.0, -1.0 / mh, 0.0, 1.0 / nh, 0.0, 0.0, tl / nh, 0.0, 0.0);
    }
    let wil = terms.omega_il_l();
    let wil_p = wie_p + wel_p;
    let c = 2.0 * terms.omega_ie_l + terms.omega_el_l;
    let c_p = 2.0 * wie_p + wel_p;
    let mut g_p = Matrix3::zeros();
    g_p[(2, 1)] = -gravity_lat_derivative(p.lat) / mh;
    g_p[(2, 2)] = GRAVITY_HEIGHT_GRADIENT;

    // Attitude: ε' = ε + G·δω_lb with G the exact sensitivity of the quaternion update.
    let a = 0.5 * dt * tr.w_lb;
    let (theta, dtheta) = half_angle_jacobian(&a);
    let gmat = r * left_jacobian(&theta) * dtheta * (0.5 * dt);
    let rt = r.transpose();

    let mut phi = Mat15::identity();
    let set = |m: &mut Mat15, i: usize, j: usize, b: &Matrix3<f64>| m.fixed_view_mut::<3, 3>(i, j).copy_from(b);

    let f_l = r * tr.f_b;
    let vx = skew(&v);
    let phi_vp = dt * (vx * c_p + g_p);
    let phi_vv = Matrix3::identity() + dt * (vx * wel_v - skew(&c));
    let phi_va = -dt * skew(&f_l);
    let phi_vf = -dt * r;
    set(&mut phi, VEL, POS, &phi_vp);
    set(&mut phi, VEL, VEL, &phi_vv);
    set(&mut phi, VEL, ATT, &phi_va);
    set(&mut phi, VEL, BA, &phi_vf);

    set(&mut phi, ATT, POS, &(-gmat * rt * wil_p));
    set(&mut phi, ATT, VEL, &(-gmat * rt * wel_v));
    set(&mut phi, ATT, ATT, &(Matrix3::identity() - gmat * rt * skew(&wil)));
    set(&mut phi, ATT, BG, &(-gmat));

    // Position: trapezoid in geodetic increments, re-expressed in metres at the new point.
    let p1 = &next.pos;
    let r1 = crate::geo::radii(p1.lat);
    let de1 = (r1.normal + p1.h) * p1.lat.cos();
    let dn1 = r1.meridian + p1.h;
    let ce = 1.0 / (nh * cl);
    let cn = 1.0 / mh;
    let amat = Matrix3::from_diagonal(&Vector3::new(de1 * ce, dn1 * cn, 1.0));
    let w = 0.5 * dt * (v + next.v_l);
    let dce_dlat = -(dn * cl - nh * sl) * ce * ce;
    let dce_dh = -1.0 / (nh * nh * cl);
    let dcn_dlat = -dm / (mh * mh);
    let dcn_dh = -1.0 / (mh * mh);
    let mut curv = Matrix3::zeros();
    curv[(0, 1)] = de1 * w.x * dce_dlat / mh;
    curv[(0, 2)] = de1 * w.x * dce_dh;
    curv[(1, 1)] = dn1 * w.y * dcn_dlat / mh;
    curv[(1, 2)] = dn1 * w.y * dcn_dh;
    let half = 0.5 * dt * amat;
    set(&mut phi, POS, POS, &(amat + curv + half * phi_vp));
    set(&mut phi, POS, VEL, &(half * (Matrix3::identity() + phi_vv)));
    set(&mut phi, POS, ATT, &(half * phi_va));
    set(&mut phi, POS, BA, &(half * phi_vf));

    let decay = bias_decay(gm, dt);
    for i in 0..3 {
        phi[(BG + i, BG + i)] = decay[i];
        phi[(BA + i, BA + i)] = decay[i + 3];
    }

    // Process noise: white sensor noise through the step sensitivities, exact GM driving terms.
    let mut q = Mat15::zeros();
    let ng2 = gm.gyro_noise_density.powi(2) / dt;
    let na2 = gm.accel_noise_density.powi(2) / dt;
    let gv = phi_vf;
    let gp = half * phi_vf;
    set(&mut q, ATT, ATT, &(ng2 * gmat * gmat.transpose()));
    set(&mut q, VEL, VEL, &(na2 * gv * gv.transpose()));
    set(&mut q, POS, POS, &(na2 * gp * gp.transpose()));
    set(&mut q, POS, VEL, &(na2 * gp * gv.transpose()));
    set(&mut q, VEL, POS, &(na2 * gv * gp.transpose()));
    for i in 0..3 {
        q[(BG + i, BG + i)] = gm_process_variance(gm.beta_w[i], gm.sigma_w[i], dt);
        q[(BA + i, BA + i)] = gm_process_variance(gm.beta_f[i], gm.sigma_f[i], dt);
    }

    let mut bias = s.bias;
    for i in 0..3 {
        bias.dw[i] *= decay[i];
        bias.df[i] *= decay[i + 3];
    }
    Ok(Transition { nav: next, bias, phi, q })
}

/// Propagates the nominal state and its own true counterpart, for finite-difference checks.
pub fn propagate_truth(
    nav: &MechState,
    bias: &BiasState,
    imu: &ImuSample,
    gm: &GaussMarkovParams,
    dt: f64,
    opts: EarthOptions,
) -> Result<(MechState, BiasState), FusionError> {
    let (next, _) = mechanize_step_with(nav, imu, bias, dt, opts)?;
    let decay = bias_decay(gm, dt);
    let mut b = *bias;
    for i in 0..3 {
        b.dw[i] *= decay[i];
        b.df[i] *= decay[i + 3];
    }
    Ok((next, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{attitude_to_quaternion, Attitude, GeodeticPosition};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(rng: &mut ChaCha8Rng) -> (FusionState, ImuSample, GaussMarkovParams, f64) {
        let pos = GeodeticPosition::from_degrees(
            rng.random_range(-60.0..60.0),
            rng.random_range(-180.0..180.0),
            rng.random_range(-100.0..1000.0),
        )
        .unwrap();
        let att = Attitude::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.0..std::f64::consts::TAU));
        let v = Vector3::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(-3.0..3.0));
        let nav = MechState { pos, v_l: v, q: attitude_to_quaternion(&att), t: 0.0 };
        let bias = BiasState {
            dw: Vector3::from_fn(|_, _| rng.random_range(-1e-3..1e-3)),
            df: Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05)),
        };
        let imu = ImuSample {
            t: 0.0,
            f_b: Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(5.0..15.0)),
            w_b: Vector3::from_fn(|_, _| rng.random_range(-0.6..0.6)),
        };
        let mut gm = GaussMarkovParams::default();
        gm.beta_w = [rng.random_range(0.0..0.05); 3];
        gm.beta_f[1] = 0.0;
        let dt = [0.005, 0.01, 0.02, 0.05][rng.random_range(0..4)];
        (FusionState { nav, bias, cov: Mat15::identity(), t: 0.0 }, imu, gm, dt)
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let steps = [0.1, 0.1, 0.1, 0.01, 0.01, 0.01, 1e-3, 1e-3, 1e-3, 1e-5, 1e-5, 1e-5, 1e-2, 1e-2, 1e-2];
        for case in 0..20 {
            let (s, imu, gm, dt) = random_case(&mut rng);
            let opts = EarthOptions::default();
            let tr = transition(&s, &imu, &gm, dt, opts).unwrap();
            let nominal = FusionState { nav: tr.nav, bias: tr.bias, cov: s.cov, t: tr.nav.t };
            let mut fd = Mat15::zeros();
            for j in 0..15 {
                let mut cols = [Vec15::zeros(); 2];
                for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
                    let mut dx = Vec15::zeros();
                    dx[j] = sign * steps[j];
                    let (nav, b) = inject_error(&s.nav, &s.bias, &dx).unwrap();
                    let (n1, b1) = propagate_truth(&nav, &b, &imu, &gm, dt, opts).unwrap();
                    cols[k] = error_state(&nominal, &n1, &b1);
                }
                fd.set_column(j, &((cols[0] - cols[1]) / (2.0 * steps[j])));
            }
            for j in 0..15 {
                let scale = fd.column(j).amax();
                let err = (tr.phi.column(j) - fd.column(j)).amax();
                assert!(err <= 1e-4 * scale, "case {case} column {j}: {err:e} vs {scale:e}");
            }
        }
    }

    #[test]
    fn bias_block_follows_exact_decay() {
        let mut gm = GaussMarkovParams::default();
        gm.beta_f = [0.01; 3];
        gm.sigma_f = [0.3; 3];
        let d = bias_decay(&gm, 1.0);
        assert_eq!(d[3], (-0.01f64).exp());
        let var = gm_process_variance(0.01, 0.3, 1.0);
        assert!((var - 0.09 * (1.0 - (-0.02f64).exp())).abs() < 1e-15);
        assert!((var - 0.001_782_119_402_392_023).abs() < 1e-15);
    }

    #[test]
    fn noise_free_model_adds_no_process_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (s, imu, _, dt) = random_case(&mut rng);
        let tr = transition(&s, &imu, &GaussMarkovParams::ideal(), dt, EarthOptions::default()).unwrap();
        assert_eq!(tr.q, Mat15::zeros());
        for i in BG..15 {
            assert_eq!(tr.phi[(i, i)], 1.0);
        }
    }
}
