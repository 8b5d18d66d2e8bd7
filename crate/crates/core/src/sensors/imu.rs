use super::{epoch_grid, BiasState, GaussMarkovParams, ImuSample, SensorError};
use crate::geo::{attitude_to_quaternion, compute_earth_terms_with, EarthOptions};
use crate::scenario::{Trajectory, TrajectoryEpoch};
use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

const MAX_ATTITUDE_STEP_DEG: f64 = 10.0;

/// IMU samples together with the bias realization that corrupted each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuStream {
    pub samples: Vec<ImuSample>,
    pub bias: Vec<BiasState>,
}

/// Exact discretization of a first-order Gauss-Markov process:
/// b_k = e^{−β·dt}·b_{k−1} + σ·√(1 − e^{−2β·dt})·n. With β = 0 it is the random walk
/// b_k = b_{k−1} + σ·√dt·n.
pub fn gm_discrete_step(bias: f64, beta: f64, sigma: f64, dt: f64, noise_draw: f64) -> Result<f64, SensorError> {
    if beta < 0.0 || !beta.is_finite() {
        return Err(SensorError::NegativeBeta(beta));
    }
    if beta == 0.0 {
        return Ok(bias + sigma * dt.sqrt() * noise_draw);
    }
    let decay = (-beta * dt).exp();
    let spread = (-(-2.0 * beta * dt).exp_m1()).sqrt();
    Ok(decay * bias + sigma * spread * noise_draw)
}

/// Error-free specific force and angular rate that carry the mechanization from `prev` to
/// `cur` exactly: the discrete inverse of the forward attitude and velocity updates.
pub fn ideal_imu(prev: &TrajectoryEpoch, cur: &TrajectoryEpoch, opts: EarthOptions) -> Result<(Vector3<f64>, Vector3<f64>), SensorError> {
    let dt = cur.t - prev.t;
    let q0 = attitude_to_quaternion(&prev.att);
    let q1 = attitude_to_quaternion(&cur.att);
    let mut dq = q0.conjugate() * q1;
    if dq.w < 0.0 {
        dq = crate::geo::Quaternion::new(-dq.w, -dq.x, -dq.y, -dq.z);
    }
    let angle = 2.0 * Vector3::new(dq.x, dq.y, dq.z).norm().atan2(dq.w);
    if angle.to_degrees() > MAX_ATTITUDE_STEP_DEG {
        return Err(SensorError::AttitudeDiscontinuity { t: cur.t, deg: angle.to_degrees() });
    }
    let terms = compute_earth_terms_with(&prev.pos, &prev.v_l, &q0, opts)?;
    let rt = terms.r_b_l.transpose();
    let w_lb = Vector3::new(dq.x, dq.y, dq.z) * (2.0 / (dt * dq.w));
    let w_b = w_lb + rt * terms.omega_il_l();
    let coriolis = (2.0 * terms.omega_ie_l + terms.omega_el_l).cross(&prev.v_l);
    let f_l = (cur.v_l - prev.v_l) / dt + coriolis - terms.g_l;
    Ok((rt * f_l, w_b))
}

fn truth_on_grid(traj: &Trajectory, rate_hz: f64) -> Result<Vec<TrajectoryEpoch>, SensorError> {
    let dt = 1.0 / rate_hz;
    let native = traj.epochs().windows(2).all(|w| ((w[1].t - w[0].t) - dt).abs() < 1e-9);
    if native {
        return Ok(traj.epochs().to_vec());
    }
    epoch_grid(traj.start_time(), traj.end_time(), rate_hz).into_iter().map(|t| traj.interpolate(t).map_err(SensorError::from)).collect()
}

/// Synthesizes an IMU stream by inverse mechanization of the truth, then corrupts it with
/// Gauss-Markov biases and white noise. `initial_bias` overrides the stationary draw.
///
/// Per sample the draws are: gyro GM driving (x, y, z), accel GM driving (x, y, z), gyro
/// white noise (x, y, z), accel white noise (x, y, z).
pub fn gen_imu<R: Rng>(
    traj: &Trajectory,
    gm: &GaussMarkovParams,
    rate_hz: f64,
    initial_bias: Option<BiasState>,
    opts: EarthOptions,
    rng: &mut R,
) -> Result<ImuStream, SensorError> {
    if !(rate_hz >= 50.0) {
        return Err(SensorError::ImuRateTooLow(rate_hz));
    }
    gm.validate()?;
    let truth = truth_on_grid(traj, rate_hz)?;
    let mut draw = || -> f64 { rng.sample(StandardNormal) };
    let mut bias = match initial_bias {
        Some(b) => b,
        None => {
            let mut b = BiasState::zero();
            for i in 0..3 {
                let n = draw();
                b.dw[i] = if gm.beta_w[i] > 0.0 { gm.sigma_w[i] * n } else { 0.0 };
            }
            for i in 0..3 {
                let n = draw();
                b.df[i] = if gm.beta_f[i] > 0.0 { gm.sigma_f[i] * n } else { 0.0 };
            }
            b
        }
    };
    let sw = gm.gyro_noise_density * rate_hz.sqrt();
    let sf = gm.accel_noise_density * rate_hz.sqrt();
    let mut samples = Vec::with_capacity(truth.len());
    let mut biases = Vec::with_capacity(truth.len());
    for pair in truth.windows(2) {
        let dt = pair[1].t - pair[0].t;
        let (f, w) = ideal_imu(&pair[0], &pair[1], opts)?;
        for i in 0..3 {
            bias.dw[i] = gm_discrete_step(bias.dw[i], gm.beta_w[i], gm.sigma_w[i], dt, draw())?;
        }
        for i in 0..3 {
            bias.df[i] = gm_discrete_step(bias.df[i], gm.beta_f[i], gm.sigma_f[i], dt, draw())?;
        }
        let nw = Vector3::new(draw(), draw(), draw()) * sw;
        let nf = Vector3::new(draw(), draw(), draw()) * sf;
        samples.push(ImuSample { t: pair[1].t, f_b: f + bias.df + nf, w_b: w + bias.dw + nw });
        biases.push(bias);
    }
    Ok(ImuStream { samples, bias: biases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{normal_gravity, Attitude, GeodeticPosition};
    use crate::sensors::{stream_rng, streams};

    #[test]
    fn gm_zero_noise_decay() {
        let mut b = 0.01;
        for _ in 0..100 {
            b = gm_discrete_step(b, 0.01, 0.5, 1.0, 0.0).unwrap();
        }
        assert!((b - 0.01 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((b - 0.003_678_794_411_714_423).abs() < 1e-15);
    }

    #[test]
    fn gm_random_walk_degenerates_to_constant() {
        assert_eq!(gm_discrete_step(0.3, 0.0, 0.0, 0.01, 1.7).unwrap(), 0.3);
        assert!(matches!(gm_discrete_step(0.3, -1.0, 0.0, 0.01, 0.0), Err(SensorError::NegativeBeta(_))));
    }

    fn stationary(seconds: f64) -> Trajectory {
        let pos = GeodeticPosition::from_degrees(43.6452, -79.3806, 1.5).unwrap();
        let epochs = (0..=(seconds * 100.0) as usize)
            .map(|k| TrajectoryEpoch { t: k as f64 / 100.0, pos, v_l: Vector3::zeros(), att: Attitude::level(0.7) })
            .collect();
        Trajectory::new(epochs).unwrap()
    }

    #[test]
    fn stationary_level_reads_gravity_and_earth_rate() {
        let traj = stationary(1.0);
        let s =
            gen_imu(&traj, &GaussMarkovParams::ideal(), 100.0, None, EarthOptions::default(), &mut stream_rng(1, streams::IMU)).unwrap();
        let g = normal_gravity(traj.epochs()[0].pos.lat, 1.5);
        for m in &s.samples {
            assert!((m.f_b - Vector3::new(0.0, 0.0, g)).norm() < 1e-9);
            let earth = crate::geo::consts::EARTH_RATE;
            assert!((m.w_b.norm() - earth).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_low_rate_and_jumps() {
        let traj = stationary(1.0);
        let mut rng = stream_rng(1, streams::IMU);
        assert!(matches!(
            gen_imu(&traj, &GaussMarkovParams::ideal(), 20.0, None, EarthOptions::default(), &mut rng),
            Err(SensorError::ImuRateTooLow(_))
        ));
        let mut e = traj.epochs().to_vec();
        e[50].att = Attitude::level(1.2);
        let bad = Trajectory::new(e).unwrap();
        assert!(matches!(
            gen_imu(&bad, &GaussMarkovParams::ideal(), 100.0, None, EarthOptions::default(), &mut rng),
            Err(SensorError::AttitudeDiscontinuity { .. })
        ));
    }

    #[test]
    fn same_seed_same_stream() {
        let traj = stationary(2.0);
        let gm = GaussMarkovParams::default();
        let a = gen_imu(&traj, &gm, 100.0, None, EarthOptions::default(), &mut stream_rng(9, streams::IMU)).unwrap();
        let b = gen_imu(&traj, &gm, 100.0, None, EarthOptions::default(), &mut stream_rng(9, streams::IMU)).unwrap();
        assert_eq!(a, b);
        let c = gen_imu(&traj, &gm, 100.0, None, EarthOptions::default(), &mut stream_rng(10, streams::IMU)).unwrap();
        assert_ne!(a, c);
    }
}
