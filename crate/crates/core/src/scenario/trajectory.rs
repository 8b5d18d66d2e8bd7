use crate::geo::{
    attitude_to_quaternion, geodetic_to_utm_in_zone, quaternion_to_attitude, radii, snap_radians, wrap_two_pi, Attitude, GeoError,
    GeodeticPosition, Quaternion, UtmPosition, UtmZone,
};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("at least two epochs required, got {0}")]
    TooShort(usize),
    #[error("epoch {index}: time {t} does not increase")]
    NonMonotonic { index: usize, t: f64 },
    #[error("epoch {0}: non-finite field")]
    NonFinite(usize),
    #[error("time {0} s outside trajectory span")]
    OutOfSpan(f64),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// One ground-truth epoch: position, l-frame velocity (E, N, U) and attitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEpoch {
    pub t: f64,
    pub pos: GeodeticPosition,
    pub v_l: Vector3<f64>,
    pub att: Attitude,
}

/// Validated, time-sorted ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    epochs: Vec<TrajectoryEpoch>,
}

impl Trajectory {
    pub fn new(epochs: Vec<TrajectoryEpoch>) -> Result<Self, TrajectoryError> {
        if epochs.len() < 2 {
            return Err(TrajectoryError::TooShort(epochs.len()));
        }
        for (i, e) in epochs.iter().enumerate() {
            let finite = [e.t, e.pos.lat, e.pos.lon, e.pos.h, e.att.pitch, e.att.roll, e.att.azimuth].iter().all(|x| x.is_finite())
                && e.v_l.iter().all(|x| x.is_finite());
            if !finite {
                return Err(TrajectoryError::NonFinite(i));
            }
            if i > 0 && e.t <= epochs[i - 1].t {
                return Err(TrajectoryError::NonMonotonic { index: i, t: e.t });
            }
        }
        Ok(Self { epochs })
    }

    pub fn epochs(&self) -> &[TrajectoryEpoch] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.epochs[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.epochs[self.epochs.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// 3D path length from local-level increments, metres.
    pub fn path_length(&self) -> f64 {
        self.epochs.windows(2).map(|w| local_delta(&w[0].pos, &w[1].pos).norm()).sum()
    }

    /// Sub-trajectory with t in [t0, t1].
    pub fn slice(&self, t0: f64, t1: f64) -> Result<Self, TrajectoryError> {
        Self::new(self.epochs.iter().copied().filter(|e| e.t >= t0 && e.t <= t1).collect())
    }

    /// Linear interpolation of position/velocity and shortest-arc interpolation of attitude.
    pub fn interpolate(&self, t: f64) -> Result<TrajectoryEpoch, TrajectoryError> {
        let tol = 1e-9;
        if t < self.start_time() - tol || t > self.end_time() + tol {
            return Err(TrajectoryError::OutOfSpan(t));
        }
        let idx = self.epochs.partition_point(|e| e.t < t);
        if idx < self.epochs.len() && (self.epochs[idx].t - t).abs() <= tol {
            return Ok(self.epochs[idx]);
        }
        if idx == 0 {
            return Ok(self.epochs[0]);
        }
        if idx >= self.epochs.len() {
            return Ok(self.epochs[self.epochs.len() - 1]);
        }
        let (a, b) = (&self.epochs[idx - 1], &self.epochs[idx]);
        if (t - a.t).abs() <= tol {
            return Ok(*a);
        }
        let u = (t - a.t) / (b.t - a.t);
        let lerp = |x: f64, y: f64| x + u * (y - x);
        let dlon = crate::geo::wrap_pi(b.pos.lon - a.pos.lon);
        let pos = GeodeticPosition::new(lerp(a.pos.lat, b.pos.lat), a.pos.lon + u * dlon, lerp(a.pos.h, b.pos.h))?;
        let qa = attitude_to_quaternion(&a.att);
        let qb = attitude_to_quaternion(&b.att);
        let rel = (qa.conjugate() * qb).to_rotation_vector();
        let q = qa * Quaternion::from_rotation_vector(&(rel * u));
        let (att, _) = quaternion_to_attitude(&q);
        Ok(TrajectoryEpoch { t, pos, v_l: a.v_l + (b.v_l - a.v_l) * u, att })
    }

    /// Positions in a fixed UTM zone.
    pub fn to_utm(&self, zone: UtmZone) -> Result<Vec<UtmPosition>, GeoError> {
        self.epochs.iter().map(|e| geodetic_to_utm_in_zone(&e.pos, zone)).collect()
    }
}

/// Local-level displacement (E, N, U) from `a` to `b` using the curvature radii at `a`.
pub fn local_delta(a: &GeodeticPosition, b: &GeodeticPosition) -> Vector3<f64> {
    let r = radii(a.lat);
    Vector3::new(crate::geo::wrap_pi(b.lon - a.lon) * (r.normal + a.h) * a.lat.cos(), (b.lat - a.lat) * (r.meridian + a.h), b.h - a.h)
}

/// One piece of the synthetic drive profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Maneuver {
    /// Hold still for `duration_s`.
    Hold { duration_s: f64 },
    /// Change speed to `speed_ms` at constant `accel_ms2` (magnitude).
    Speed { speed_ms: f64, accel_ms2: f64 },
    /// Drive straight at constant speed.
    Cruise { distance_m: f64 },
    /// Constant-rate heading change at constant speed; positive angles turn right.
    Turn { angle_deg: f64, rate_deg_s: f64 },
}

/// Parameters of the built-in track generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    pub height_m: f64,
    pub initial_azimuth_deg: f64,
    pub rate_hz: f64,
    pub maneuvers: Vec<Maneuver>,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    t0: f64,
    duration: f64,
    speed0: f64,
    accel: f64,
    azimuth0: f64,
    yaw_rate: f64,
}

impl Segment {
    fn speed(&self, tau: f64) -> f64 {
        (self.speed0 + self.accel * tau).max(0.0)
    }

    fn azimuth(&self, tau: f64) -> f64 {
        self.azimuth0 + self.yaw_rate * tau
    }
}

/// Segment timeline produced by the generator, useful for placing scripted events.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverWindow {
    pub maneuver: Maneuver,
    pub t_start: f64,
    pub t_end: f64,
}

impl TrackSpec {
    fn segments(&self) -> (Vec<Segment>, Vec<ManeuverWindow>) {
        let mut segs = Vec::new();
        let mut windows = Vec::new();
        let mut t = 0.0;
        let mut speed = 0.0f64;
        let mut az = self.initial_azimuth_deg.to_radians();
        for m in &self.maneuvers {
            let seg = match *m {
                Maneuver::Hold { duration_s } => {
                    speed = 0.0;
                    Segment { t0: t, duration: duration_s, speed0: 0.0, accel: 0.0, azimuth0: az, yaw_rate: 0.0 }
                }
                Maneuver::Speed { speed_ms, accel_ms2 } => {
                    let dv = speed_ms - speed;
                    let a = accel_ms2.abs().max(1e-6) * dv.signum();
                    let s = Segment { t0: t, duration: dv.abs() / a.abs(), speed0: speed, accel: a, azimuth0: az, yaw_rate: 0.0 };
                    speed = speed_ms;
                    s
                }
                Maneuver::Cruise { distance_m } => Segment {
                    t0: t,
                    duration: if speed > 0.0 { distance_m / speed } else { 0.0 },
                    speed0: speed,
                    accel: 0.0,
                    azimuth0: az,
                    yaw_rate: 0.0,
                },
                Maneuver::Turn { angle_deg, rate_deg_s } => {
                    let rate = rate_deg_s.abs().to_radians() * angle_deg.signum();
                    let s = Segment {
                        t0: t,
                        duration: angle_deg.to_radians().abs() / rate.abs().max(1e-9),
                        speed0: speed,
                        accel: 0.0,
                        azimuth0: az,
                        yaw_rate: rate,
                    };
                    az += angle_deg.to_radians();
                    s
                }
            };
            windows.push(ManeuverWindow { maneuver: *m, t_start: t, t_end: t + seg.duration });
            t += seg.duration;
            segs.push(seg);
        }
        (segs, windows)
    }

    pub fn timeline(&self) -> Vec<ManeuverWindow> {
        self.segments().1
    }

    /// Samples the profile at `rate_hz`, integrating the geodetic position equations with
    /// RK4 substeps so that truth is free of the mechanization's own discretization.
    pub fn generate(&self) -> Result<Trajectory, TrajectoryError> {
        let (segs, _) = self.segments();
        let total: f64 = segs.iter().map(|s| s.duration).sum();
        let dt = 1.0 / self.rate_hz;
        let n = (total / dt).floor() as usize;
        let state_at = |t: f64| -> (f64, f64) {
            let i = segs.iter().position(|s| t < s.t0 + s.duration).unwrap_or(segs.len().saturating_sub(1));
            let s = &segs[i];
            let tau = (t - s.t0).clamp(0.0, s.duration);
            (s.speed(tau), s.azimuth(tau))
        };
        let h = self.height_m;
        let rate = |lat: f64, t: f64| -> (f64, f64) {
            let (v, a) = state_at(t);
            let r = radii(lat);
            (v * a.cos() / (r.meridian + h), v * a.sin() / ((r.normal + h) * lat.cos()))
        };
        let mut lat = self.origin_lat_deg.to_radians();
        let mut lon = self.origin_lon_deg.to_radians();
        let substeps = 4;
        let hstep = dt / substeps as f64;
        let mut epochs = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = k as f64 * dt;
            if k > 0 {
                let mut ts = (k - 1) as f64 * dt;
                for _ in 0..substeps {
                    let k1 = rate(lat, ts);
                    let k2 = rate(lat + 0.5 * hstep * k1.0, ts + 0.5 * hstep);
                    let k3 = rate(lat + 0.5 * hstep * k2.0, ts + 0.5 * hstep);
                    let k4 = rate(lat + hstep * k3.0, ts + hstep);
                    lat += hstep / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                    lon += hstep / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
                    ts += hstep;
                }
            }
            let (v, a) = state_at(t);
            let pos = GeodeticPosition::new(snap_radians(lat), snap_radians(lon), h)?;
            epochs.push(TrajectoryEpoch {
                t,
                pos,
                v_l: Vector3::new(v * a.sin(), v * a.cos(), 0.0),
                att: Attitude::new(0.0, 0.0, snap_radians(wrap_two_pi(a))),
            });
        }
        Trajectory::new(epochs)
    }
}

const TOUR_DURATION_S: f64 = 1200.0;

/// Drive profile used by the bundled default scenario: a 20-minute downtown tour of about
/// 9.1 km with right-angle turns, two traffic stops and a short parking pause.
pub fn downtown_tour(origin_lat_deg: f64, origin_lon_deg: f64, height_m: f64, rate_hz: f64) -> TrackSpec {
    use Maneuver::*;
    let cruise = 10.0;
    let turn_speed = 6.0;
    let mut m = vec![Hold { duration_s: 20.0 }, Speed { speed_ms: cruise, accel_ms2: 1.2 }];
    // (straight distance before the turn, turn angle, stop before turning)
    let legs: [(f64, f64, bool); 14] = [
        (520.0, 90.0, false),
        (480.0, 90.0, false),
        (600.0, -90.0, true),
        (450.0, -90.0, false),
        (700.0, 90.0, false),
        (380.0, 45.0, false),
        (500.0, 45.0, false),
        (620.0, -90.0, true),
        (560.0, 90.0, false),
        (440.0, 90.0, false),
        (690.0, -90.0, false),
        (520.0, -45.0, true),
        (600.0, 135.0, false),
        (480.0, 90.0, false),
    ];
    for (dist, angle, stop) in legs {
        m.push(Cruise { distance_m: dist });
        if stop {
            m.push(Speed { speed_ms: 0.0, accel_ms2: 1.5 });
            m.push(Hold { duration_s: 35.0 });
            m.push(Speed { speed_ms: turn_speed, accel_ms2: 1.2 });
        } else {
            m.push(Speed { speed_ms: turn_speed, accel_ms2: 1.5 });
        }
        m.push(Turn { angle_deg: angle, rate_deg_s: 15.0 });
        m.push(Speed { speed_ms: cruise, accel_ms2: 1.2 });
    }
    m.push(Cruise { distance_m: 300.0 });
    m.push(Speed { speed_ms: 0.0, accel_ms2: 1.5 });
    let mut spec = TrackSpec { origin_lat_deg, origin_lon_deg, height_m, initial_azimuth_deg: 0.0, rate_hz, maneuvers: m };
    let driven = spec.timeline().last().map_or(0.0, |w| w.t_end);
    spec.maneuvers.push(Hold { duration_s: (TOUR_DURATION_S - driven).max(10.0) });
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(distance: f64) -> TrackSpec {
        TrackSpec {
            origin_lat_deg: 43.65,
            origin_lon_deg: -79.38,
            height_m: 1.5,
            initial_azimuth_deg: 90.0,
            rate_hz: 10.0,
            maneuvers: vec![Maneuver::Speed { speed_ms: 10.0, accel_ms2: 10.0 }, Maneuver::Cruise { distance_m: distance }],
        }
    }

    #[test]
    fn single_epoch_is_rejected() {
        let e = TrajectoryEpoch {
            t: 0.0,
            pos: GeodeticPosition::new(0.7, -1.3, 0.0).unwrap(),
            v_l: Vector3::zeros(),
            att: Attitude::level(0.0),
        };
        assert_eq!(Trajectory::new(vec![e]), Err(TrajectoryError::TooShort(1)));
    }

    #[test]
    fn rejects_repeated_time() {
        let e = TrajectoryEpoch {
            t: 0.0,
            pos: GeodeticPosition::new(0.7, -1.3, 0.0).unwrap(),
            v_l: Vector3::zeros(),
            att: Attitude::level(0.0),
        };
        let err = Trajectory::new(vec![e, e]).unwrap_err();
        assert_eq!(err, TrajectoryError::NonMonotonic { index: 1, t: 0.0 });
    }

    #[test]
    fn straight_track_length_and_heading() {
        let traj = straight(1000.0).generate().unwrap();
        let len = traj.path_length();
        // 5 m of acceleration plus 1000 m of cruise.
        assert!((len - 1005.0).abs() < 0.2, "{len}");
        let last = traj.epochs().last().unwrap();
        assert!((last.att.azimuth - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((last.v_l.x - 10.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_hits_samples_and_midpoints() {
        let traj = straight(100.0).generate().unwrap();
        let a = traj.epochs()[3];
        let b = traj.epochs()[4];
        assert_eq!(traj.interpolate(a.t).unwrap(), a);
        let mid = traj.interpolate(0.5 * (a.t + b.t)).unwrap();
        assert!((mid.pos.lon - 0.5 * (a.pos.lon + b.pos.lon)).abs() < 1e-15);
        assert!(traj.interpolate(-1.0).is_err());
    }

    #[test]
    fn downtown_tour_scale() {
        let traj = downtown_tour(43.6452, -79.3806, 1.5, 10.0).generate().unwrap();
        let len = traj.path_length();
        assert!((9000.0..9250.0).contains(&len), "path length {len}");
        assert!((traj.duration() - 1200.0).abs() < 0.2, "duration {}", traj.duration());
    }
}
