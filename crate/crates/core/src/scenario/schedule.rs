use super::{BsSite, LinkState, ScheduleWindow, Trajectory};
use crate::geo::geodetic_to_utm_in_zone;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// Random NLOS episodes laid over the scripted outages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomNlos {
    /// Mean number of NLOS episodes per site per minute.
    pub rate_per_min: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
}

impl Default for RandomNlos {
    fn default() -> Self {
        Self { rate_per_min: 0.5, min_duration_s: 2.0, max_duration_s: 8.0 }
    }
}

/// Builds a visibility schedule: every site is blocked during each `outages` window, and
/// random NLOS episodes are added wherever they leave at least one LOS site in range, so
/// zero-LOS epochs occur only inside the scripted outages.
///
/// `traj` supplies the epochs at which the LOS floor is enforced (normally the 5G epochs).
pub fn build_schedule<R: Rng>(
    sites: &[BsSite],
    traj: &Trajectory,
    outages: &[(f64, f64)],
    nlos: &RandomNlos,
    max_range_m: f64,
    rng: &mut R,
) -> Vec<ScheduleWindow> {
    let mut windows: Vec<ScheduleWindow> = Vec::new();
    for s in sites {
        for &(t_start, t_end) in outages {
            windows.push(ScheduleWindow { bs_id: s.id, t_start, t_end, state: LinkState::Blocked });
        }
    }
    let times: Vec<f64> = traj.epochs().iter().map(|e| e.t).collect();
    let in_outage = |t: f64| outages.iter().any(|&(a, b)| t >= a && t < b);
    // in_range[e] lists sites within range at epoch e.
    let in_range: Vec<Vec<usize>> = traj
        .epochs()
        .iter()
        .map(|e| {
            sites
                .iter()
                .enumerate()
                .filter(|(_, s)| {
                    geodetic_to_utm_in_zone(&e.pos, s.pos.zone).is_ok_and(|u| {
                        let d = (u.easting - s.pos.easting).hypot(u.northing - s.pos.northing).hypot(u.height - s.pos.height);
                        d <= max_range_m
                    })
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let mut los: Vec<usize> = in_range.iter().map(Vec::len).collect();

    let span = (times.first().copied().unwrap_or(0.0), times.last().copied().unwrap_or(0.0));
    let rate = nlos.rate_per_min / 60.0;
    if !(rate > 0.0) || nlos.max_duration_s <= 0.0 {
        return windows;
    }
    let Ok(gap) = Exp::new(rate) else {
        return windows;
    };
    let (dmin, dmax) = (nlos.min_duration_s.max(0.0), nlos.max_duration_s.max(nlos.min_duration_s));
    for (j, s) in sites.iter().enumerate() {
        let mut t = span.0 + gap.sample(rng);
        while t < span.1 {
            let d = if dmax > dmin { rng.random_range(dmin..dmax) } else { dmin };
            let (a, b) = (t, t + d);
            t = b + gap.sample(rng);
            let clashes = windows.iter().any(|w| w.bs_id == s.id && a < w.t_end && w.t_start < b);
            if clashes || d <= 0.0 {
                continue;
            }
            let lo = times.partition_point(|&x| x < a);
            let hi = times.partition_point(|&x| x < b);
            let affected: Vec<usize> = (lo..hi).filter(|&e| !in_outage(times[e]) && in_range[e].contains(&j)).collect();
            if affected.iter().any(|&e| los[e] <= 1) {
                continue;
            }
            for e in affected {
                los[e] -= 1;
            }
            windows.push(ScheduleWindow { bs_id: s.id, t_start: a, t_end: b, state: LinkState::Nlos });
        }
    }
    windows.sort_by(|x, y| x.bs_id.cmp(&y.bs_id).then(x.t_start.total_cmp(&y.t_start)));
    windows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::UtmZone;
    use crate::scenario::{connectivity_stats, deploy_bs, downtown_tour, VisibilityModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nlos_never_adds_zero_los_epochs() {
        let traj = downtown_tour(43.6452, -79.3806, 1.5, 2.0).generate().unwrap();
        let zone = UtmZone::new(17, true).unwrap();
        let sites = deploy_bs(&traj, zone, 250.0, 10.0, 10.0).unwrap();
        let outages = [(100.0, 109.0), (500.0, 509.0)];
        let heavy = RandomNlos { rate_per_min: 6.0, min_duration_s: 5.0, max_duration_s: 20.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let windows = build_schedule(&sites, &traj, &outages, &heavy, 300.0, &mut rng);
        assert!(windows.iter().any(|w| w.state == LinkState::Nlos));
        let model = VisibilityModel::scheduled(windows, 300.0).unwrap();
        let stats = connectivity_stats(&model, &sites, &traj);
        assert_eq!(stats.outages.len(), 2);
        for (o, &(a, b)) in stats.outages.iter().zip(&outages) {
            assert_eq!((o.t_start, o.t_end), (a, b));
        }
    }
}
