use super::{BsSite, TrajectoryEpoch};
use crate::geo::{geodetic_to_utm_in_zone, UtmPosition};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VisibilityError {
    #[error("schedule windows overlap for bs {bs_id} at t = {t} s")]
    OverlappingWindows { bs_id: u32, t: f64 },
    #[error("window for bs {bs_id} has t_end {t_end} <= t_start {t_start}")]
    EmptyWindow { bs_id: u32, t_start: f64, t_end: f64 },
    #[error("building {index}: {reason}")]
    InvalidBuilding { index: usize, reason: String },
    #[error("max range must be positive")]
    InvalidRange,
    #[error("unknown link state `{0}`")]
    UnknownState(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkState {
    Los,
    Nlos,
    Blocked,
}

impl fmt::Display for LinkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkState::Los => "LOS",
            LinkState::Nlos => "NLOS",
            LinkState::Blocked => "blocked",
        })
    }
}

impl FromStr for LinkState {
    type Err = VisibilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "los" => Ok(LinkState::Los),
            "nlos" => Ok(LinkState::Nlos),
            "blocked" => Ok(LinkState::Blocked),
            _ => Err(VisibilityError::UnknownState(s.to_string())),
        }
    }
}

/// Half-open window [t_start, t_end) during which a link is forced into `state`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleWindow {
    pub bs_id: u32,
    pub t_start: f64,
    pub t_end: f64,
    pub state: LinkState,
}

/// Building footprint (UTM easting/northing ring, no repeated closing vertex) and roof height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub footprint: Vec<(f64, f64)>,
    pub height_m: f64,
}

impl Building {
    fn validate(&self, index: usize) -> Result<(), VisibilityError> {
        let bad = |reason: &str| VisibilityError::InvalidBuilding { index, reason: reason.into() };
        let n = self.footprint.len();
        if n < 3 {
            return Err(bad("footprint needs at least three vertices"));
        }
        if !self.height_m.is_finite() || self.footprint.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
            return Err(bad("non-finite coordinate"));
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (self.footprint[i], self.footprint[(i + 1) % n]);
                let (c, d) = (self.footprint[j], self.footprint[(j + 1) % n]);
                if segments_intersect_2d(a, b, c, d) {
                    return Err(bad("footprint is self-intersecting"));
                }
            }
        }
        Ok(())
    }

    fn contains(&self, p: (f64, f64)) -> bool {
        let mut inside = false;
        let n = self.footprint.len();
        for i in 0..n {
            let (a, b) = (self.footprint[i], self.footprint[(i + 1) % n]);
            if (a.1 > p.1) != (b.1 > p.1) {
                let x = a.0 + (p.1 - a.1) / (b.1 - a.1) * (b.0 - a.0);
                if p.0 < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Whether the 3D segment passes through the footprint extruded from below up to the roof.
    pub fn intersects_segment(&self, p: [f64; 3], q: [f64; 3]) -> bool {
        let d = (q[0] - p[0], q[1] - p[1]);
        let mut params = vec![0.0, 1.0];
        let n = self.footprint.len();
        for i in 0..n {
            let (a, b) = (self.footprint[i], self.footprint[(i + 1) % n]);
            let e = (b.0 - a.0, b.1 - a.1);
            let denom = cross(d, e);
            if denom.abs() < 1e-15 {
                continue;
            }
            let w = (a.0 - p[0], a.1 - p[1]);
            let s = cross(w, e) / denom;
            let u = cross(w, d) / denom;
            if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u) {
                params.push(s);
            }
        }
        params.sort_by(f64::total_cmp);
        params.dedup();
        let z = |s: f64| p[2] + s * (q[2] - p[2]);
        params.windows(2).any(|w| {
            let (s0, s1) = (w[0], w[1]);
            if s1 - s0 < 1e-12 {
                return false;
            }
            let mid = 0.5 * (s0 + s1);
            self.contains((p[0] + mid * d.0, p[1] + mid * d.1)) && z(s0).min(z(s1)) <= self.height_m
        })
    }
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn segments_intersect_2d(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let o = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| cross((q.0 - p.0, q.1 - p.1), (r.0 - p.0, r.1 - p.1));
    let (d1, d2) = (o(c, d, a), o(c, d, b));
    let (d3, d4) = (o(a, b, c), o(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        r.0 >= p.0.min(q.0) && r.0 <= p.0.max(q.0) && r.1 >= p.1.min(q.1) && r.1 <= p.1.max(q.1)
    };
    (d1 == 0.0 && on(c, d, a)) || (d2 == 0.0 && on(c, d, b)) || (d3 == 0.0 && on(a, b, c)) || (d4 == 0.0 && on(a, b, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisibilityMode {
    Scheduled,
    Geometric,
}

/// Link-state model. Links beyond `max_range_m` are blocked in either mode.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityModel {
    mode: VisibilityMode,
    windows: BTreeMap<u32, Vec<ScheduleWindow>>,
    buildings: Vec<Building>,
    max_range_m: f64,
    n_block: usize,
}

impl VisibilityModel {
    pub fn scheduled(windows: Vec<ScheduleWindow>, max_range_m: f64) -> Result<Self, VisibilityError> {
        if !(max_range_m > 0.0) {
            return Err(VisibilityError::InvalidRange);
        }
        let mut by_bs: BTreeMap<u32, Vec<ScheduleWindow>> = BTreeMap::new();
        for w in windows {
            if !(w.t_end > w.t_start) {
                return Err(VisibilityError::EmptyWindow { bs_id: w.bs_id, t_start: w.t_start, t_end: w.t_end });
            }
            by_bs.entry(w.bs_id).or_default().push(w);
        }
        for list in by_bs.values_mut() {
            list.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
            for pair in list.windows(2) {
                if pair[1].t_start < pair[0].t_end {
                    return Err(VisibilityError::OverlappingWindows { bs_id: pair[1].bs_id, t: pair[1].t_start });
                }
            }
        }
        Ok(Self { mode: VisibilityMode::Scheduled, windows: by_bs, buildings: Vec::new(), max_range_m, n_block: usize::MAX })
    }

    /// `n_block`: number of crossed footprints at which a link is treated as blocked.
    pub fn geometric(buildings: Vec<Building>, max_range_m: f64, n_block: usize) -> Result<Self, VisibilityError> {
        if !(max_range_m > 0.0) {
            return Err(VisibilityError::InvalidRange);
        }
        for (i, b) in buildings.iter().enumerate() {
            b.validate(i)?;
        }
        Ok(Self { mode: VisibilityMode::Geometric, windows: BTreeMap::new(), buildings, max_range_m, n_block: n_block.max(1) })
    }

    pub fn mode(&self) -> VisibilityMode {
        self.mode
    }

    pub fn max_range_m(&self) -> f64 {
        self.max_range_m
    }

    pub fn windows(&self) -> impl Iterator<Item = &ScheduleWindow> {
        self.windows.values().flatten()
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    /// Link state for a UE already expressed in the site's grid.
    pub fn state_at(&self, bs: &BsSite, t: f64, ue: &UtmPosition) -> LinkState {
        let p = [bs.pos.easting, bs.pos.northing, bs.pos.height];
        let q = [ue.easting, ue.northing, ue.height];
        let range = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt();
        if range > self.max_range_m {
            return LinkState::Blocked;
        }
        match self.mode {
            VisibilityMode::Scheduled => self
                .windows
                .get(&bs.id)
                .and_then(|list| {
                    let i = list.partition_point(|w| w.t_start <= t);
                    i.checked_sub(1).map(|i| list[i]).filter(|w| t < w.t_end)
                })
                .map_or(LinkState::Los, |w| w.state),
            VisibilityMode::Geometric => {
                let hits = self.buildings.iter().filter(|b| b.intersects_segment(p, q)).count();
                match hits {
                    0 => LinkState::Los,
                    n if n >= self.n_block => LinkState::Blocked,
                    _ => LinkState::Nlos,
                }
            }
        }
    }
}

/// Link state between `bs` and the UE at `epoch`.
pub fn visibility(model: &VisibilityModel, bs: &BsSite, epoch: &TrajectoryEpoch) -> LinkState {
    match geodetic_to_utm_in_zone(&epoch.pos, bs.pos.zone) {
        Ok(ue) => model.state_at(bs, epoch.t, &ue),
        Err(_) => LinkState::Blocked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::UtmZone;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn site(id: u32, e: f64, n: f64, h: f64) -> BsSite {
        BsSite { id, pos: UtmPosition { easting: e, northing: n, height: h, zone: UtmZone::new(17, true).unwrap() }, boresight: 0.0 }
    }

    fn ue(e: f64, n: f64, h: f64) -> UtmPosition {
        UtmPosition { easting: e, northing: n, height: h, zone: UtmZone::new(17, true).unwrap() }
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64, h: f64) -> Building {
        Building { footprint: vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)], height_m: h }
    }

    #[test]
    fn scheduled_lookup() {
        let w = ScheduleWindow { bs_id: 3, t_start: 100.0, t_end: 130.0, state: LinkState::Blocked };
        let m = VisibilityModel::scheduled(vec![w], 1000.0).unwrap();
        let bs = site(3, 0.0, 0.0, 10.0);
        assert_eq!(m.state_at(&bs, 115.0, &ue(50.0, 0.0, 1.5)), LinkState::Blocked);
        assert_eq!(m.state_at(&bs, 130.0, &ue(50.0, 0.0, 1.5)), LinkState::Los);
        assert_eq!(m.state_at(&bs, 99.9, &ue(50.0, 0.0, 1.5)), LinkState::Los);
        assert_eq!(m.state_at(&site(4, 0.0, 0.0, 10.0), 115.0, &ue(50.0, 0.0, 1.5)), LinkState::Los);
        assert_eq!(m.state_at(&bs, 0.0, &ue(2000.0, 0.0, 1.5)), LinkState::Blocked);
    }

    #[test]
    fn overlapping_windows_rejected() {
        let a = ScheduleWindow { bs_id: 1, t_start: 0.0, t_end: 10.0, state: LinkState::Nlos };
        let b = ScheduleWindow { bs_id: 1, t_start: 5.0, t_end: 12.0, state: LinkState::Blocked };
        assert!(matches!(VisibilityModel::scheduled(vec![a, b], 300.0), Err(VisibilityError::OverlappingWindows { bs_id: 1, .. })));
    }

    #[test]
    fn geometric_same_side_is_los() {
        let m = VisibilityModel::geometric(vec![rect(10.0, 10.0, 30.0, 30.0, 20.0)], 500.0, 3).unwrap();
        let bs = site(0, 0.0, 0.0, 10.0);
        assert_eq!(m.state_at(&bs, 0.0, &ue(0.0, 50.0, 1.5)), LinkState::Los);
        assert_eq!(m.state_at(&bs, 0.0, &ue(40.0, 40.0, 1.5)), LinkState::Nlos);
        // Line of sight over a low roof.
        let low = VisibilityModel::geometric(vec![rect(10.0, 10.0, 30.0, 30.0, 1.0)], 500.0, 3).unwrap();
        assert_eq!(low.state_at(&bs, 0.0, &ue(40.0, 40.0, 1.5)), LinkState::Los);
    }

    #[test]
    fn many_buildings_block() {
        let bs = vec![rect(10.0, -5.0, 20.0, 5.0, 30.0), rect(30.0, -5.0, 40.0, 5.0, 30.0)];
        let m = VisibilityModel::geometric(bs, 500.0, 2).unwrap();
        assert_eq!(m.state_at(&site(0, 0.0, 0.0, 10.0), 0.0, &ue(60.0, 0.0, 1.5)), LinkState::Blocked);
    }

    #[test]
    fn self_intersecting_footprint_rejected() {
        let bow = Building { footprint: vec![(0.0, 0.0), (10.0, 10.0), (10.0, 0.0), (0.0, 10.0)], height_m: 5.0 };
        assert!(matches!(VisibilityModel::geometric(vec![bow], 100.0, 2), Err(VisibilityError::InvalidBuilding { index: 0, .. })));
    }

    /// Independent oracle: does the segment cross any face of the prism, or start inside it?
    fn brute_force(b: &Building, p: [f64; 3], q: [f64; 3], floor: f64) -> bool {
        let inside = |x: [f64; 3]| b.contains((x[0], x[1])) && x[2] <= b.height_m && x[2] >= floor;
        if inside(p) || inside(q) {
            return true;
        }
        let lerp = |s: f64| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1]), p[2] + s * (q[2] - p[2])];
        // Horizontal caps.
        for zc in [b.height_m, floor] {
            let dz = q[2] - p[2];
            if dz.abs() > 1e-12 {
                let s = (zc - p[2]) / dz;
                if (0.0..=1.0).contains(&s) {
                    let x = lerp(s);
                    if b.contains((x[0], x[1])) {
                        return true;
                    }
                }
            }
        }
        // Vertical walls: plane through the edge, then bounds on edge parameter and height.
        let n = b.footprint.len();
        for i in 0..n {
            let (a, c) = (b.footprint[i], b.footprint[(i + 1) % n]);
            let normal = (c.1 - a.1, -(c.0 - a.0));
            let f = |x: [f64; 3]| (x[0] - a.0) * normal.0 + (x[1] - a.1) * normal.1;
            let (fp, fq) = (f(p), f(q));
            if (fp - fq).abs() < 1e-15 || fp * fq > 0.0 {
                continue;
            }
            let s = fp / (fp - fq);
            let x = lerp(s);
            let len2 = (c.0 - a.0).powi(2) + (c.1 - a.1).powi(2);
            let u = ((x[0] - a.0) * (c.0 - a.0) + (x[1] - a.1) * (c.1 - a.1)) / len2;
            if (0.0..=1.0).contains(&u) && x[2] <= b.height_m && x[2] >= floor {
                return true;
            }
        }
        false
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0;
        for _ in 0..100 {
            let (x0, y0) = (rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
            let (w, d) = (rng.random_range(5.0..30.0), rng.random_range(5.0..30.0));
            let b = rect(x0, y0, x0 + w, y0 + d, rng.random_range(3.0..40.0));
            let p = [rng.random_range(-80.0..80.0), rng.random_range(-80.0..80.0), rng.random_range(5.0..30.0)];
            let q = [rng.random_range(-80.0..80.0), rng.random_range(-80.0..80.0), 1.5];
            let expected = brute_force(&b, p, q, -1000.0);
            assert_eq!(b.intersects_segment(p, q), expected, "{b:?} {p:?} {q:?}");
            assert_eq!(b.intersects_segment(q, p), expected);
            hits += usize::from(expected);
        }
        assert!(hits > 10 && hits < 90, "oracle sample not informative: {hits}");
    }

    #[test]
    fn state_labels_parse() {
        for s in [LinkState::Los, LinkState::Nlos, LinkState::Blocked] {
            assert_eq!(s.to_string().parse::<LinkState>().unwrap(), s);
        }
        assert!("maybe".parse::<LinkState>().is_err());
    }
}
