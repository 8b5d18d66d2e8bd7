use super::{visibility, BsSite, LinkState, Trajectory, VisibilityModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Contiguous run of epochs without any LOS base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub epochs: usize,
}

impl OutageSegment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityStats {
    /// Fraction of epochs with exactly k LOS sites, for k = 0..=k_max.
    pub fractions: Vec<f64>,
    pub outages: Vec<OutageSegment>,
    pub epochs: usize,
}

impl ConnectivityStats {
    /// Builds statistics from per-epoch LOS counts. An outage ends at the first epoch that
    /// regains LOS, or one sample interval after the last epoch.
    pub fn from_counts(times: &[f64], counts: &[usize]) -> Self {
        assert_eq!(times.len(), counts.len(), "times and counts must align");
        let n = counts.len();
        let k_max = counts.iter().copied().max().unwrap_or(0);
        let mut hist = vec![0usize; k_max + 1];
        for &c in counts {
            hist[c] += 1;
        }
        let fractions = hist.iter().map(|&h| h as f64 / n.max(1) as f64).collect();
        let step = if n >= 2 { (times[n - 1] - times[0]) / (n - 1) as f64 } else { 0.0 };
        let mut outages = Vec::new();
        let mut start: Option<usize> = None;
        for i in 0..=n {
            let zero = i < n && counts[i] == 0;
            match (zero, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    let t_end = if i < n { times[i] } else { times[n - 1] + step };
                    outages.push(OutageSegment { t_start: times[s], t_end, epochs: i - s });
                    start = None;
                }
                _ => {}
            }
        }
        Self { fractions, outages, epochs: n }
    }

    pub fn fraction(&self, k: usize) -> f64 {
        self.fractions.get(k).copied().unwrap_or(0.0)
    }

    pub fn k_max(&self) -> usize {
        self.fractions.len().saturating_sub(1)
    }

    /// Whether `t` lies inside a reported outage.
    pub fn in_outage(&self, t: f64) -> bool {
        self.outages.iter().any(|o| o.contains(t))
    }
}

/// Number of LOS sites at every trajectory epoch.
pub fn los_counts(model: &VisibilityModel, sites: &[BsSite], traj: &Trajectory) -> Vec<usize> {
    traj.epochs().iter().map(|e| sites.iter().filter(|s| visibility(model, s, e) == LinkState::Los).count()).collect()
}

pub fn connectivity_stats(model: &VisibilityModel, sites: &[BsSite], traj: &Trajectory) -> ConnectivityStats {
    let times: Vec<f64> = traj.epochs().iter().map(|e| e.t).collect();
    ConnectivityStats::from_counts(&times, &los_counts(model, sites, traj))
}

/// Per-site LOS/NLOS/blocked totals, handy for scenario diagnostics.
pub fn link_state_totals(model: &VisibilityModel, sites: &[BsSite], traj: &Trajectory) -> BTreeMap<LinkState, usize> {
    let mut totals = BTreeMap::new();
    for e in traj.epochs() {
        for s in sites {
            *totals.entry(visibility(model, s, e)).or_insert(0) += 1;
        }
    }
    totals
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_schedule() {
        let times: Vec<f64> = (0..10).map(f64::from).collect();
        let stats = ConnectivityStats::from_counts(&times, &[3, 3, 3, 2, 2, 2, 2, 1, 0, 0]);
        assert_eq!(stats.fractions, vec![0.2, 0.1, 0.4, 0.3]);
        assert_eq!(stats.outages, vec![OutageSegment { t_start: 8.0, t_end: 10.0, epochs: 2 }]);
        assert_eq!(stats.outages[0].duration(), 2.0);
    }

    #[test]
    fn all_los_has_no_outage() {
        let times: Vec<f64> = (0..5).map(f64::from).collect();
        let stats = ConnectivityStats::from_counts(&times, &[4; 5]);
        assert_eq!(stats.fraction(4), 1.0);
        assert!(stats.outages.is_empty());
    }

    #[test]
    fn interior_outages_are_disjoint_and_cover_zero_epochs() {
        let counts = [0, 1, 0, 0, 2, 0, 1, 1, 0];
        let times: Vec<f64> = (0..counts.len()).map(|i| i as f64 * 0.1).collect();
        let stats = ConnectivityStats::from_counts(&times, &counts);
        assert_eq!(stats.outages.len(), 4);
        let covered: usize = stats.outages.iter().map(|o| o.epochs).sum();
        assert_eq!(covered, counts.iter().filter(|&&c| c == 0).count());
        for w in stats.outages.windows(2) {
            assert!(w[0].t_end <= w[1].t_start);
        }
        let sum: f64 = stats.fractions.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
