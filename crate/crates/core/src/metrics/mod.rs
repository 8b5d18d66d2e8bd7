//! Error statistics, empirical CDFs, outage summaries and the comparison table.

use crate::geo::{geodetic_to_utm_in_zone, GeoError, UtmZone};
use crate::scenario::{ConnectivityStats, Trajectory};
use crate::solution::{NavSolution, SolutionSource};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Table thresholds, metres, in row order.
pub const THRESHOLDS_M: [f64; 3] = [2.0, 1.0, 0.3];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("error series is empty")]
    Empty,
    #[error("no solution epoch overlaps the truth span")]
    NoOverlap,
    #[error("CDF needs at least one point")]
    NoPoints,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Per-epoch errors of one solution, aligned 1:1 with the solution epochs inside the
/// truth span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub source: SolutionSource,
    pub t: Vec<f64>,
    pub err_3d: Vec<f64>,
    pub err_h: Vec<f64>,
    pub err_v: Vec<f64>,
    pub n_los: Vec<u32>,
    /// Solution epochs dropped because they fall outside the truth span.
    pub excluded: usize,
}

impl ErrorSeries {
    pub fn from_errors(source: SolutionSource, t: Vec<f64>, err_3d: Vec<f64>) -> Self {
        let n = err_3d.len();
        Self { source, err_h: err_3d.clone(), err_v: vec![0.0; n], n_los: vec![0; n], t, err_3d, excluded: 0 }
    }

    pub fn len(&self) -> usize {
        self.err_3d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.err_3d.is_empty()
    }

    /// Error at the first epoch at or after `t`.
    pub fn at_or_after(&self, t: f64) -> Option<f64> {
        let i = self.t.partition_point(|x| *x < t - 1e-9);
        self.err_3d.get(i).copied()
    }
}

/// Errors against truth interpolated to each solution epoch, measured in UTM grid metres.
pub fn compute_errors(solutions: &[NavSolution], truth: &Trajectory, zone: UtmZone) -> Result<ErrorSeries, MetricsError> {
    let source = solutions.first().map(|s| s.source).unwrap_or(SolutionSource::FiveGStandalone);
    let mut e = ErrorSeries::from_errors(source, Vec::new(), Vec::new());
    for s in solutions {
        let Ok(tr) = truth.interpolate(s.t) else {
            e.excluded += 1;
            continue;
        };
        let a = geodetic_to_utm_in_zone(&s.pos, zone)?;
        let b = geodetic_to_utm_in_zone(&tr.pos, zone)?;
        let (de, dn, du) = (a.easting - b.easting, a.northing - b.northing, a.height - b.height);
        let h = de.hypot(dn);
        e.t.push(s.t);
        e.err_h.push(h);
        e.err_v.push(du.abs());
        e.err_3d.push(h.hypot(du));
        e.n_los.push(s.n_los_bs);
    }
    if e.is_empty() {
        return Err(MetricsError::NoOverlap);
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub label: SolutionSource,
    pub epochs: usize,
    pub rms_m: f64,
    pub max_m: f64,
    pub below_2m: f64,
    pub below_1m: f64,
    pub below_0_3m: f64,
    pub p95_m: f64,
    pub outage_max_m: Vec<f64>,
}

impl ErrorReport {
    /// Threshold fractions in `THRESHOLDS_M` order.
    pub fn fractions(&self) -> [f64; 3] {
        [self.below_2m, self.below_1m, self.below_0_3m]
    }
}

/// Nearest-rank percentile, `p` in (0, 100].
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn summarize(label: SolutionSource, errs: &[f64]) -> Result<ErrorReport, MetricsError> {
    if errs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = errs.len() as f64;
    let s = sorted(errs);
    let below = |th: f64| errs.iter().filter(|e| **e < th).count() as f64 / n;
    Ok(ErrorReport {
        label,
        epochs: errs.len(),
        rms_m: (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
        max_m: s[s.len() - 1],
        below_2m: below(THRESHOLDS_M[0]),
        below_1m: below(THRESHOLDS_M[1]),
        below_0_3m: below(THRESHOLDS_M[2]),
        p95_m: nearest_rank(&s, 95.0),
        outage_max_m: Vec::new(),
    })
}

pub fn compute_report(e: &ErrorSeries) -> Result<ErrorReport, MetricsError> {
    summarize(e.source, &e.err_3d)
}

/// Report including the maximum error inside each outage.
pub fn compute_report_with_outages(e: &ErrorSeries, stats: &ConnectivityStats) -> Result<ErrorReport, MetricsError> {
    let mut r = compute_report(e)?;
    r.outage_max_m = outage_report(e, stats)?.outages.iter().map(|o| o.max_error_m).collect();
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageEntry {
    pub t_start: f64,
    pub t_end: f64,
    pub duration_s: f64,
    pub max_error_m: f64,
    /// Error at the first epoch that regains LOS.
    pub exit_error_m: f64,
    /// (max error − entry error) / duration, m/s.
    pub growth_rate_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub label: SolutionSource,
    pub outages: Vec<OutageEntry>,
    pub in_coverage: ErrorReport,
}

pub fn outage_report(e: &ErrorSeries, stats: &ConnectivityStats) -> Result<OutageReport, MetricsError> {
    if e.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut outages = Vec::with_capacity(stats.outages.len());
    for o in &stats.outages {
        let inside: Vec<f64> = e.t.iter().zip(&e.err_3d).filter(|(t, _)| o.contains(**t)).map(|(_, x)| *x).collect();
        let entry_idx = e.t.partition_point(|t| *t < o.t_start);
        let entry = if entry_idx > 0 { e.err_3d[entry_idx - 1] } else { e.err_3d[0] };
        let max = inside.iter().copied().fold(f64::NAN, f64::max);
        let max = if max.is_nan() { entry } else { max };
        let exit = e.at_or_after(o.t_end).unwrap_or(max);
        let d = o.duration();
        outages.push(OutageEntry {
            t_start: o.t_start,
            t_end: o.t_end,
            duration_s: d,
            max_error_m: max,
            exit_error_m: exit,
            growth_rate_ms: if d > 0.0 { (max - entry) / d } else { 0.0 },
        });
    }
    let covered: Vec<f64> =
        e.t.iter().zip(&e.err_3d).filter(|(t, _)| !stats.outages.iter().any(|o| o.contains(**t))).map(|(_, x)| *x).collect();
    let in_coverage = summarize(e.source, if covered.is_empty() { &e.err_3d } else { &covered })?;
    Ok(OutageReport { label: e.source, outages, in_coverage })
}

/// Empirical CDF sampled at `n_points` evenly spaced probability levels: point i is the
/// error of nearest rank ⌈i·n/n_points⌉ paired with that rank's probability.
pub fn emit_cdf(e: &ErrorSeries, n_points: usize) -> Result<Vec<(f64, f64)>, MetricsError> {
    if e.is_empty() {
        return Err(MetricsError::Empty);
    }
    if n_points == 0 {
        return Err(MetricsError::NoPoints);
    }
    let s = sorted(&e.err_3d);
    let n = s.len();
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(n_points);
    for i in 1..=n_points {
        let rank = ((i as f64 * n as f64 / n_points as f64).ceil() as usize).clamp(1, n);
        let pt = (s[rank - 1], rank as f64 / n as f64);
        if out.last() != Some(&pt) {
            out.push(pt);
        }
    }
    Ok(out)
}

pub fn cdf_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("error_m,probability\n");
    for (e, p) in points {
        let _ = writeln!(s, "{e},{p}");
    }
    s
}

fn fmt_metres(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x} m");
    }
    if x >= 1000.0 {
        let exp = x.log10().floor() as i32;
        let mant = format!("{:.1}", x / 10f64.powi(exp));
        return format!("{}e{exp} m", mant.trim_end_matches('0').trim_end_matches('.'));
    }
    let s = if x < 1.0 { format!("{x:.2}") } else { format!("{x:.1}") };
    format!("{} m", s.trim_end_matches('0').trim_end_matches('.'))
}

fn fmt_pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

/// Plain-text comparison table: one column per report, ordered 5G-SA, INS-SA, 5G-OBMS.
pub fn render_table(reports: &[ErrorReport]) -> String {
    let mut cols: Vec<&ErrorReport> = reports.iter().collect();
    cols.sort_by_key(|r| SolutionSource::ALL.iter().position(|s| *s == r.label));
    let rows: [(&str, Box<dyn Fn(&ErrorReport) -> String>); 5] = [
        ("RMS", Box::new(|r| fmt_metres(r.rms_m))),
        ("Max", Box::new(|r| fmt_metres(r.max_m))),
        ("<2 m", Box::new(|r| fmt_pct(r.below_2m))),
        ("<1 m", Box::new(|r| fmt_pct(r.below_1m))),
        ("<30 cm", Box::new(|r| fmt_pct(r.below_0_3m))),
    ];
    let mut cells: Vec<Vec<String>> =
        vec![std::iter::once("Statistics".to_string()).chain(cols.iter().map(|r| r.label.label().to_string())).collect()];
    for (name, f) in &rows {
        cells.push(std::iter::once(name.to_string()).chain(cols.iter().map(|r| f(r))).collect());
    }
    let widths: Vec<usize> = (0..=cols.len()).map(|j| cells.iter().map(|row| row[j].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
