use super::{Trajectory, TrajectoryError};
use crate::geo::{wrap_two_pi, UtmPosition, UtmZone};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeployError {
    #[error("spacing must be positive, got {0} m")]
    NonPositiveSpacing(f64),
    #[error("antenna height {height} m must exceed UE height {ue_height} m")]
    AntennaTooLow { height: f64, ue_height: f64 },
    #[error("trajectory has no horizontal extent")]
    DegeneratePath,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
}

/// A base station with its surveyed grid position and array boresight (azimuth, radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsSite {
    pub id: u32,
    pub pos: UtmPosition,
    pub boresight: f64,
}

/// Horizontal UTM polyline with cumulative arc length, zero-length segments removed.
#[derive(Debug, Clone)]
pub struct Polyline {
    pts: Vec<(f64, f64)>,
    arc: Vec<f64>,
}

impl Polyline {
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut arc = Vec::new();
        for p in points {
            match pts.last() {
                None => {
                    pts.push(p);
                    arc.push(0.0);
                }
                Some(&q) => {
                    let d = (p.0 - q.0).hypot(p.1 - q.1);
                    if d > 0.0 {
                        arc.push(arc.last().copied().unwrap_or(0.0) + d);
                        pts.push(p);
                    }
                }
            }
        }
        Self { pts, arc }
    }

    pub fn length(&self) -> f64 {
        self.arc.last().copied().unwrap_or(0.0)
    }

    pub fn segments(&self) -> usize {
        self.pts.len().saturating_sub(1)
    }

    /// Point and unit tangent at arc length `s` (clamped to the polyline).
    pub fn at(&self, s: f64) -> Option<((f64, f64), (f64, f64))> {
        if self.pts.len() < 2 {
            return None;
        }
        let s = s.clamp(0.0, self.length());
        let i = self.arc.partition_point(|&a| a <= s).clamp(1, self.pts.len() - 1);
        let (a, b) = (self.pts[i - 1], self.pts[i]);
        let len = self.arc[i] - self.arc[i - 1];
        let u = (s - self.arc[i - 1]) / len;
        let dir = ((b.0 - a.0) / len, (b.1 - a.1) / len);
        Some(((a.0 + u * (b.0 - a.0), a.1 + u * (b.1 - a.1)), dir))
    }
}

/// Places sites every `spacing` metres of horizontal arc length, offset to the right of the
/// direction of travel by `lateral_offset` and mounted at `height` (ellipsoidal, metres).
///
/// Boresight points from the site back towards the road; with zero offset it follows the
/// direction of travel.
pub fn deploy_bs(traj: &Trajectory, zone: UtmZone, spacing: f64, lateral_offset: f64, height: f64) -> Result<Vec<BsSite>, DeployError> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(DeployError::NonPositiveSpacing(spacing));
    }
    let utm = traj.to_utm(zone)?;
    let ue_height = utm.iter().map(|u| u.height).fold(f64::NEG_INFINITY, f64::max);
    if height <= ue_height {
        return Err(DeployError::AntennaTooLow { height, ue_height });
    }
    let line = Polyline::new(utm.iter().map(|u| (u.easting, u.northing)));
    if line.segments() == 0 {
        return Err(DeployError::DegeneratePath);
    }
    // A path that is a whole number of spacings long should not lose its end site to rounding.
    let count = (line.length() / spacing * (1.0 + 1e-12)).floor() as usize + 1;
    let mut sites = Vec::with_capacity(count);
    for k in 0..count {
        let Some(((x, y), (dx, dy))) = line.at(k as f64 * spacing) else {
            return Err(DeployError::DegeneratePath);
        };
        let right = (dy, -dx);
        let boresight = if lateral_offset == 0.0 {
            dx.atan2(dy)
        } else {
            (-right.0 * lateral_offset.signum()).atan2(-right.1 * lateral_offset.signum())
        };
        sites.push(BsSite {
            id: k as u32,
            pos: UtmPosition { easting: x + lateral_offset * right.0, northing: y + lateral_offset * right.1, height, zone },
            boresight: wrap_two_pi(boresight),
        });
    }
    Ok(sites)
}
