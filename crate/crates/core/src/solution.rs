//! Position solutions shared by the estimators and the evaluation tools.

use crate::geo::GeodeticPosition;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolutionSource {
    #[serde(rename = "5G-SA")]
    FiveGStandalone,
    #[serde(rename = "INS-SA")]
    InsStandalone,
    #[serde(rename = "5G-OBMS")]
    Fused,
}

impl SolutionSource {
    pub const ALL: [SolutionSource; 3] = [SolutionSource::FiveGStandalone, SolutionSource::InsStandalone, SolutionSource::Fused];

    pub fn label(&self) -> &'static str {
        match self {
            SolutionSource::FiveGStandalone => "5G-SA",
            SolutionSource::InsStandalone => "INS-SA",
            SolutionSource::Fused => "5G-OBMS",
        }
    }
}

impl fmt::Display for SolutionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolutionSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|x| x.label().eq_ignore_ascii_case(s.trim())).ok_or_else(|| format!("unknown solution source `{s}`"))
    }
}

/// One output epoch of any estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavSolution {
    pub t: f64,
    pub pos: GeodeticPosition,
    /// Diagonal position covariance in grid-aligned axes (E, N, U), m². `None` when the
    /// estimator carries no covariance.
    pub cov_diag: Option<[f64; 3]>,
    pub n_los_bs: u32,
    pub source: SolutionSource,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for s in SolutionSource::ALL {
            assert_eq!(s.label().parse::<SolutionSource>().unwrap(), s);
        }
        assert!("GNSS".parse::<SolutionSource>().is_err());
    }
}
