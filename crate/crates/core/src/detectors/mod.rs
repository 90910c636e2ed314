//! The scan and degree tests. Both read the graph only through
//! [`EdgeOracle`](crate::oracle::EdgeOracle) answers.

mod degree;
mod scan;

use serde::{Deserialize, Serialize};

pub use degree::{degree_test, DegreeConfig, ResolvedDegree};
pub use scan::{
    scan_statistic, scan_test, ResolvedScan, ScanConfig, ScanStatistic, SearchMode, ThresholdMode,
    WeightMatrix, DEFAULT_ENUMERATION_CAP, DEFAULT_RESTARTS,
};

/// `floor(x)` tolerant of representation error just below an integer.
pub(crate) fn floor_tol(x: f64) -> u64 {
    (x + 1e-9).floor().max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorVerdict {
    pub statistic: f64,
    pub threshold: f64,
    /// 1 decides the planted alternative, 0 the null.
    pub decision: u8,
    pub mode: String,
    #[serde(rename = "approximate_flag")]
    pub approximate: bool,
}

impl DetectorVerdict {
    /// Strict comparison: decide 1 iff `statistic > threshold`.
    pub fn from_threshold(statistic: f64, threshold: f64, mode: &str, approximate: bool) -> Self {
        Self {
            statistic,
            threshold,
            decision: u8::from(statistic > threshold),
            mode: mode.to_string(),
            approximate,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdict serializes")
    }
}
