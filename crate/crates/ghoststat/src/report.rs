//! JSON and CSV reports.

use std::fs;
use std::io::Write;
use std::path::Path;

use ghoststat_core::{Estimator, LineFit, LinearityReport, RegionStats, TheoryPrediction, TransformSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RECON_INDEX: &str = "index.json";
pub const THEORY: &str = "theory.json";
pub const SUMMARY: &str = "summary.json";

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(Error::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// One reconstruction written by `reconstruct`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconRecord {
    pub estimator: Estimator,
    pub transform: TransformSpec,
    pub frames: usize,
    pub pgm: String,
    pub raw: String,
    /// Range mapped onto 0..=255 in the PGM.
    pub min: f64,
    pub max: f64,
    /// ΔG² only: max relative deviation from the centred two-pass form.
    pub centered_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconIndex {
    pub entries: Vec<ReconRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryEntry {
    pub transform: TransformSpec,
    pub prediction: TheoryPrediction,
}

/// Linearity fit, against theory when the pattern law is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Fit {
    Predicted(LinearityReport),
    Empirical(LineFit),
}

impl Fit {
    pub fn r_squared(&self) -> f64 {
        match self {
            Fit::Predicted(r) => r.r_squared,
            Fit::Empirical(f) => f.r_squared,
        }
    }

    pub fn degenerate(&self) -> bool {
        match self {
            Fit::Predicted(r) => r.degenerate,
            Fit::Empirical(f) => f.flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisEntry {
    pub estimator: Estimator,
    pub transform: TransformSpec,
    pub frames: usize,
    pub regions: Vec<RegionStats>,
    /// Regions too small for statistics, with the reason.
    pub skipped_regions: Vec<String>,
    pub linearity: Option<Fit>,
    pub ks_pass: bool,
    pub linearity_pass: bool,
    pub centered_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSummary {
    pub entries: Vec<AnalysisEntry>,
    pub with_theory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BriefEntry {
    pub estimator: Estimator,
    pub transform: TransformSpec,
    /// `(level, KS statistic, threshold)` where a KS test ran.
    pub ks: Vec<(f64, f64, f64)>,
    pub ks_pass: bool,
    pub r_squared: Option<f64>,
    pub linearity_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Brief {
    pub pass: bool,
    pub with_theory: bool,
    pub entries: Vec<BriefEntry>,
}

impl AnalysisSummary {
    pub fn new(entries: Vec<AnalysisEntry>, with_theory: bool) -> Self {
        Self { entries, with_theory }
    }

    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.ks_pass && e.linearity_pass)
    }

    pub fn brief(&self) -> Brief {
        Brief {
            pass: self.pass(),
            with_theory: self.with_theory,
            entries: self
                .entries
                .iter()
                .map(|e| BriefEntry {
                    estimator: e.estimator,
                    transform: e.transform,
                    ks: e.regions.iter().filter_map(|r| r.ks.map(|d| (r.level, d, r.ks_threshold))).collect(),
                    ks_pass: e.ks_pass,
                    r_squared: e.linearity.as_ref().map(Fit::r_squared),
                    linearity_pass: e.linearity_pass,
                })
                .collect(),
        }
    }
}

/// One row per bin per region; the theory column is left out when no
/// region has a prediction.
pub fn write_region_csv(path: &Path, stats: &[RegionStats]) -> Result<()> {
    let with_theory = stats.iter().any(|s| s.histogram.theoretical.is_some());
    let mut out = Vec::new();
    let header = if with_theory {
        "level,bin_center,empirical_prob,theoretical_prob"
    } else {
        "level,bin_center,empirical_prob"
    };
    writeln!(out, "{header}").unwrap();
    for s in stats {
        let centers = s.histogram.centers();
        for (i, (c, p)) in centers.iter().zip(&s.histogram.probabilities).enumerate() {
            if with_theory {
                let th = s.histogram.theoretical.as_ref().map_or(String::new(), |t| format!("{:e}", t[i]));
                writeln!(out, "{},{c:e},{p:e},{th}", s.level).unwrap();
            } else {
                writeln!(out, "{},{c:e},{p:e}", s.level).unwrap();
            }
        }
    }
    fs::write(path, out).map_err(Error::io(path))
}
