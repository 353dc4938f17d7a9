//! Per-region statistics of a reconstruction against the Gaussian prediction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::{Estimator, Reconstruction};
use crate::image::GrayRegionIndex;
use crate::sum;
use crate::theory::TheoryPrediction;

/// Bins per region histogram.
pub const HISTOGRAM_BINS: usize = 51;
/// Histogram half-width in standard deviations.
pub const HISTOGRAM_HALF_WIDTH: f64 = 5.0;

/// `erf` by Abramowitz & Stegun 7.1.26, `|error| < 1.5e-7`.
pub fn erf(x: f64) -> f64 {
    const P: f64 = 0.327_591_1;
    const A: [f64; 5] = [0.254_829_592, -0.284_496_736, 1.421_413_741, -1.453_152_027, 1.061_405_429];
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + P * x);
    let poly = t * (A[0] + t * (A[1] + t * (A[2] + t * (A[3] + t * A[4]))));
    sign * (1.0 - poly * libm::exp(-x * x))
}

/// Gaussian CDF `Φ((x − μ)/σ)`.
pub fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + erf((x - mu) / (sigma * core::f64::consts::SQRT_2)))
}

/// Two-sided KS critical value at α = 0.05 for `n` samples.
pub fn ks_threshold(n: usize) -> f64 {
    1.36 / libm::sqrt(n as f64)
}

/// Largest distance between the empirical CDF of `samples` and `N(μ, σ²)`.
pub fn ks_statistic(samples: &[f64], mu: f64, sigma2: f64) -> Result<f64> {
    if samples.len() < 8 {
        return Err(Error::TooFewSamples { needed: 8, found: samples.len() });
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("KS needs a positive variance, got {sigma2}")));
    }
    let sigma = libm::sqrt(sigma2);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let cdf = normal_cdf(x, mu, sigma);
        d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n)
    }))
}

/// Per-bin probabilities over a fixed range.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    /// `bins + 1` edges, increasing.
    pub edges: Vec<f64>,
    /// Fraction of samples per bin; sums to 1.
    pub probabilities: Vec<f64>,
    /// Gaussian probability mass per bin, when a prediction is available.
    pub theoretical: Option<Vec<f64>>,
    /// Samples below / above the range, counted in the edge bins.
    pub clamped_below: usize,
    pub clamped_above: usize,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `bins` equal bins over `[lo, hi]`; out-of-range samples go to the edge bins.
    /// A zero-width range yields a single bin holding everything.
    pub fn build(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        if hi.partial_cmp(&lo) != Some(core::cmp::Ordering::Greater) || bins == 0 {
            return Self {
                edges: alloc::vec![lo, lo],
                probabilities: alloc::vec![1.0],
                theoretical: None,
                clamped_below: 0,
                clamped_above: 0,
            };
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = alloc::vec![0usize; bins];
        let (mut below, mut above) = (0, 0);
        for &x in samples {
            let bin = if x < lo {
                below += 1;
                0
            } else if x > hi {
                above += 1;
                bins - 1
            } else {
                (((x - lo) / width) as usize).min(bins - 1)
            };
            counts[bin] += 1;
        }
        let n = samples.len() as f64;
        Self {
            edges,
            probabilities: counts.iter().map(|&c| c as f64 / n).collect(),
            theoretical: None,
            clamped_below: below,
            clamped_above: above,
        }
    }

    fn with_gaussian(mut self, mu: f64, sigma: f64) -> Self {
        if sigma > 0.0 && self.edges.len() > 2 {
            self.theoretical = Some(
                self.edges
                    .windows(2)
                    .map(|w| normal_cdf(w[1], mu, sigma) - normal_cdf(w[0], mu, sigma))
                    .collect(),
            );
        }
        self
    }
}

/// Statistics of one gray region of a reconstruction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionStats {
    pub level: f64,
    pub pixels: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub histogram: Histogram,
    pub mu: Option<f64>,
    pub sigma2: Option<f64>,
    pub ks: Option<f64>,
    pub ks_threshold: f64,
}

impl RegionStats {
    pub fn ks_pass(&self) -> Option<bool> {
        self.ks.map(|d| d < self.ks_threshold)
    }
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let mean = sum::mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, sum::pairwise_sum(&sq) / (xs.len() - 1) as f64)
}

/// Mean, variance, histogram and (with theory) KS fit for every region.
///
/// The outer error covers a size mismatch; a region with fewer than two
/// pixels fails on its own.
pub fn region_statistics(
    recon: &Reconstruction,
    regions: &GrayRegionIndex,
    theory: Option<&TheoryPrediction>,
) -> Result<Vec<Result<RegionStats>>> {
    if recon.values.len() != regions.pixel_count() {
        return Err(Error::LengthMismatch { expected: regions.pixel_count(), found: recon.values.len() });
    }
    Ok(regions
        .regions()
        .map(|(level, members)| {
            if members.len() < 2 {
                return Err(Error::RegionTooSmall { level, pixels: members.len() });
            }
            let samples: Vec<f64> = members.iter().map(|&n| recon.values[n]).collect();
            let (mean, variance) = mean_and_variance(&samples);
            let prediction = theory.and_then(|t| t.level(level));
            let mu = prediction.map(|p| p.mu);
            let sigma2 = prediction.and_then(|p| p.sigma2);
            let (centre, spread) = match (mu, sigma2) {
                (Some(m), Some(s2)) => (m, libm::sqrt(s2)),
                _ => (mean, libm::sqrt(variance)),
            };
            let half = HISTOGRAM_HALF_WIDTH * spread;
            let mut histogram = Histogram::build(&samples, centre - half, centre + half, HISTOGRAM_BINS);
            let ks = match (mu, sigma2) {
                (Some(m), Some(s2)) if s2 > 0.0 => {
                    histogram = histogram.with_gaussian(m, libm::sqrt(s2));
                    ks_statistic(&samples, m, s2).ok()
                }
                _ => None,
            };
            Ok(RegionStats {
                level,
                pixels: members.len(),
                mean,
                variance,
                histogram,
                mu,
                sigma2,
                ks,
                ks_threshold: ks_threshold(members.len()),
            })
        })
        .collect())
}

/// Least-squares line through the region means against the predicted line.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearityReport {
    pub estimator: Estimator,
    /// `(d, empirical mean)` per level.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub predicted_slope: f64,
    pub predicted_intercept: f64,
    /// `|slope − predicted| / |predicted|`
    pub slope_rel_error: f64,
    /// `|intercept − predicted|`
    pub intercept_abs_error: f64,
    /// Set when the means carry no spread to explain (e.g. DGI on a flat object).
    pub degenerate: bool,
}

/// Unweighted least-squares line through `(level, mean)` points.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The means have no spread to explain.
    pub flat: bool,
}

/// Fits `mean = slope·d + intercept` over the regions, without theory.
pub fn fit_line(stats: &[RegionStats]) -> Result<LineFit> {
    let mut points: Vec<(f64, f64)> = stats.iter().map(|s| (s.level, s.mean)).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| a.0 == b.0);
    if points.len() < 2 {
        return Err(Error::TooFewLevels(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| { let r = p.1 - intercept - slope * p.0; r * r }).sum();
    let scale = points.iter().fold(0.0f64, |a, p| a.max(p.1.abs()));
    let flat = syy <= 1e-24 * scale * scale.max(1.0);
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 0.0 };
    Ok(LineFit { points, slope, intercept, r_squared, flat })
}

/// Fits `mean = slope·d + intercept` over the regions (unweighted) and
/// compares it with the predicted line.
pub fn linearity_fit(stats: &[RegionStats], estimator: Estimator, theory: &TheoryPrediction) -> Result<LinearityReport> {
    let LineFit { points, slope, intercept, r_squared, flat } = fit_line(stats)?;
    let degenerate = flat || theory.slope == 0.0;

    let slope_rel_error = if theory.slope != 0.0 {
        (slope - theory.slope).abs() / theory.slope.abs()
    } else {
        f64::INFINITY
    };
    Ok(LinearityReport {
        estimator,
        points,
        slope,
        intercept,
        r_squared,
        predicted_slope: theory.slope,
        predicted_intercept: theory.intercept,
        slope_rel_error,
        intercept_abs_error: (intercept - theory.intercept).abs(),
        degenerate,
    })
}
