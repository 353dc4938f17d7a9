//! Statistical model of thermal-light ghost imaging.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the pure numerical
//! parts of the toolkit:
//!
//! - [`image`]: object transmittance maps, pattern frames, gray-level regions.
//! - [`rng`] and [`dist`]: counter-based sampling of i.i.d. pattern pixels and
//!   the pixel-value transforms `F = f(I)` used in correlation.
//! - [`forward`]: bucket signals, additive measurement noise, measurement runs.
//! - [`estimators`]: streaming accumulators for G², ΔG², g² and DGI.
//! - [`theory`]: joint moments of `(I, F)` and the closed-form means and
//!   ΔG² variance predicted for each gray level.
//! - [`analysis`]: per-region histograms, Kolmogorov–Smirnov fit and the
//!   linear-mean regression.
//!
//! IO, threading and the command line live in the `ghoststat` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod forward;
pub mod image;
pub mod quadrature;
pub mod reduce;
pub mod rng;
pub mod sum;
pub mod theory;

pub use analysis::{
    fit_line, ks_statistic, ks_threshold, linearity_fit, LineFit, normal_cdf, region_statistics, Histogram,
    LinearityReport, RegionStats,
};
pub use dist::{apply_transform, sample_pattern, validate_pair, DistributionSpec, TransformSpec};
pub use error::{Error, Result};
pub use estimators::{
    CenteredAccumulator, CorrAccumulator, Estimator, Reconstruction,
};
pub use forward::{
    bucket_signal, estimate_noise_moments, reference_bucket, FrameSource, MeasurementRun,
    NoiseModel, PatternSource, PatternStack, SeededFrames,
};
pub use image::{build_region_index, make_test_card, CardLayout, GrayImage, GrayRegionIndex, PatternFrame};
pub use rng::SeedRecipe;
pub use theory::{
    compute_moments, theoretical_constants, theoretical_mean, theoretical_variance_delta_g2,
    Constants, LevelPrediction, MomentSet, TheoryPrediction, VarianceTerms,
};
