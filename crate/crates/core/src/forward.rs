//! Bucket-signal synthesis and measurement runs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dist::{DistributionSpec, PixelSampler};
use crate::error::{Error, Result};
use crate::image::{GrayImage, PatternFrame};
use crate::rng::{CounterStream, SeedRecipe};
use crate::sum;

/// Additive measurement noise `S' = S + e`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum NoiseModel {
    #[default]
    None,
    /// Gaussian with mean `E(e)` and variance `D(e)`.
    Gaussian { mean: f64, var: f64 },
}

impl NoiseModel {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        let n = NoiseModel::Gaussian { mean, var };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Gaussian { mean, var } if !(mean.is_finite() && var.is_finite() && *var >= 0.0) => Err(
                Error::InvalidParameter(alloc::format!("noise needs finite mean and variance >= 0, got ({mean}, {var})")),
            ),
            _ => Ok(()),
        }
    }

    /// `E(e)`.
    pub fn mean(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { mean, .. } => *mean,
        }
    }

    /// `D(e)`.
    pub fn variance(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { var, .. } => *var,
        }
    }

    /// Noise added to the bucket of frame `frame`.
    #[inline]
    pub fn draw(&self, stream: &CounterStream, frame: usize) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { mean, var } if *var == 0.0 => *mean,
            NoiseModel::Gaussian { mean, var } => mean + libm::sqrt(*var) * stream.standard_normal(frame as u64),
        }
    }
}

impl core::fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NoiseModel::None => f.write_str("none"),
            NoiseModel::Gaussian { mean, var } => write!(f, "gaussian({mean:?}, {var:?})"),
        }
    }
}

impl core::str::FromStr for NoiseModel {
    type Err = Error;

    /// Parses `none` or `gaussian(mean, variance)`.
    fn from_str(s: &str) -> Result<Self> {
        match crate::dist::split_call(s) {
            (name, None) if name.eq_ignore_ascii_case("none") => Ok(NoiseModel::None),
            (name, Some(args)) if name.eq_ignore_ascii_case("gaussian") => match crate::dist::parse_numbers(args)?.as_slice() {
                [mean, var] => NoiseModel::gaussian(*mean, *var),
                _ => Err(Error::InvalidParameter("gaussian noise takes (mean, variance)".into())),
            },
            _ => Err(Error::InvalidParameter(alloc::format!("unknown noise model '{}'", s.trim()))),
        }
    }
}

/// Total transmitted intensity `S = γ Σ_m d_m I_m`.
pub fn bucket_signal(image: &GrayImage, frame: &PatternFrame, gamma: f64) -> Result<f64> {
    if frame.len() != image.len() {
        return Err(Error::LengthMismatch { expected: image.len(), found: frame.len() });
    }
    Ok(gamma * sum::dot(image.values(), frame.values()))
}

/// Reference-arm total `S_R = Σ_m I_m`, used by differential GI.
pub fn reference_bucket(frame: &PatternFrame) -> f64 {
    sum::pairwise_sum(frame.values())
}

/// Sample mean and unbiased sample variance of dark-frame buckets.
pub fn estimate_noise_moments(dark_buckets: &[f64]) -> Result<(f64, f64)> {
    let n = dark_buckets.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let mean = sum::mean(dark_buckets);
    let sq: Vec<f64> = dark_buckets.iter().map(|x| (x - mean) * (x - mean)).collect();
    Ok((mean, sum::pairwise_sum(&sq) / (n - 1) as f64))
}

/// Anything that can produce pattern frame `t` on demand.
pub trait FrameSource {
    fn pixel_count(&self) -> usize;
    fn frame_count(&self) -> usize;
    /// Writes frame `t` into `out` (length [`pixel_count`](Self::pixel_count)).
    fn fill_frame(&self, t: usize, out: &mut [f64]) -> Result<()>;
}

/// Frames regenerated from a seed instead of stored.
#[derive(Debug, Clone)]
pub struct SeededFrames {
    dist: DistributionSpec,
    sampler: PixelSampler,
    stream: CounterStream,
    pixels: usize,
    frames: usize,
}

impl SeededFrames {
    pub fn new(dist: &DistributionSpec, recipe: &SeedRecipe, pixels: usize, frames: usize) -> Result<Self> {
        dist.validate()?;
        Ok(Self {
            dist: dist.clone(),
            sampler: dist.sampler(),
            stream: recipe.pattern_stream(),
            pixels,
            frames,
        })
    }

    pub fn distribution(&self) -> &DistributionSpec {
        &self.dist
    }
}

impl FrameSource for SeededFrames {
    fn pixel_count(&self) -> usize {
        self.pixels
    }

    fn frame_count(&self) -> usize {
        self.frames
    }

    #[inline]
    fn fill_frame(&self, t: usize, out: &mut [f64]) -> Result<()> {
        self.sampler.fill(&self.stream, t, out);
        Ok(())
    }
}

/// A stack of `frames × pixels` intensities held in memory, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStack {
    pixels: usize,
    values: Vec<f64>,
}

impl PatternStack {
    pub fn new(pixels: usize, values: Vec<f64>) -> Result<Self> {
        if pixels == 0 || !values.len().is_multiple_of(pixels) {
            return Err(Error::LengthMismatch { expected: pixels, found: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidIntensity { index, value });
        }
        Ok(Self { pixels, values })
    }

    pub fn from_frames(frames: &[PatternFrame]) -> Result<Self> {
        let pixels = frames.first().map_or(0, PatternFrame::len);
        let mut values = Vec::with_capacity(pixels * frames.len());
        for f in frames {
            if f.len() != pixels {
                return Err(Error::LengthMismatch { expected: pixels, found: f.len() });
            }
            values.extend_from_slice(f.values());
        }
        Self::new(pixels, values)
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.pixels..(t + 1) * self.pixels]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl FrameSource for PatternStack {
    fn pixel_count(&self) -> usize {
        self.pixels
    }

    fn frame_count(&self) -> usize {
        self.values.len() / self.pixels
    }

    fn fill_frame(&self, t: usize, out: &mut [f64]) -> Result<()> {
        if t >= self.frame_count() {
            return Err(Error::FrameRead { frame: t, message: "frame index out of range".into() });
        }
        out.copy_from_slice(self.frame(t));
        Ok(())
    }
}

/// Where the patterns of a run come from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum PatternSource {
    /// Regenerable from the law and the seed.
    Seeded { distribution: DistributionSpec, recipe: SeedRecipe },
    /// Recorded patterns, e.g. a pattern-stack file; `reference` is opaque here.
    External { reference: String },
}

/// `T` bucket values plus everything needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRun {
    pub gamma: f64,
    pub pixels: usize,
    pub buckets: Vec<f64>,
    pub source: PatternSource,
    pub image: Option<GrayImage>,
    pub noise: NoiseModel,
}

impl MeasurementRun {
    pub fn frames(&self) -> usize {
        self.buckets.len()
    }

    pub fn distribution(&self) -> Option<&DistributionSpec> {
        match &self.source {
            PatternSource::Seeded { distribution, .. } => Some(distribution),
            PatternSource::External { .. } => None,
        }
    }

    /// Frame source for seeded runs.
    pub fn seeded_frames(&self) -> Option<Result<SeededFrames>> {
        match &self.source {
            PatternSource::Seeded { distribution, recipe } => {
                Some(SeededFrames::new(distribution, recipe, self.pixels, self.frames()))
            }
            PatternSource::External { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((index, &value)) = self.buckets.iter().enumerate().find(|(_, b)| !b.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("bucket {index} is not finite ({value})")));
        }
        if let Some(img) = &self.image {
            if img.len() != self.pixels {
                return Err(Error::LengthMismatch { expected: self.pixels, found: img.len() });
            }
        }
        Ok(())
    }
}

/// Writes `S'_t` for every frame in `range` into `out`; `scratch` must hold
/// one frame.
#[allow(clippy::too_many_arguments)]
pub fn buckets_for_range<S: FrameSource + ?Sized>(
    image: &GrayImage,
    frames: &S,
    gamma: f64,
    noise: &NoiseModel,
    noise_stream: &CounterStream,
    range: core::ops::Range<usize>,
    out: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    for (slot, t) in out.iter_mut().zip(range) {
        frames.fill_frame(t, scratch)?;
        *slot = gamma * sum::dot(image.values(), scratch) + noise.draw(noise_stream, t);
    }
    Ok(())
}

/// Rejects runs with T < 2, non-positive γ, invalid noise or an empty image.
pub fn check_run_inputs(image: &GrayImage, frames: usize, gamma: f64, noise: &NoiseModel) -> Result<()> {
    if frames < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: frames });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("gamma must be positive, got {gamma}")));
    }
    noise.validate()?;
    if image.is_empty() {
        return Err(Error::InvalidDimensions { width: image.width(), height: image.height(), len: 0 });
    }
    Ok(())
}

/// Simulates `frames` bucket measurements on one thread.
pub fn simulate_run(
    image: &GrayImage,
    dist: &DistributionSpec,
    recipe: &SeedRecipe,
    frames: usize,
    gamma: f64,
    noise: NoiseModel,
) -> Result<MeasurementRun> {
    check_run_inputs(image, frames, gamma, &noise)?;
    let source = SeededFrames::new(dist, recipe, image.len(), frames)?;
    let mut buckets = vec![0.0; frames];
    let mut scratch = vec![0.0; image.len()];
    buckets_for_range(image, &source, gamma, &noise, &recipe.noise_stream(), 0..frames, &mut buckets, &mut scratch)?;
    Ok(MeasurementRun {
        gamma,
        pixels: image.len(),
        buckets,
        source: PatternSource::Seeded { distribution: dist.clone(), recipe: *recipe },
        image: Some(image.clone()),
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sample_pattern;

    fn frame(v: &[f64]) -> PatternFrame {
        PatternFrame::new(v.to_vec()).unwrap()
    }

    #[test]
    fn bucket_examples() {
        let opaque = GrayImage::filled(2, 2, 0.0).unwrap();
        assert_eq!(bucket_signal(&opaque, &frame(&[0.3, 0.9, 0.1, 0.5]), 1.0).unwrap(), 0.0);
        let clear = GrayImage::filled(2, 1, 1.0).unwrap();
        assert!((bucket_signal(&clear, &frame(&[0.2, 0.3]), 2.0).unwrap() - 1.0).abs() < 1e-15);
        let gray = GrayImage::new(2, 1, vec![0.4, 0.7]).unwrap();
        assert!((bucket_signal(&gray, &frame(&[1.0, 1.0]), 1.0).unwrap() - 1.1).abs() < 1e-15);
        assert!(bucket_signal(&gray, &frame(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn reference_bucket_examples() {
        assert_eq!(reference_bucket(&frame(&[1.0; 17])), 17.0);
        assert!((reference_bucket(&frame(&[0.1, 0.9])) - 1.0).abs() < 1e-15);
        assert_eq!(reference_bucket(&frame(&[0.0; 4])), 0.0);
    }

    #[test]
    fn noise_moment_examples() {
        assert_eq!(estimate_noise_moments(&[5.0, 5.0, 5.0]).unwrap(), (5.0, 0.0));
        assert_eq!(estimate_noise_moments(&[0.0, 2.0]).unwrap(), (1.0, 2.0));
        assert!(estimate_noise_moments(&[1.0]).is_err());
    }

    #[test]
    fn noise_moments_recover_gaussian_inputs() {
        let noise = NoiseModel::gaussian(2.0985e6, 1.2260e10).unwrap();
        let stream = SeedRecipe::new(99).noise_stream();
        let draws: Vec<f64> = (0..100_000).map(|t| noise.draw(&stream, t)).collect();
        let (m, v) = estimate_noise_moments(&draws).unwrap();
        assert!((m / 2.0985e6 - 1.0).abs() < 0.01);
        assert!((v / 1.2260e10 - 1.0).abs() < 0.03);
    }

    #[test]
    fn noise_model_text_round_trip() {
        use alloc::string::ToString;
        for n in [NoiseModel::None, NoiseModel::gaussian(2.0985e6, 1.226e10).unwrap()] {
            assert_eq!(n.to_string().parse::<NoiseModel>().unwrap(), n);
        }
        assert!("gaussian(1, -1)".parse::<NoiseModel>().is_err());
        assert!("poisson(3)".parse::<NoiseModel>().is_err());
    }

    #[test]
    fn zero_variance_noise_is_an_exact_offset() {
        let img = make_card();
        let dist = DistributionSpec::uniform(0.1, 1.0).unwrap();
        let r = SeedRecipe::new(4);
        let clean = simulate_run(&img, &dist, &r, 50, 1.0, NoiseModel::None).unwrap();
        let shifted = simulate_run(&img, &dist, &r, 50, 1.0, NoiseModel::gaussian(3.5, 0.0).unwrap()).unwrap();
        for (a, b) in clean.buckets.iter().zip(&shifted.buckets) {
            assert_eq!(a + 3.5, *b);
        }
    }

    #[test]
    fn simulated_buckets_match_bucket_signal() {
        let img = make_card();
        let dist = DistributionSpec::uniform(0.1, 1.0).unwrap();
        let r = SeedRecipe::new(8);
        let run = simulate_run(&img, &dist, &r, 10, 2.5, NoiseModel::None).unwrap();
        for t in 0..10 {
            let f = sample_pattern(&dist, img.len(), t, &r).unwrap();
            assert_eq!(run.buckets[t], bucket_signal(&img, &f, 2.5).unwrap());
        }
        assert!(run.buckets.iter().all(|&b| b >= 0.0));
    }

    #[test]
    fn run_needs_two_frames() {
        let img = make_card();
        let dist = DistributionSpec::uniform(0.1, 1.0).unwrap();
        assert!(simulate_run(&img, &dist, &SeedRecipe::new(1), 1, 1.0, NoiseModel::None).is_err());
        assert!(simulate_run(&img, &dist, &SeedRecipe::new(1), 2, 0.0, NoiseModel::None).is_err());
    }

    fn make_card() -> GrayImage {
        crate::image::make_test_card(8, 8, &[0.0, 0.4, 0.7, 1.0], crate::image::CardLayout::Stripes).unwrap()
    }
}
