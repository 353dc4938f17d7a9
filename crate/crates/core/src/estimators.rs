//! Correlation reconstructions: G², ΔG², normalized g² and DGI.
//!
//! All four are finished from one set of streaming sums per transform,
//! [`CorrAccumulator`], collected over frame blocks and merged along the
//! fixed tree of [`crate::reduce`]. ΔG² can also be computed in centered
//! two-pass form with [`CenteredAccumulator`] as an independent route.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use crate::dist::{validate_pair, TransformSpec};
use crate::error::{Error, Result};
use crate::forward::{check_run_inputs, FrameSource, MeasurementRun, NoiseModel};
use crate::image::GrayImage;
use crate::reduce::{tree_reduce, Join, Sequential};
use crate::rng::SeedRecipe;
use crate::sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Estimator {
    /// `⟨S·F_n⟩`
    G2,
    /// `⟨S·F_n⟩ − ⟨S⟩⟨F_n⟩`
    DeltaG2,
    /// `⟨S·F_n⟩ / (⟨S⟩⟨F_n⟩)`
    NormalizedG2,
    /// `⟨S·F_n⟩ − ⟨S⟩/⟨S_R⟩ · ⟨S_R·F_n⟩`
    Dgi,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::G2, Estimator::DeltaG2, Estimator::NormalizedG2, Estimator::Dgi];

    /// Case-safe name for file names and flags.
    pub fn slug(&self) -> &'static str {
        match self {
            Estimator::G2 => "raw-g2",
            Estimator::DeltaG2 => "delta-g2",
            Estimator::NormalizedG2 => "norm-g2",
            Estimator::Dgi => "dgi",
        }
    }

    fn min_frames(&self) -> usize {
        match self {
            Estimator::G2 => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::G2 => "G2",
            Estimator::DeltaG2 => "DeltaG2",
            Estimator::NormalizedG2 => "g2",
            Estimator::Dgi => "DGI",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "G2" | "raw-g2" => Estimator::G2,
            "DeltaG2" | "delta-g2" | "dg2" => Estimator::DeltaG2,
            "g2" | "norm-g2" | "normalized-g2" => Estimator::NormalizedG2,
            "DGI" | "dgi" => Estimator::Dgi,
            _ => return Err(Error::InvalidParameter(alloc::format!("unknown estimator '{s}'"))),
        })
    }
}

/// Per-pixel reconstruction values.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub estimator: Estimator,
    pub transform: TransformSpec,
    pub values: Vec<f64>,
    pub frames: usize,
}

/// Streaming sums over frames for one transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrAccumulator {
    count: usize,
    sum_s: f64,
    sum_sr: f64,
    sum_f: Vec<f64>,
    sum_sf: Vec<f64>,
    sum_srf: Vec<f64>,
}

impl CorrAccumulator {
    pub fn new(pixels: usize) -> Self {
        Self {
            count: 0,
            sum_s: 0.0,
            sum_sr: 0.0,
            sum_f: vec![0.0; pixels],
            sum_sf: vec![0.0; pixels],
            sum_srf: vec![0.0; pixels],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn pixels(&self) -> usize {
        self.sum_f.len()
    }

    /// Adds one frame: bucket `s`, reference total `s_ref`, transformed pixels `f`.
    #[inline]
    pub fn add_frame(&mut self, s: f64, s_ref: f64, f: &[f64]) {
        debug_assert_eq!(f.len(), self.sum_f.len());
        self.count += 1;
        self.sum_s += s;
        self.sum_sr += s_ref;
        for (((acc_f, acc_sf), acc_srf), &x) in self
            .sum_f
            .iter_mut()
            .zip(self.sum_sf.iter_mut())
            .zip(self.sum_srf.iter_mut())
            .zip(f)
        {
            *acc_f += x;
            *acc_sf += s * x;
            *acc_srf += s_ref * x;
        }
    }

    /// Combines sums over disjoint frame ranges.
    pub fn merge(mut self, other: &CorrAccumulator) -> Self {
        self.count += other.count;
        self.sum_s += other.sum_s;
        self.sum_sr += other.sum_sr;
        for (a, b) in self.sum_f.iter_mut().zip(&other.sum_f) {
            *a += b;
        }
        for (a, b) in self.sum_sf.iter_mut().zip(&other.sum_sf) {
            *a += b;
        }
        for (a, b) in self.sum_srf.iter_mut().zip(&other.sum_srf) {
            *a += b;
        }
        self
    }

    /// `⟨S⟩`
    pub fn mean_bucket(&self) -> f64 {
        self.sum_s / self.count as f64
    }

    /// `⟨S_R⟩`
    pub fn mean_reference(&self) -> f64 {
        self.sum_sr / self.count as f64
    }

    /// `⟨F_n⟩` for every pixel.
    pub fn mean_f(&self) -> Vec<f64> {
        let t = self.count as f64;
        self.sum_f.iter().map(|s| s / t).collect()
    }

    pub fn finish(&self, estimator: Estimator, transform: TransformSpec) -> Result<Reconstruction> {
        if self.count < estimator.min_frames() {
            return Err(Error::TooFewSamples { needed: estimator.min_frames(), found: self.count });
        }
        let t = self.count as f64;
        let mean_s = self.sum_s / t;
        let values: Vec<f64> = match estimator {
            Estimator::G2 => self.sum_sf.iter().map(|x| x / t).collect(),
            Estimator::DeltaG2 => self
                .sum_sf
                .iter()
                .zip(&self.sum_f)
                .map(|(sf, f)| sf / t - mean_s * (f / t))
                .collect(),
            Estimator::NormalizedG2 => {
                if mean_s == 0.0 {
                    return Err(Error::DegenerateRun { estimator, reason: "mean bucket value is zero" });
                }
                if self.sum_f.contains(&0.0) {
                    return Err(Error::DegenerateRun { estimator, reason: "a pixel has zero mean pattern value" });
                }
                self.sum_sf
                    .iter()
                    .zip(&self.sum_f)
                    .map(|(sf, f)| (sf / t) / (mean_s * (f / t)))
                    .collect()
            }
            Estimator::Dgi => {
                let mean_sr = self.sum_sr / t;
                if mean_sr == 0.0 {
                    return Err(Error::DegenerateRun { estimator, reason: "mean reference bucket is zero" });
                }
                let ratio = mean_s / mean_sr;
                self.sum_sf
                    .iter()
                    .zip(&self.sum_srf)
                    .map(|(sf, srf)| sf / t - ratio * (srf / t))
                    .collect()
            }
        };
        if let Some(n) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "{estimator} produced a non-finite value at pixel {n}"
            )));
        }
        Ok(Reconstruction { estimator, transform, values, frames: self.count })
    }
}

/// Sums of `(S − ⟨S⟩)(F_n − ⟨F_n⟩)` given precomputed means.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredAccumulator {
    count: usize,
    sum: Vec<f64>,
}

impl CenteredAccumulator {
    pub fn new(pixels: usize) -> Self {
        Self { count: 0, sum: vec![0.0; pixels] }
    }

    #[inline]
    pub fn add_frame(&mut self, centered_s: f64, f: &[f64], mean_f: &[f64]) {
        self.count += 1;
        for ((acc, &x), &m) in self.sum.iter_mut().zip(f).zip(mean_f) {
            *acc += centered_s * (x - m);
        }
    }

    pub fn merge(mut self, other: &CenteredAccumulator) -> Self {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self
    }

    pub fn finish(&self, transform: TransformSpec) -> Result<Reconstruction> {
        if self.count < 2 {
            return Err(Error::TooFewSamples { needed: 2, found: self.count });
        }
        let t = self.count as f64;
        Ok(Reconstruction {
            estimator: Estimator::DeltaG2,
            transform,
            values: self.sum.iter().map(|s| s / t).collect(),
            frames: self.count,
        })
    }
}

/// Means from a first pass, needed by the centered second pass.
#[derive(Debug, Clone)]
pub struct FirstPassMeans {
    pub mean_s: f64,
    pub mean_f: Vec<f64>,
}

impl From<&CorrAccumulator> for FirstPassMeans {
    fn from(acc: &CorrAccumulator) -> Self {
        Self { mean_s: acc.mean_bucket(), mean_f: acc.mean_f() }
    }
}

/// Transformed-frame buffers shared by the per-range kernels.
struct Scratch {
    frame: Vec<f64>,
    transformed: Vec<f64>,
}

impl Scratch {
    fn new(pixels: usize) -> Self {
        Self { frame: vec![0.0; pixels], transformed: vec![0.0; pixels] }
    }
}

/// `f(I)` for one frame, rejecting values outside the transform's domain.
#[inline]
fn transform_frame(transform: &TransformSpec, frame: &[f64], out: &mut [f64]) -> Result<()> {
    transform.eval_into(frame, out);
    let can_fail = match transform {
        TransformSpec::Log => true,
        TransformSpec::Power(_) => transform.integer_power().is_none(),
        _ => false,
    };
    if can_fail {
        if let Some(pixel) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::TransformDomain { pixel, value: frame[pixel], transform: transform.to_string() });
        }
    }
    Ok(())
}

fn check_source<S: FrameSource + ?Sized>(frames: &S, buckets: &[f64]) -> Result<()> {
    if frames.frame_count() != buckets.len() {
        return Err(Error::LengthMismatch { expected: buckets.len(), found: frames.frame_count() });
    }
    Ok(())
}

/// Accumulates frames `range` of a recorded run for each transform.
pub fn accumulate_range<S: FrameSource + ?Sized>(
    frames: &S,
    buckets: &[f64],
    transforms: &[TransformSpec],
    range: Range<usize>,
) -> Result<Vec<CorrAccumulator>> {
    let pixels = frames.pixel_count();
    let mut accs: Vec<CorrAccumulator> = transforms.iter().map(|_| CorrAccumulator::new(pixels)).collect();
    let mut scratch = Scratch::new(pixels);
    for t in range {
        frames.fill_frame(t, &mut scratch.frame)?;
        let s_ref = sum::pairwise_sum(&scratch.frame);
        for (acc, tr) in accs.iter_mut().zip(transforms) {
            transform_frame(tr, &scratch.frame, &mut scratch.transformed)?;
            acc.add_frame(buckets[t], s_ref, &scratch.transformed);
        }
    }
    Ok(accs)
}

/// Simulates buckets for `range` and accumulates them in the same pass.
#[allow(clippy::too_many_arguments)]
pub fn simulate_accumulate_range<S: FrameSource + ?Sized>(
    image: &GrayImage,
    frames: &S,
    gamma: f64,
    noise: &NoiseModel,
    recipe: &SeedRecipe,
    transforms: &[TransformSpec],
    range: Range<usize>,
) -> Result<(Vec<f64>, Vec<CorrAccumulator>)> {
    let pixels = frames.pixel_count();
    let noise_stream = recipe.noise_stream();
    let mut accs: Vec<CorrAccumulator> = transforms.iter().map(|_| CorrAccumulator::new(pixels)).collect();
    let mut buckets = Vec::with_capacity(range.len());
    let mut scratch = Scratch::new(pixels);
    for t in range {
        frames.fill_frame(t, &mut scratch.frame)?;
        let s = gamma * sum::dot(image.values(), &scratch.frame) + noise.draw(&noise_stream, t);
        buckets.push(s);
        let s_ref = sum::pairwise_sum(&scratch.frame);
        for (acc, tr) in accs.iter_mut().zip(transforms) {
            transform_frame(tr, &scratch.frame, &mut scratch.transformed)?;
            acc.add_frame(s, s_ref, &scratch.transformed);
        }
    }
    Ok((buckets, accs))
}

/// Second pass of the centered ΔG² form over `range`.
pub fn centered_range<S: FrameSource + ?Sized>(
    frames: &S,
    buckets: &[f64],
    transforms: &[TransformSpec],
    means: &[FirstPassMeans],
    range: Range<usize>,
) -> Result<Vec<CenteredAccumulator>> {
    let pixels = frames.pixel_count();
    let mut accs: Vec<CenteredAccumulator> = transforms.iter().map(|_| CenteredAccumulator::new(pixels)).collect();
    let mut scratch = Scratch::new(pixels);
    for t in range {
        frames.fill_frame(t, &mut scratch.frame)?;
        for ((acc, tr), m) in accs.iter_mut().zip(transforms).zip(means) {
            transform_frame(tr, &scratch.frame, &mut scratch.transformed)?;
            acc.add_frame(buckets[t] - m.mean_s, &scratch.transformed, &m.mean_f);
        }
    }
    Ok(accs)
}

fn merge_all(a: Vec<CorrAccumulator>, b: Vec<CorrAccumulator>) -> Vec<CorrAccumulator> {
    a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect()
}

/// One-pass sums over a recorded run, for each transform.
pub fn correlate<S, J>(frames: &S, buckets: &[f64], transforms: &[TransformSpec], join: &J) -> Result<Vec<CorrAccumulator>>
where
    S: FrameSource + Sync + ?Sized,
    J: Join + Sync,
{
    check_source(frames, buckets)?;
    let leaf = |r: Range<usize>| accumulate_range(frames, buckets, transforms, r);
    tree_reduce(buckets.len(), join, &leaf, &merge_all)
        .unwrap_or(Err(Error::TooFewSamples { needed: 1, found: 0 }))
}

/// Simulates a run and accumulates its sums in a single pass over the frames.
#[allow(clippy::too_many_arguments)]
pub fn simulate_correlate<S, J>(
    image: &GrayImage,
    frames: &S,
    gamma: f64,
    noise: &NoiseModel,
    recipe: &SeedRecipe,
    transforms: &[TransformSpec],
    join: &J,
) -> Result<(Vec<f64>, Vec<CorrAccumulator>)>
where
    S: FrameSource + Sync + ?Sized,
    J: Join + Sync,
{
    check_run_inputs(image, frames.frame_count(), gamma, noise)?;
    if frames.pixel_count() != image.len() {
        return Err(Error::LengthMismatch { expected: image.len(), found: frames.pixel_count() });
    }
    let leaf = |r: Range<usize>| simulate_accumulate_range(image, frames, gamma, noise, recipe, transforms, r);
    let merge = |(mut ba, aa): (Vec<f64>, Vec<CorrAccumulator>), (bb, ab): (Vec<f64>, Vec<CorrAccumulator>)| {
        ba.extend_from_slice(&bb);
        (ba, merge_all(aa, ab))
    };
    tree_reduce(frames.frame_count(), join, &leaf, &merge)
        .unwrap_or(Err(Error::TooFewSamples { needed: 2, found: 0 }))
}

/// Centered-form ΔG² from first-pass sums.
pub fn correlate_centered<S, J>(
    frames: &S,
    buckets: &[f64],
    transforms: &[TransformSpec],
    first_pass: &[CorrAccumulator],
    join: &J,
) -> Result<Vec<Reconstruction>>
where
    S: FrameSource + Sync + ?Sized,
    J: Join + Sync,
{
    check_source(frames, buckets)?;
    let means: Vec<FirstPassMeans> = first_pass.iter().map(FirstPassMeans::from).collect();
    let leaf = |r: Range<usize>| centered_range(frames, buckets, transforms, &means, r);
    let merge = |a: Vec<CenteredAccumulator>, b: Vec<CenteredAccumulator>| -> Vec<CenteredAccumulator> {
        a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect()
    };
    let accs = tree_reduce(buckets.len(), join, &leaf, &merge)
        .unwrap_or(Err(Error::TooFewSamples { needed: 2, found: 0 }))?;
    accs.iter().zip(transforms).map(|(a, t)| a.finish(*t)).collect()
}

/// Largest `|a − b|` relative to the largest `|b|` (or 1 if `b` is all zero).
pub fn max_relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn reconstruct_sequential<S: FrameSource + Sync + ?Sized>(
    run: &MeasurementRun,
    frames: &S,
    transform: TransformSpec,
    estimator: Estimator,
) -> Result<Reconstruction> {
    if let Some(dist) = run.distribution() {
        validate_pair(dist, &transform)?;
    }
    if run.frames() < estimator.min_frames() {
        return Err(Error::TooFewSamples { needed: estimator.min_frames(), found: run.frames() });
    }
    let accs = correlate(frames, &run.buckets, &[transform], &Sequential)?;
    accs[0].finish(estimator, transform)
}

/// G²_n = ⟨S·F_n⟩.
pub fn reconstruct_g2<S: FrameSource + Sync + ?Sized>(run: &MeasurementRun, frames: &S, transform: TransformSpec) -> Result<Reconstruction> {
    reconstruct_sequential(run, frames, transform, Estimator::G2)
}

/// ΔG²_n = ⟨S·F_n⟩ − ⟨S⟩⟨F_n⟩.
pub fn reconstruct_delta_g2<S: FrameSource + Sync + ?Sized>(
    run: &MeasurementRun,
    frames: &S,
    transform: TransformSpec,
) -> Result<Reconstruction> {
    reconstruct_sequential(run, frames, transform, Estimator::DeltaG2)
}

/// ΔG²_n = ⟨(S − ⟨S⟩)(F_n − ⟨F_n⟩)⟩, two passes.
pub fn reconstruct_delta_g2_centered<S: FrameSource + Sync + ?Sized>(
    run: &MeasurementRun,
    frames: &S,
    transform: TransformSpec,
) -> Result<Reconstruction> {
    if let Some(dist) = run.distribution() {
        validate_pair(dist, &transform)?;
    }
    if run.frames() < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: run.frames() });
    }
    let first = correlate(frames, &run.buckets, &[transform], &Sequential)?;
    let mut out = correlate_centered(frames, &run.buckets, &[transform], &first, &Sequential)?;
    Ok(out.remove(0))
}

/// g²_n = ⟨S·F_n⟩ / (⟨S⟩⟨F_n⟩).
pub fn reconstruct_normalized_g2<S: FrameSource + Sync + ?Sized>(
    run: &MeasurementRun,
    frames: &S,
    transform: TransformSpec,
) -> Result<Reconstruction> {
    reconstruct_sequential(run, frames, transform, Estimator::NormalizedG2)
}

/// DGI_n = ⟨S·F_n⟩ − ⟨S⟩/⟨S_R⟩ · ⟨S_R·F_n⟩.
pub fn reconstruct_dgi<S: FrameSource + Sync + ?Sized>(run: &MeasurementRun, frames: &S, transform: TransformSpec) -> Result<Reconstruction> {
    reconstruct_sequential(run, frames, transform, Estimator::Dgi)
}
