//! The acceptance matrix behind `ghoststat verify`.
//!
//! Every seed is fixed here; a run of the matrix is reproducible bit for bit.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use ghoststat_core::estimators::max_relative_deviation;
use ghoststat_core::image::make_weighted_card;
use ghoststat_core::reduce::Join;
use ghoststat_core::{
    build_region_index, compute_moments, linearity_fit, region_statistics, CardLayout, DistributionSpec, Estimator,
    GrayImage, GrayRegionIndex, MomentSet, NoiseModel, Reconstruction, RegionStats, SeedRecipe, TheoryPrediction,
    TransformSpec,
};
use serde::Serialize;

use crate::config::{preset, ImageSource, RunConfig};
use crate::error::{Error, Result};
use crate::parallel::{with_threads, Rayon};
use crate::pipeline::{self, simulate_checked, CheckedRun};
use crate::runfile;

pub const MAIN_SEED: u64 = 1;
pub const VARIANCE_SEED: u64 = 1001;
pub const NOISE_SEED: u64 = 2001;
pub const FLAT_SEED: u64 = 3001;
pub const MOMENT_SEED: u64 = 4001;

/// Gray value of the flat object in the DGI null check.
const FLAT_LEVEL: f64 = 0.7;
const VARIANCE_CARD: usize = 16;
const VARIANCE_FRAMES: usize = 10_000;
/// Thread counts compared by the determinism criterion.
const DETERMINISM_THREADS: [usize; 2] = [1, 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub card: usize,
    pub frames: usize,
    pub repeats: usize,
    pub variance_repeats: usize,
    pub noise_repeats: usize,
    pub moment_samples: usize,
}

impl Scale {
    pub const FULL: Scale = Scale {
        card: 64,
        frames: 100_000,
        repeats: 20,
        variance_repeats: 500,
        noise_repeats: 20,
        moment_samples: 10_000_000,
    };
    pub const QUICK: Scale = Scale {
        card: 32,
        frames: 10_000,
        repeats: 10,
        variance_repeats: 40,
        noise_repeats: 10,
        moment_samples: 1_000_000,
    };
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub scale: Scale,
    pub threads: usize,
    /// Test hook: flips the sign of C1 in every prediction.
    pub inject_c1_sign_error: bool,
    /// Scratch space for the determinism runs.
    pub work_dir: PathBuf,
}

impl VerifyOptions {
    pub fn new(quick: bool, work_dir: PathBuf) -> Self {
        Self {
            scale: if quick { Scale::QUICK } else { Scale::FULL },
            threads: 0,
            inject_c1_sign_error: false,
            work_dir,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {} {:<22} {:>7.1}s  {}", self.id, self.name, self.seconds, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub scale: &'static str,
    pub results: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        let failed = self.results.iter().filter(|r| !r.pass).count();
        write!(f, "{} of {} criteria passed ({} scale)", self.results.len() - failed, self.results.len(), self.scale)
    }
}

/// A simulated object, ready for fused runs.
#[derive(Debug, Clone)]
struct Setup {
    image: GrayImage,
    regions: GrayRegionIndex,
    dist: DistributionSpec,
    frames: usize,
    gamma: f64,
    noise: NoiseModel,
    /// Factor on slope tolerances for runs shorter than the criterion's T.
    widen: f64,
}

impl Setup {
    /// `cfg` is the preset shortened to `frames`. Region-mean noise scales as
    /// `1/√T` and does not depend on the card size (both the pixel count per
    /// region and the per-pixel variance grow with M), so slope tolerances
    /// widen by `√(T_preset / T)`.
    fn from_preset(name: &str, scale: &Scale) -> Result<Self> {
        let full = preset(name)?;
        let mut cfg = full.clone();
        if let ImageSource::Card { width, height, .. } = &mut cfg.image {
            *width = (*width).min(scale.card);
            *height = (*height).min(scale.card);
        }
        cfg.frames = cfg.frames.min(scale.frames);
        let image = cfg.build_image()?;
        let regions = build_region_index(&image, cfg.region_tolerance());
        Ok(Self {
            image,
            regions,
            dist: cfg.distribution.clone(),
            frames: cfg.frames,
            gamma: cfg.gamma,
            noise: cfg.noise,
            widen: (full.frames as f64 / cfg.frames as f64).sqrt(),
        })
    }

    fn levels(&self) -> Vec<f64> {
        self.regions.levels().to_vec()
    }
}

struct Experiment<'a> {
    setup: &'a Setup,
    transforms: Vec<TransformSpec>,
    run: CheckedRun,
}

struct Ctx {
    inject: bool,
    /// Centred-vs-one-pass ΔG² deviations of every run so far.
    deviations: Vec<f64>,
    runs: usize,
}

impl Ctx {
    fn experiment<'a, J: Join + Sync>(
        &mut self,
        setup: &'a Setup,
        seed: u64,
        transforms: &[TransformSpec],
        join: &J,
    ) -> Result<Experiment<'a>> {
        let run = simulate_checked(
            &setup.image,
            &setup.dist,
            &SeedRecipe::new(seed),
            setup.frames,
            setup.gamma,
            &setup.noise,
            transforms,
            join,
        )?;
        self.deviations.extend_from_slice(&run.centered_deviation);
        self.runs += 1;
        Ok(Experiment { setup, transforms: transforms.to_vec(), run })
    }

    fn theory(&self, setup: &Setup, est: Estimator, t: &TransformSpec) -> Result<TheoryPrediction> {
        let moments = compute_moments(&setup.dist, t)?;
        let mut th =
            TheoryPrediction::new(est, &moments, &setup.image, &setup.levels(), setup.gamma, setup.frames, &setup.noise)?;
        if self.inject {
            th.constants.c1 = -th.constants.c1;
            th.slope = -th.slope;
            th.intercept = -th.intercept;
            for l in &mut th.levels {
                l.mu = th.intercept + th.slope * l.d;
            }
        }
        Ok(th)
    }
}

impl Experiment<'_> {
    fn recon(&self, k: usize, est: Estimator) -> Result<Reconstruction> {
        Ok(self.run.accumulators[k].finish(est, self.transforms[k])?)
    }

    fn stats(&self, k: usize, est: Estimator, th: &TheoryPrediction) -> Result<Vec<RegionStats>> {
        let recon = self.recon(k, est)?;
        let stats = region_statistics(&recon, &self.setup.regions, Some(th))?;
        Ok(stats.into_iter().collect::<ghoststat_core::Result<Vec<_>>>()?)
    }

    /// Linearity of transform `k` under `est`, with an optional intercept band.
    fn line(&self, ctx: &Ctx, k: usize, est: Estimator, min_r2: f64, slope_tol: f64, band: bool) -> Result<(bool, String)> {
        let th = ctx.theory(self.setup, est, &self.transforms[k])?;
        let stats = self.stats(k, est, &th)?;
        let fit = linearity_fit(&stats, est, &th)?;
        let slope_tol = slope_tol * self.setup.widen;
        let mut pass = fit.r_squared >= min_r2 && fit.slope_rel_error <= slope_tol;
        let mut detail = format!(
            "{est}/{}: R²={:.6} slope={:.5e} vs {:.5e} ({:.2}% ≤ {:.1}%)",
            self.transforms[k],
            fit.r_squared,
            fit.slope,
            fit.predicted_slope,
            100.0 * fit.slope_rel_error,
            100.0 * slope_tol
        );
        if band {
            let zero = stats
                .iter()
                .min_by(|a, b| a.level.abs().total_cmp(&b.level.abs()))
                .filter(|s| s.level == 0.0)
                .ok_or_else(|| Error::Usage("intercept band needs a d = 0 region".into()))?;
            let sigma0 = zero.sigma2.map(f64::sqrt).unwrap_or(f64::NAN);
            let bound = 2.0 * sigma0 / (zero.pixels as f64).sqrt();
            pass &= fit.intercept_abs_error <= bound;
            detail += &format!(" |b|={:.2e} ≤ {:.2e}", fit.intercept_abs_error, bound);
        }
        Ok((pass, detail))
    }

    /// `(passed, total)` KS tests of transform `k` under ΔG².
    fn ks(&self, ctx: &Ctx, k: usize) -> Result<(usize, usize)> {
        let th = ctx.theory(self.setup, Estimator::DeltaG2, &self.transforms[k])?;
        let stats = self.stats(k, Estimator::DeltaG2, &th)?;
        Ok((stats.iter().filter(|s| s.ks_pass() == Some(true)).count(), stats.len()))
    }
}

fn scaled_preset(name: &str, scale: &Scale) -> Result<RunConfig> {
    let mut cfg = preset(name)?;
    if let ImageSource::Card { width, height, .. } = &mut cfg.image {
        *width = (*width).min(scale.card);
        *height = (*height).min(scale.card);
    }
    cfg.frames = cfg.frames.min(scale.frames);
    Ok(cfg)
}

fn outcome(id: u32, name: &'static str, start: Instant, r: Result<(bool, String)>) -> CriterionResult {
    let (pass, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name, pass, detail, seconds: start.elapsed().as_secs_f64() }
}

/// KS over repeated runs: each run may lose at most one region, and 95 %
/// of all region tests must pass.
fn ks_verdict(per_run: &[(usize, usize)]) -> (bool, String) {
    let passed: usize = per_run.iter().map(|r| r.0).sum();
    let total: usize = per_run.iter().map(|r| r.1).sum();
    let weak_runs = per_run.iter().filter(|r| r.0 + 1 < r.1).count();
    let rate = passed as f64 / total.max(1) as f64;
    let pass = total > 0 && weak_runs == 0 && rate >= 0.95;
    (pass, format!("{passed}/{total} region tests ({:.1}%), {weak_runs} runs with >1 failure", 100.0 * rate))
}

/// Runs the nine criteria.
pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    let scale = opts.scale;
    let mut ctx = Ctx { inject: opts.inject_c1_sign_error, deviations: Vec::new(), runs: 0 };
    let mut results = with_threads(opts.threads, || statistical_criteria(&scale, &mut ctx))?;

    let start = Instant::now();
    let det = determinism(opts, &mut ctx.deviations);
    let determinism_result = outcome(9, "determinism", start, det);

    let worst = ctx.deviations.iter().copied().fold(0.0f64, |a, d| if d.is_nan() { f64::NAN } else { a.max(d) });
    results.push(CriterionResult {
        id: 7,
        name: "centred identity",
        pass: worst <= 1e-9,
        detail: format!("max deviation {worst:.2e} over {} ΔG² reconstructions in {} runs", ctx.deviations.len(), ctx.runs + 2),
        seconds: 0.0,
    });
    results.push(determinism_result);
    results.sort_by_key(|r| r.id);
    let name = match scale {
        s if s == Scale::FULL => "full",
        s if s == Scale::QUICK => "quick",
        _ => "custom",
    };
    Ok(VerifyReport { scale: name, results })
}

fn statistical_criteria(scale: &Scale, ctx: &mut Ctx) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    let sim = Setup::from_preset("paper-sim", scale);
    let sweep = [TransformSpec::Identity, TransformSpec::Power(3.0), TransformSpec::Exp, TransformSpec::Log];

    let start = Instant::now();
    let main = sim.as_ref().map_err(clone_err).and_then(|s| ctx.experiment(s, MAIN_SEED, &sweep, &Rayon));
    out.push(outcome(1, "linear mean", start, (|| {
        let main = main.as_ref().map_err(clone_err)?;
        let (pass, detail) = main.line(ctx, 0, Estimator::DeltaG2, 0.999, 0.02, true)?;
        let th = ctx.theory(main.setup, Estimator::DeltaG2, &TransformSpec::Identity)?;
        // Var(I) of uniform(0.1, 1).
        let c1_closed = 0.9 * 0.9 / 12.0;
        let c1_ok = (th.constants.c1 - c1_closed).abs() <= 1e-12;
        Ok((pass && c1_ok, format!("C1={:.6} (closed form {c1_closed}); {detail}", th.constants.c1)))
    })()));

    let start = Instant::now();
    out.push(outcome(2, "transform universality", start, (|| {
        let main = main.as_ref().map_err(clone_err)?;
        let mut pass = true;
        let mut details = Vec::new();
        for k in 1..sweep.len() {
            let (p, d) = main.line(ctx, k, Estimator::DeltaG2, 0.999, 0.02, false)?;
            pass &= p;
            details.push(d);
        }
        Ok((pass, details.join("; ")))
    })()));

    let start = Instant::now();
    out.push(outcome(3, "gaussian shape", start, (|| {
        let setup = sim.as_ref().map_err(clone_err)?;
        let main = main.as_ref().map_err(clone_err)?;
        let mut per_run = vec![main.ks(ctx, 0)?];
        for seed in MAIN_SEED + 1..MAIN_SEED + scale.repeats as u64 {
            let e = ctx.experiment(setup, seed, &[TransformSpec::Identity], &Rayon)?;
            per_run.push(e.ks(ctx, 0)?);
        }
        Ok(ks_verdict(&per_run))
    })()));

    let start = Instant::now();
    out.push(outcome(4, "variance formula", start, variance_criterion(scale, ctx)));

    let start = Instant::now();
    out.push(outcome(5, "noise extension", start, (|| {
        let setup = Setup::from_preset("paper-exp", scale)?;
        let mut per_run = Vec::new();
        let mut line = None;
        for seed in NOISE_SEED..NOISE_SEED + scale.noise_repeats as u64 {
            let e = ctx.experiment(&setup, seed, &[TransformSpec::Identity], &Rayon)?;
            if line.is_none() {
                line = Some(e.line(ctx, 0, Estimator::DeltaG2, 0.999, 0.02, true)?);
            }
            per_run.push(e.ks(ctx, 0)?);
        }
        let (line_pass, line_detail) = line.unwrap_or((false, "no runs".into()));
        let (ks_pass, ks_detail) = ks_verdict(&per_run);
        Ok((line_pass && ks_pass, format!("{line_detail}; KS {ks_detail}")))
    })()));

    let start = Instant::now();
    out.push(outcome(6, "g2 and DGI means", start, (|| {
        let main = main.as_ref().map_err(clone_err)?;
        let (g2_pass, g2) = main.line(ctx, 0, Estimator::NormalizedG2, 0.995, 0.03, false)?;
        let (dgi_pass, dgi) = main.line(ctx, 0, Estimator::Dgi, 0.995, 0.03, false)?;
        let (flat_pass, flat) = flat_dgi(scale, ctx)?;
        Ok((g2_pass && dgi_pass && flat_pass, format!("{g2}; {dgi}; {flat}")))
    })()));

    let start = Instant::now();
    out.push(outcome(8, "moment oracle", start, moment_criterion(scale)));
    out
}

fn clone_err(e: &Error) -> Error {
    Error::Usage(e.to_string())
}

fn variance_criterion(scale: &Scale, ctx: &mut Ctx) -> Result<(bool, String)> {
    let image = make_weighted_card(VARIANCE_CARD, VARIANCE_CARD, &[0.0, 1.0], &[0.5, 0.5], CardLayout::Stripes)?;
    let regions = build_region_index(&image, 1e-9);
    let setup = Setup {
        image,
        regions,
        dist: DistributionSpec::uniform(0.1, 1.0)?,
        frames: VARIANCE_FRAMES,
        gamma: 1.0,
        noise: NoiseModel::None,
        widen: 1.0,
    };
    let pixels = setup.image.len();
    let mut count = 0.0;
    let mut mean = vec![0.0; pixels];
    let mut m2 = vec![0.0; pixels];
    for seed in VARIANCE_SEED..VARIANCE_SEED + scale.variance_repeats as u64 {
        let e = ctx.experiment(&setup, seed, &[TransformSpec::Identity], &Rayon)?;
        let recon = e.recon(0, Estimator::DeltaG2)?;
        count += 1.0;
        for ((m, s), x) in mean.iter_mut().zip(&mut m2).zip(&recon.values) {
            let delta = x - *m;
            *m += delta / count;
            *s += delta * (x - *m);
        }
    }
    let th = ctx.theory(&setup, Estimator::DeltaG2, &TransformSpec::Identity)?;
    let mut pass = count >= 2.0;
    let mut details = Vec::new();
    for (level, members) in setup.regions.regions() {
        let empirical = members.iter().map(|&n| m2[n] / (count - 1.0)).sum::<f64>() / members.len() as f64;
        let predicted = th.level(level).and_then(|l| l.sigma2).unwrap_or(f64::NAN);
        let rel = (empirical / predicted - 1.0).abs();
        pass &= rel <= 0.05;
        details.push(format!("d={level}: {empirical:.4e} vs {predicted:.4e} ({:.2}%)", 100.0 * rel));
    }
    Ok((pass, format!("{} repetitions; {}", count, details.join("; "))))
}

fn flat_dgi(scale: &Scale, ctx: &mut Ctx) -> Result<(bool, String)> {
    let image = GrayImage::new(scale.card, scale.card, vec![FLAT_LEVEL; scale.card * scale.card])?;
    let regions = build_region_index(&image, 1e-9);
    let setup = Setup {
        image,
        regions,
        dist: DistributionSpec::uniform(0.1, 1.0)?,
        frames: scale.frames,
        gamma: 1.0,
        noise: NoiseModel::None,
        widen: 1.0,
    };
    let e = ctx.experiment(&setup, FLAT_SEED, &[TransformSpec::Identity], &Rayon)?;
    let recon = e.recon(0, Estimator::Dgi)?;
    let th = ctx.theory(&setup, Estimator::DeltaG2, &TransformSpec::Identity)?;
    let mut pass = true;
    let mut worst = 0.0f64;
    for (level, members) in setup.regions.regions() {
        let mean = members.iter().map(|&n| recon.values[n]).sum::<f64>() / members.len() as f64;
        let sigma = th.level(level).and_then(|l| l.sigma2).unwrap_or(f64::NAN).sqrt();
        let band = 4.0 * sigma / (members.len() as f64).sqrt();
        pass &= mean.abs() <= band;
        worst = worst.max(mean.abs() / band);
    }
    Ok((pass, format!("flat DGI |mean| at {:.1e} of the 4σ band", worst)))
}

/// Transform/law pairs shipped with validated closed-form or quadrature moments.
pub fn shipped_pairs() -> Vec<(DistributionSpec, TransformSpec)> {
    let uniform = DistributionSpec::Uniform { lo: 0.1, hi: 1.0 };
    let binary = DistributionSpec::Bernoulli { p: 0.5, value0: 0.0, value1: 1.0 };
    let mut pairs = Vec::new();
    for t in [TransformSpec::Identity, TransformSpec::Power(3.0), TransformSpec::Exp, TransformSpec::Log] {
        pairs.push((uniform.clone(), t));
    }
    for t in [TransformSpec::Identity, TransformSpec::Power(3.0), TransformSpec::Exp] {
        pairs.push((binary.clone(), t));
    }
    pairs
}

/// Count, mean and sum of squared deviations, merged chunk by chunk.
#[derive(Debug, Clone, Copy, Default)]
struct Running {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn merge_chunk(&mut self, xs: &[f64]) {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let m2: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        let n = self.n + k;
        let delta = mean - self.mean;
        self.mean += delta * k / n;
        self.m2 += m2 + delta * delta * self.n * k / n;
        self.n = n;
    }
}

/// Empirical moments of one pair: `(means, standard errors)`.
pub fn empirical_moments(dist: &DistributionSpec, t: &TransformSpec, samples: usize, stream_index: usize, seed: u64) -> ([f64; 8], [f64; 8]) {
    const CHUNK: usize = 4096;
    let stream = SeedRecipe::new(seed).pattern_stream();
    let sampler = dist.sampler();
    let base = SeedRecipe::pattern_counter(stream_index, samples, 0);
    let mut acc = [Running::default(); 8];
    let mut cols = vec![vec![0.0; CHUNK]; 8];
    let mut done = 0;
    while done < samples {
        let len = CHUNK.min(samples - done);
        for j in 0..len {
            let i = sampler.map(stream.uniform(base.wrapping_add((done + j) as u64)));
            let f = t.eval(i);
            for (col, &(a, b)) in cols.iter_mut().zip(&MomentSet::POWERS) {
                col[j] = i.powi(a as i32) * f.powi(b as i32);
            }
        }
        for (r, col) in acc.iter_mut().zip(&cols) {
            r.merge_chunk(&col[..len]);
        }
        done += len;
    }
    let means = acc.map(|r| r.mean);
    let se = acc.map(|r| (r.m2 / (r.n - 1.0) / r.n).sqrt());
    (means, se)
}

fn moment_criterion(scale: &Scale) -> Result<(bool, String)> {
    let pairs = shipped_pairs();
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    use rayon::prelude::*;
    let empirical: Vec<_> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, (d, t))| empirical_moments(d, t, scale.moment_samples, k, MOMENT_SEED))
        .collect();
    for ((d, t), (means, se)) in pairs.iter().zip(empirical) {
        let theory = compute_moments(d, t)?.as_array();
        for (j, name) in MomentSet::NAMES.iter().enumerate() {
            let diff = (means[j] - theory[j]).abs();
            let z = if se[j] > 0.0 {
                diff / se[j]
            } else if diff <= 1e-12 * theory[j].abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            };
            pass &= z <= 3.0;
            if z > worst {
                worst = z;
                worst_at = format!("{name} of {d} with {t}");
            }
        }
    }
    Ok((pass, format!("{} pairs × 8 moments, {} samples each; max {worst:.2} SE ({worst_at})", pairs.len(), scale.moment_samples)))
}

fn determinism(opts: &VerifyOptions, deviations: &mut Vec<f64>) -> Result<(bool, String)> {
    let cfg = scaled_preset("paper-sim", &opts.scale)?;
    let root = opts.work_dir.join("determinism");
    let mut indexes = Vec::new();
    for threads in DETERMINISM_THREADS {
        let dir = root.join(format!("threads-{threads}"));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(Error::io(&dir))?;
        }
        pipeline::simulate(&cfg, &dir, threads)?;
        let index = pipeline::reconstruct(&dir, &cfg.estimators, &cfg.transforms, threads)?;
        deviations.extend(index.entries.iter().filter_map(|e| e.centered_deviation));
        indexes.push((dir, index));
    }
    let (a_dir, a) = &indexes[0];
    let (b_dir, b) = &indexes[1];
    let read = |dir: &PathBuf| {
        let p = dir.join(runfile::BUCKETS);
        fs::read(&p).map_err(Error::io(&p))
    };
    let same_buckets = read(a_dir)? == read(b_dir)?;
    let mut worst = 0.0f64;
    for (ra, rb) in a.entries.iter().zip(&b.entries) {
        let x = pipeline::read_reconstruction(a_dir, ra)?;
        let y = pipeline::read_reconstruction(b_dir, rb)?;
        worst = worst.max(max_relative_deviation(&x.values, &y.values));
    }
    let pass = same_buckets && a.entries.len() == b.entries.len() && worst <= 1e-9;
    let _ = fs::remove_dir_all(&root);
    Ok((
        pass,
        format!(
            "threads {:?}: buckets {}, {} reconstructions max deviation {worst:.1e}",
            DETERMINISM_THREADS,
            if same_buckets { "byte-identical" } else { "DIFFER" },
            a.entries.len()
        ),
    ))
}
