//! The simulate → reconstruct → analyze pipeline over run directories.

use std::fs;
use std::path::{Path, PathBuf};

use ghoststat_core::estimators::{correlate, correlate_centered, max_relative_deviation, simulate_correlate};
use ghoststat_core::forward::buckets_for_range;
use ghoststat_core::reduce::{tree_reduce, Join};
use ghoststat_core::{
    build_region_index, compute_moments, estimate_noise_moments, fit_line, linearity_fit, region_statistics,
    validate_pair, CorrAccumulator, DistributionSpec, Estimator, FrameSource, GrayImage, NoiseModel, Reconstruction,
    SeedRecipe, SeededFrames, TheoryPrediction, TransformSpec,
};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::parallel::{with_threads, Rayon};
use crate::pgm::{self, PgmFormat};
use crate::report::{self, AnalysisEntry, AnalysisSummary, Fit, ReconIndex, ReconRecord, TheoryEntry};
use crate::runfile::{self, load_run, LoadedRun, RunManifest};
use crate::stack::{read_values, write_stack, StackWriter};

pub const RECON_DIR: &str = "recon";
pub const ANALYSIS_DIR: &str = "analysis";

/// Linearity R² required by `analyze` for a pass.
pub const MIN_R_SQUARED: f64 = 0.999;

/// Simulates the `T` buckets of a run, frame-parallel.
pub fn simulate_buckets<J: Join + Sync>(
    image: &GrayImage,
    dist: &DistributionSpec,
    recipe: &SeedRecipe,
    frames: usize,
    gamma: f64,
    noise: &NoiseModel,
    join: &J,
) -> Result<Vec<f64>> {
    ghoststat_core::forward::check_run_inputs(image, frames, gamma, noise)?;
    let source = SeededFrames::new(dist, recipe, image.len(), frames)?;
    let noise_stream = recipe.noise_stream();
    let leaf = |r: std::ops::Range<usize>| -> ghoststat_core::Result<Vec<f64>> {
        let mut out = vec![0.0; r.len()];
        let mut scratch = vec![0.0; image.len()];
        buckets_for_range(image, &source, gamma, noise, &noise_stream, r, &mut out, &mut scratch)?;
        Ok(out)
    };
    let merge = |mut a: Vec<f64>, b: Vec<f64>| {
        a.extend_from_slice(&b);
        a
    };
    Ok(tree_reduce(frames, join, &leaf, &merge).unwrap_or_else(|| Ok(Vec::new()))?)
}

/// One fused simulate-and-correlate run with the centred ΔG² cross-check.
#[derive(Debug, Clone)]
pub struct CheckedRun {
    pub buckets: Vec<f64>,
    pub accumulators: Vec<CorrAccumulator>,
    /// Max relative deviation between centred and one-pass ΔG², per transform.
    pub centered_deviation: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_checked<J: Join + Sync>(
    image: &GrayImage,
    dist: &DistributionSpec,
    recipe: &SeedRecipe,
    frames: usize,
    gamma: f64,
    noise: &NoiseModel,
    transforms: &[TransformSpec],
    join: &J,
) -> Result<CheckedRun> {
    for t in transforms {
        validate_pair(dist, t)?;
    }
    let source = SeededFrames::new(dist, recipe, image.len(), frames)?;
    let (buckets, accumulators) = simulate_correlate(image, &source, gamma, noise, recipe, transforms, join)?;
    let centered = correlate_centered(&source, &buckets, transforms, &accumulators, join)?;
    let centered_deviation = accumulators
        .iter()
        .zip(&centered)
        .zip(transforms)
        .map(|((acc, c), t)| Ok(max_relative_deviation(&c.values, &acc.finish(Estimator::DeltaG2, *t)?.values)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckedRun { buckets, accumulators, centered_deviation })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

/// Simulates the run described by `cfg` into `dir`.
pub fn simulate(cfg: &RunConfig, dir: &Path, threads: usize) -> Result<SimulateOutcome> {
    cfg.validate().map_err(|(key, message)| Error::Usage(format!("{key}: {message}")))?;
    let image = cfg.build_image()?;
    let recipe = SeedRecipe::new(cfg.seed);
    let buckets = with_threads(threads, || {
        simulate_buckets(&image, &cfg.distribution, &recipe, cfg.frames, cfg.gamma, &cfg.noise, &Rayon)
    })??;
    create_dir(dir)?;
    runfile::write_f64s(&dir.join(runfile::BUCKETS), &buckets)?;
    let image_record = runfile::write_image(dir, &image)?;
    if cfg.save_patterns {
        let source = SeededFrames::new(&cfg.distribution, &recipe, image.len(), cfg.frames)?;
        let mut w = StackWriter::create(&dir.join(runfile::PATTERNS), image.len(), cfg.frames)?;
        let mut frame = vec![0.0; image.len()];
        for t in 0..cfg.frames {
            source.fill_frame(t, &mut frame)?;
            w.write_frame(&frame)?;
        }
        w.finish()?;
    }
    let config_path = dir.join(runfile::CONFIG_TEXT);
    let mut stored = cfg.clone();
    stored.out = None;
    fs::write(&config_path, stored.to_text()).map_err(Error::io(&config_path))?;
    let manifest = runfile::seeded_manifest(&stored, image_record, image.len(), cfg.save_patterns);
    runfile::write_manifest(dir, &manifest)?;
    Ok(SimulateOutcome { dir: dir.to_owned(), manifest })
}

/// Options of `ingest`.
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub buckets_csv: PathBuf,
    pub patterns: PathBuf,
    pub image: Option<PathBuf>,
    pub gamma: f64,
    pub noise: NoiseModel,
    /// Dark-frame buckets; their sample moments become the noise model.
    pub dark_csv: Option<PathBuf>,
    /// Law of the recorded patterns, when known; enables theory in `analyze`.
    pub distribution: Option<DistributionSpec>,
}

/// Turns experimental buckets and patterns into a run directory.
pub fn ingest(opts: &IngestOptions, dir: &Path) -> Result<RunManifest> {
    let buckets = runfile::read_bucket_csv(&opts.buckets_csv)?;
    let stack = crate::stack::FileFrames::open(&opts.patterns)?;
    if stack.frame_count() != buckets.len() {
        return Err(Error::Usage(format!(
            "{} buckets but {} pattern frames in {}",
            buckets.len(),
            stack.frame_count(),
            opts.patterns.display()
        )));
    }
    let image = opts.image.as_deref().map(pgm::read_pgm).transpose()?;
    if let Some(img) = &image {
        if img.len() != stack.pixel_count() {
            return Err(Error::Usage(format!("image has {} pixels, patterns have {}", img.len(), stack.pixel_count())));
        }
    }
    if !(opts.gamma.is_finite() && opts.gamma > 0.0) {
        return Err(Error::Usage(format!("gamma must be positive, got {}", opts.gamma)));
    }
    let noise = match &opts.dark_csv {
        Some(p) => {
            let (mean, var) = estimate_noise_moments(&runfile::read_bucket_csv(p)?)?;
            NoiseModel::gaussian(mean, var)?
        }
        None => opts.noise,
    };
    create_dir(dir)?;
    runfile::write_f64s(&dir.join(runfile::BUCKETS), &buckets)?;
    let image_record = image.as_ref().map(|img| runfile::write_image(dir, img)).transpose()?;
    let patterns = fs::canonicalize(&opts.patterns).map_err(Error::io(&opts.patterns))?;
    let manifest = RunManifest {
        format: runfile::RUN_FORMAT.into(),
        generator: None,
        gamma: opts.gamma,
        frames: buckets.len(),
        pixels: stack.pixel_count(),
        distribution: opts.distribution.clone(),
        master_seed: None,
        noise,
        image: image_record,
        region_tolerance: 0.0,
        buckets: runfile::BUCKETS.into(),
        patterns: Some(patterns.display().to_string()),
        pattern_copy: None,
        config: None,
    };
    runfile::write_manifest(dir, &manifest)?;
    Ok(manifest)
}

fn recon_stem(estimator: Estimator, transform: &TransformSpec) -> String {
    format!("{}_{}", estimator.slug(), transform.slug())
}

fn write_reconstruction(dir: &Path, recon: &Reconstruction, width: usize, height: usize) -> Result<ReconRecord> {
    let stem = recon_stem(recon.estimator, &recon.transform);
    let (samples, min, max) = pgm::normalize_min_max(&recon.values);
    let comments = vec![
        format!("ghoststat reconstruction: estimator {} transform {} frames {}", recon.estimator, recon.transform, recon.frames),
        format!("min-max normalized: sample = round(255 * (v - min) / (max - min)), min = {min:e}, max = {max:e}"),
        format!("raw values in {stem}.gips"),
    ];
    let pgm_name = format!("{stem}.pgm");
    let raw_name = format!("{stem}.gips");
    let pgm_path = dir.join(&pgm_name);
    fs::write(&pgm_path, pgm::encode_bytes(width, height, &samples, PgmFormat::Raw, &comments)).map_err(Error::io(&pgm_path))?;
    write_stack(&dir.join(&raw_name), recon.values.len(), &recon.values)?;
    Ok(ReconRecord {
        estimator: recon.estimator,
        transform: recon.transform,
        frames: recon.frames,
        pgm: pgm_name,
        raw: raw_name,
        min,
        max,
        centered_deviation: None,
    })
}

/// Reconstructs every (estimator, transform) pair of a run in one pass over
/// the frames; ΔG² is cross-checked against the centred two-pass form.
pub fn reconstruct(
    run_dir: &Path,
    estimators: &[Estimator],
    transforms: &[TransformSpec],
    threads: usize,
) -> Result<ReconIndex> {
    let loaded = load_run(run_dir)?;
    if estimators.is_empty() || transforms.is_empty() {
        return Err(Error::Usage("need at least one estimator and one transform".into()));
    }
    if let Some(dist) = loaded.run.distribution().or(loaded.manifest.distribution.as_ref()) {
        for t in transforms {
            validate_pair(dist, t)?;
        }
    }
    let source = loaded.frame_source()?;
    let buckets = &loaded.run.buckets;
    let (accs, centered) = with_threads(threads, || -> Result<_> {
        let accs = correlate(source.as_ref(), buckets, transforms, &Rayon)?;
        let centered = if estimators.contains(&Estimator::DeltaG2) {
            Some(correlate_centered(source.as_ref(), buckets, transforms, &accs, &Rayon)?)
        } else {
            None
        };
        Ok((accs, centered))
    })??;
    let (width, height) = loaded.image().map_or((loaded.run.pixels, 1), |img| (img.width(), img.height()));
    let out = run_dir.join(RECON_DIR);
    create_dir(&out)?;
    let mut entries = Vec::new();
    for (k, (acc, t)) in accs.iter().zip(transforms).enumerate() {
        for &est in estimators {
            let recon = acc.finish(est, *t)?;
            let mut record = write_reconstruction(&out, &recon, width, height)?;
            if est == Estimator::DeltaG2 {
                record.centered_deviation = centered.as_ref().map(|c| max_relative_deviation(&c[k].values, &recon.values));
            }
            entries.push(record);
        }
    }
    let index = ReconIndex { entries };
    report::write_json(&out.join(report::RECON_INDEX), &index)?;
    Ok(index)
}

pub fn read_reconstruction(run_dir: &Path, record: &ReconRecord) -> Result<Reconstruction> {
    let path = run_dir.join(RECON_DIR).join(&record.raw);
    let (header, values) = read_values(&path)?;
    if header.frames != 1 {
        return Err(Error::format(&path, "reconstruction file must hold exactly one frame"));
    }
    Ok(Reconstruction {
        estimator: record.estimator,
        transform: record.transform,
        values,
        frames: record.frames,
    })
}

fn theory_for(loaded: &LoadedRun, image: &GrayImage, levels: &[f64], est: Estimator, t: &TransformSpec) -> Result<Option<TheoryPrediction>> {
    let Some(dist) = loaded.manifest.distribution.as_ref() else {
        return Ok(None);
    };
    let moments = compute_moments(dist, t)?;
    let m = &loaded.manifest;
    Ok(Some(TheoryPrediction::new(est, &moments, image, levels, m.gamma, m.frames, &m.noise)?))
}

/// Per-region statistics, theory and linearity for every reconstruction of a run.
pub fn analyze(run_dir: &Path) -> Result<AnalysisSummary> {
    let loaded = load_run(run_dir)?;
    let image = loaded
        .image()
        .ok_or_else(|| Error::Usage("analysis needs the object image to form gray regions; ingest with --image".into()))?
        .clone();
    let index: ReconIndex = report::read_json(&run_dir.join(RECON_DIR).join(report::RECON_INDEX))?;
    let regions = build_region_index(&image, loaded.manifest.region_tolerance);
    let levels = regions.levels().to_vec();
    let out = run_dir.join(ANALYSIS_DIR);
    create_dir(&out)?;

    let mut theory_entries = Vec::new();
    let mut entries = Vec::new();
    for record in &index.entries {
        let recon = read_reconstruction(run_dir, record)?;
        let theory = theory_for(&loaded, &image, &levels, record.estimator, &record.transform)?;
        let stats = region_statistics(&recon, &regions, theory.as_ref())?;
        let mut ok_stats = Vec::new();
        let mut skipped = Vec::new();
        for (s, level) in stats.into_iter().zip(&levels) {
            match s {
                Ok(s) => ok_stats.push(s),
                Err(e) => skipped.push(format!("level {level}: {e}")),
            }
        }
        let fit = match (&theory, ok_stats.len() >= 2) {
            (_, false) => None,
            (Some(th), true) => Some(Fit::Predicted(linearity_fit(&ok_stats, record.estimator, th)?)),
            (None, true) => Some(Fit::Empirical(fit_line(&ok_stats)?)),
        };
        let stem = recon_stem(record.estimator, &record.transform);
        report::write_region_csv(&out.join(format!("{stem}.csv")), &ok_stats)?;
        let ks_pass = ok_stats.iter().all(|s| s.ks_pass() != Some(false));
        let linearity_pass = fit.as_ref().is_none_or(|f| f.degenerate() || f.r_squared() >= MIN_R_SQUARED);
        let entry = AnalysisEntry {
            estimator: record.estimator,
            transform: record.transform,
            frames: record.frames,
            regions: ok_stats,
            skipped_regions: skipped,
            linearity: fit,
            ks_pass,
            linearity_pass,
            centered_deviation: record.centered_deviation,
        };
        report::write_json(&out.join(format!("{stem}.json")), &entry)?;
        entries.push(entry);
        if let Some(th) = theory {
            theory_entries.push(TheoryEntry { transform: record.transform, prediction: th });
        }
    }
    if !theory_entries.is_empty() {
        report::write_json(&out.join(report::THEORY), &theory_entries)?;
    }
    let summary = AnalysisSummary::new(entries, !theory_entries.is_empty());
    report::write_json(&out.join(report::SUMMARY), &summary.brief())?;
    Ok(summary)
}
