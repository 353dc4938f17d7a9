//! Run directories.
//!
//! ```text
//! run.json        manifest (parameters, seed, generator, file names)
//! config.conf     the resolved config, re-runnable with `simulate --config`
//! buckets.f64     T bucket values, little-endian f64, no header
//! image.gips      exact object transmittances (stack layout, T = 1)
//! image.pgm       8-bit preview of the object
//! patterns.gips   pattern stack, when saved or ingested
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ghoststat_core::{
    rng::GENERATOR_NAME, DistributionSpec, FrameSource, GrayImage, MeasurementRun, NoiseModel, PatternSource,
    SeedRecipe, SeededFrames,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::stack::{read_stack, write_stack, FileFrames};

pub const RUN_FORMAT: &str = "ghoststat-run/1";
pub const MANIFEST: &str = "run.json";
pub const CONFIG_TEXT: &str = "config.conf";
pub const BUCKETS: &str = "buckets.f64";
pub const IMAGE_EXACT: &str = "image.gips";
pub const IMAGE_PREVIEW: &str = "image.pgm";
pub const PATTERNS: &str = "patterns.gips";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub width: usize,
    pub height: usize,
    pub exact: String,
    pub preview: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    /// Pattern generator, for seeded runs.
    pub generator: Option<String>,
    pub gamma: f64,
    pub frames: usize,
    pub pixels: usize,
    /// Law of the pattern pixels; absent for ingested runs of unknown law.
    pub distribution: Option<DistributionSpec>,
    pub master_seed: Option<u64>,
    pub noise: NoiseModel,
    pub image: Option<ImageRecord>,
    pub region_tolerance: f64,
    pub buckets: String,
    /// Pattern stack file, relative to the run directory or absolute.
    /// Only set when the stack is the source of the patterns.
    pub patterns: Option<String>,
    /// Copy of seeded patterns written for external tools.
    pub pattern_copy: Option<String>,
    /// Full config of simulated runs.
    pub config: Option<RunConfig>,
}

impl RunManifest {
    pub fn source(&self) -> Result<PatternSource> {
        match (&self.distribution, self.master_seed, &self.patterns) {
            (_, _, Some(p)) => Ok(PatternSource::External { reference: p.clone() }),
            (Some(d), Some(seed), None) => Ok(PatternSource::Seeded { distribution: d.clone(), recipe: SeedRecipe::new(seed) }),
            _ => Err(Error::Usage("manifest has neither a pattern file nor a distribution with a seed".into())),
        }
    }
}

pub fn write_f64s(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(Error::io(path))
}

pub fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::format(path, format!("{} bytes is not a whole number of f64 values", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
}

/// Bucket values from a CSV/text file, one per line. Blank lines and `#`
/// comments are skipped; a non-numeric first line is taken as a header.
pub fn read_bucket_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if !seen_content => {}
            _ => return Err(Error::format(path, format!("line {}: '{field}' is not a finite number", i + 1))),
        }
        seen_content = true;
    }
    if out.is_empty() {
        return Err(Error::format(path, "no bucket values"));
    }
    Ok(out)
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(Error::io(&path))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if m.format != RUN_FORMAT {
        return Err(Error::format(&path, format!("unsupported run format '{}'", m.format)));
    }
    Ok(m)
}

/// Writes `image.gips` and `image.pgm`, returning the manifest record.
pub fn write_image(dir: &Path, image: &GrayImage) -> Result<ImageRecord> {
    write_stack(&dir.join(IMAGE_EXACT), image.len(), image.values())?;
    crate::pgm::write_pgm(
        &dir.join(IMAGE_PREVIEW),
        image,
        crate::pgm::PgmFormat::Raw,
        &["object transmittance, 8-bit preview of image.gips".into()],
    )?;
    Ok(ImageRecord { width: image.width(), height: image.height(), exact: IMAGE_EXACT.into(), preview: IMAGE_PREVIEW.into() })
}

/// A run directory loaded into memory (patterns excepted).
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub run: MeasurementRun,
}

impl LoadedRun {
    pub fn image(&self) -> Option<&GrayImage> {
        self.run.image.as_ref()
    }

    fn resolve(&self, name: &str) -> PathBuf {
        let p = Path::new(name);
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.dir.join(p)
        }
    }

    /// Patterns of the run: regenerated from the seed or read from the stack file.
    pub fn frame_source(&self) -> Result<Box<dyn FrameSource + Sync>> {
        match &self.run.source {
            PatternSource::Seeded { distribution, recipe } => {
                Ok(Box::new(SeededFrames::new(distribution, recipe, self.run.pixels, self.run.frames())?))
            }
            PatternSource::External { reference } => {
                let path = self.resolve(reference);
                let frames = FileFrames::open(&path)?;
                if frames.pixel_count() != self.run.pixels || frames.frame_count() != self.run.frames() {
                    return Err(Error::format(
                        &path,
                        format!(
                            "stack is {}×{} (frames × pixels), run needs {}×{}",
                            frames.frame_count(),
                            frames.pixel_count(),
                            self.run.frames(),
                            self.run.pixels
                        ),
                    ));
                }
                Ok(Box::new(frames))
            }
        }
    }
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest = read_manifest(dir)?;
    let buckets_path = dir.join(&manifest.buckets);
    let buckets = read_f64s(&buckets_path)?;
    if buckets.len() != manifest.frames {
        return Err(Error::format(&buckets_path, format!("{} buckets, manifest says {}", buckets.len(), manifest.frames)));
    }
    let image = match &manifest.image {
        Some(rec) => {
            let path = dir.join(&rec.exact);
            let stack = read_stack(&path)?;
            if stack.pixel_count() != rec.width * rec.height || stack.frame_count() != 1 {
                return Err(Error::format(&path, "image stack does not match the recorded dimensions"));
            }
            Some(GrayImage::new(rec.width, rec.height, stack.values().to_vec()).map_err(|e| Error::format(&path, e.to_string()))?)
        }
        None => None,
    };
    let run = MeasurementRun {
        gamma: manifest.gamma,
        pixels: manifest.pixels,
        buckets,
        source: manifest.source()?,
        image,
        noise: manifest.noise,
    };
    run.validate()?;
    Ok(LoadedRun { dir: dir.to_owned(), manifest, run })
}

pub(crate) fn seeded_manifest(cfg: &RunConfig, image: ImageRecord, pixels: usize, patterns: bool) -> RunManifest {
    RunManifest {
        format: RUN_FORMAT.into(),
        generator: Some(GENERATOR_NAME.into()),
        gamma: cfg.gamma,
        frames: cfg.frames,
        pixels,
        distribution: Some(cfg.distribution.clone()),
        master_seed: Some(cfg.seed),
        noise: cfg.noise,
        image: Some(image),
        region_tolerance: cfg.region_tolerance(),
        buckets: BUCKETS.into(),
        patterns: None,
        pattern_copy: patterns.then(|| PATTERNS.into()),
        config: Some(cfg.clone()),
    }
}
