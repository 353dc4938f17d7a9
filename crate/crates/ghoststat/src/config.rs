//! Run configuration: flat `key = value` text or an equivalent JSON object.
//!
//! ```text
//! # comments start with '#'
//! image = card                  # or a PGM path, relative to the config file
//! card.width = 64
//! card.height = 64
//! card.levels = 0, 0.4, 0.7, 1.0
//! card.fractions = 0.81975, 0.05265, 0.08055, 0.04705   # optional, default equal
//! card.layout = stripes         # or nested-rects
//! distribution = uniform(0.1, 1.0)
//! transforms = identity, power(3), exp, log
//! estimators = DeltaG2, G2, g2, DGI
//! frames = 100000
//! gamma = 1
//! noise = none                  # or gaussian(mean, variance)
//! seed = 1
//! out = runs/paper-sim          # optional
//! save_patterns = false
//! ```
//!
//! The JSON form is one object with the same keys; list values may be
//! arrays. Unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ghoststat_core::{
    image::make_weighted_card, validate_pair, CardLayout, DistributionSpec, Estimator, GrayImage, NoiseModel,
    TransformSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgm;

pub const PRESETS: [&str; 2] = ["paper-sim", "paper-exp"];

const PAPER_SIM: &str = include_str!("../presets/paper-sim.conf");
const PAPER_EXP: &str = include_str!("../presets/paper-exp.conf");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ImageSource {
    Card { width: usize, height: usize, levels: Vec<f64>, fractions: Option<Vec<f64>>, layout: CardLayout },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub image: ImageSource,
    pub distribution: DistributionSpec,
    pub transforms: Vec<TransformSpec>,
    pub estimators: Vec<Estimator>,
    pub frames: usize,
    pub gamma: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub save_patterns: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            image: ImageSource::Card {
                width: 64,
                height: 64,
                levels: vec![0.0, 0.4, 0.7, 1.0],
                fractions: None,
                layout: CardLayout::Stripes,
            },
            distribution: DistributionSpec::Uniform { lo: 0.1, hi: 1.0 },
            transforms: vec![TransformSpec::Identity],
            estimators: vec![Estimator::DeltaG2],
            frames: 10_000,
            gamma: 1.0,
            noise: NoiseModel::None,
            seed: 1,
            out: None,
            save_patterns: false,
        }
    }
}

/// Splits on commas that are not inside parentheses.
pub fn split_list(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts.retain(|p| !p.is_empty());
    parts
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("{what} must be a number, got '{}'", v.trim()))
}

fn parse_floats(v: &str, what: &str) -> Result<Vec<f64>, String> {
    split_list(v).into_iter().map(|x| parse_num(x, what)).collect()
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got '{other}'")),
    }
}

fn fmt_list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Applies one `key = value` setting. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let value = value.trim();
        let card = |cfg: &mut RunConfig| -> Result<(), String> {
            if let ImageSource::File { .. } = cfg.image {
                return Err(format!("'{key}' only applies when image = card"));
            }
            Ok(())
        };
        match key {
            "image" => {
                self.image = if value == "card" {
                    match &self.image {
                        ImageSource::Card { .. } => self.image.clone(),
                        ImageSource::File { .. } => RunConfig::default().image,
                    }
                } else {
                    ImageSource::File { path: base.join(value) }
                }
            }
            "card.width" | "card.height" | "card.levels" | "card.fractions" | "card.layout" => {
                card(self)?;
                let ImageSource::Card { width, height, levels, fractions, layout } = &mut self.image else {
                    unreachable!()
                };
                match key {
                    "card.width" => *width = parse_num(value, key)?,
                    "card.height" => *height = parse_num(value, key)?,
                    "card.levels" => *levels = parse_floats(value, key)?,
                    "card.fractions" => *fractions = if value.is_empty() { None } else { Some(parse_floats(value, key)?) },
                    _ => *layout = value.parse().map_err(|e: ghoststat_core::Error| e.to_string())?,
                }
            }
            "distribution" => self.distribution = value.parse().map_err(|e: ghoststat_core::Error| e.to_string())?,
            "transforms" => {
                self.transforms = split_list(value)
                    .into_iter()
                    .map(|t| t.parse().map_err(|e: ghoststat_core::Error| e.to_string()))
                    .collect::<Result<_, _>>()?
            }
            "estimators" => {
                self.estimators = split_list(value)
                    .into_iter()
                    .map(|t| t.parse().map_err(|e: ghoststat_core::Error| e.to_string()))
                    .collect::<Result<_, _>>()?
            }
            "frames" | "T" => self.frames = parse_num(value, key)?,
            "gamma" => self.gamma = parse_num(value, key)?,
            "noise" => self.noise = value.parse().map_err(|e: ghoststat_core::Error| e.to_string())?,
            "seed" => self.seed = parse_num(value, key)?,
            "out" => self.out = if value.is_empty() { None } else { Some(base.join(value)) },
            "save_patterns" => self.save_patterns = parse_bool(value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Checks the invariants; the error names the offending key.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.frames < 2 {
            return Err(("frames", format!("need at least 2 frames, got {}", self.frames)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(("gamma", format!("gamma must be positive, got {}", self.gamma)));
        }
        self.distribution.validate().map_err(|e| ("distribution", e.to_string()))?;
        self.noise.validate().map_err(|e| ("noise", e.to_string()))?;
        if self.transforms.is_empty() {
            return Err(("transforms", "no transforms given".into()));
        }
        for t in &self.transforms {
            validate_pair(&self.distribution, t).map_err(|e| ("transforms", e.to_string()))?;
        }
        if self.estimators.is_empty() {
            return Err(("estimators", "no estimators given".into()));
        }
        match &self.image {
            ImageSource::File { path } if !path.is_file() => {
                return Err(("image", format!("image file {} does not exist", path.display())))
            }
            ImageSource::Card { levels, fractions: Some(f), .. } if f.len() != levels.len() => {
                return Err(("card.fractions", format!("{} fractions for {} levels", f.len(), levels.len())))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn build_image(&self) -> Result<GrayImage> {
        match &self.image {
            ImageSource::Card { width, height, levels, fractions, layout } => {
                let equal = vec![1.0 / levels.len().max(1) as f64; levels.len()];
                Ok(make_weighted_card(*width, *height, levels, fractions.as_deref().unwrap_or(&equal), *layout)?)
            }
            ImageSource::File { path } => pgm::read_pgm(path),
        }
    }

    /// Gray-merge tolerance: exact levels for cards, none for 8-bit input.
    pub fn region_tolerance(&self) -> f64 {
        match self.image {
            ImageSource::Card { .. } => 1e-9,
            ImageSource::File { .. } => 0.0,
        }
    }

    /// The config in text form; parsing it back gives an equal config.
    pub fn to_text(&self) -> String {
        let mut lines = Vec::new();
        match &self.image {
            ImageSource::Card { width, height, levels, fractions, layout } => {
                lines.push("image = card".to_string());
                lines.push(format!("card.width = {width}"));
                lines.push(format!("card.height = {height}"));
                lines.push(format!("card.levels = {}", fmt_list(levels)));
                if let Some(f) = fractions {
                    lines.push(format!("card.fractions = {}", fmt_list(f)));
                }
                lines.push(format!("card.layout = {layout}"));
            }
            ImageSource::File { path } => lines.push(format!("image = {}", path.display())),
        }
        lines.push(format!("distribution = {}", self.distribution));
        lines.push(format!("transforms = {}", fmt_list(&self.transforms)));
        lines.push(format!("estimators = {}", fmt_list(&self.estimators)));
        lines.push(format!("frames = {}", self.frames));
        lines.push(format!("gamma = {:?}", self.gamma));
        lines.push(format!("noise = {}", self.noise));
        lines.push(format!("seed = {}", self.seed));
        if let Some(out) = &self.out {
            lines.push(format!("out = {}", out.display()));
        }
        lines.push(format!("save_patterns = {}", self.save_patterns));
        lines.join("\n") + "\n"
    }
}

/// Applies settings on top of `base`, recording the line of each key so
/// validation errors can point at it.
fn apply(
    mut cfg: RunConfig,
    settings: Vec<(usize, String, String)>,
    origin: &str,
    base_dir: &Path,
) -> Result<RunConfig> {
    let mut lines: BTreeMap<String, usize> = BTreeMap::new();
    for (line, key, value) in settings {
        if let Some(first) = lines.get(&key) {
            return Err(Error::Config { origin: origin.into(), line, message: format!("'{key}' already set on line {first}") });
        }
        cfg.set(&key, &value, base_dir).map_err(|message| Error::Config { origin: origin.into(), line, message })?;
        lines.insert(key, line);
    }
    cfg.validate().map_err(|(key, message)| {
        let line = lines.get(key).copied().unwrap_or(0);
        Error::Config { origin: origin.into(), line, message }
    })?;
    Ok(cfg)
}

fn text_settings(text: &str, origin: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            origin: origin.into(),
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        out.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Line on which `"key"` first appears in JSON text (1 if not found).
fn json_key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

fn json_settings(text: &str, origin: &str) -> Result<Vec<(usize, String, String)>> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Config { origin: origin.into(), line: e.line(), message: format!("invalid JSON: {e}") })?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::Config { origin: origin.into(), line: 1, message: "expected a JSON object".into() });
    };
    let scalar = |v: &serde_json::Value| -> Option<String> {
        match v {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            serde_json::Value::Bool(b) => Some(b.to_string()),
            serde_json::Value::Null => Some(String::new()),
            _ => None,
        }
    };
    let mut out = Vec::new();
    for (key, v) in &map {
        let line = json_key_line(text, key);
        let text_value = match v {
            serde_json::Value::Array(items) => items.iter().map(scalar).collect::<Option<Vec<_>>>().map(|xs| xs.join(", ")),
            other => scalar(other),
        }
        .ok_or_else(|| Error::Config { origin: origin.into(), line, message: format!("'{key}' must be a scalar or a list") })?;
        out.push((line, key.clone(), text_value));
    }
    out.sort_by_key(|s| s.0);
    Ok(out)
}

/// Parses a config on top of the defaults. JSON is detected by a leading `{`.
pub fn parse_config(text: &str, origin: &str, base_dir: &Path) -> Result<RunConfig> {
    parse_config_over(RunConfig::default(), text, origin, base_dir)
}

/// Parses a config on top of `base` (e.g. a preset).
pub fn parse_config_over(base: RunConfig, text: &str, origin: &str, base_dir: &Path) -> Result<RunConfig> {
    let settings = if text.trim_start().starts_with('{') {
        json_settings(text, origin)?
    } else {
        text_settings(text, origin)?
    };
    apply(base, settings, origin, base_dir)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    load_config_over(RunConfig::default(), path)
}

pub fn load_config_over(base: RunConfig, path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_config_over(base, &text, &path.display().to_string(), dir)
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let text = match name {
        "paper-sim" => PAPER_SIM,
        "paper-exp" => PAPER_EXP,
        other => return Err(Error::Usage(format!("unknown preset '{other}' (available: {})", PRESETS.join(", ")))),
    };
    parse_config(text, &format!("preset {name}"), Path::new("."))
}

/// Applies `key=value` overrides given on the command line.
pub fn apply_overrides(mut cfg: RunConfig, overrides: &[String]) -> Result<RunConfig> {
    for (i, o) in overrides.iter().enumerate() {
        let origin = "--set".to_string();
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config { origin: origin.clone(), line: i + 1, message: format!("expected key=value, got '{o}'") })?;
        cfg.set(k.trim(), v, Path::new(".")).map_err(|message| Error::Config { origin, line: i + 1, message })?;
    }
    cfg.validate().map_err(|(key, message)| Error::Config { origin: "command line".into(), line: 0, message: format!("{key}: {message}") })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paren_aware_lists() {
        assert_eq!(split_list("identity, power(3), exp"), vec!["identity", "power(3)", "exp"]);
        assert_eq!(split_list("discrete(0, 1; 0.5, 0.5)"), vec!["discrete(0, 1; 0.5, 0.5)"]);
    }

    #[test]
    fn presets_parse_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            let again = parse_config(&cfg.to_text(), "round trip", Path::new(".")).unwrap();
            assert_eq!(again, cfg, "{name}");
        }
        let sim = preset("paper-sim").unwrap();
        assert_eq!(sim.frames, 100_000);
        assert_eq!(sim.transforms.len(), 4);
        let exp = preset("paper-exp").unwrap();
        assert_eq!(exp.frames, 11_940);
        assert_eq!(exp.noise, NoiseModel::gaussian(2.0985e6, 1.2260e10).unwrap());
        assert!(!exp.transforms.contains(&TransformSpec::Log));
    }

    #[test]
    fn errors_point_at_lines() {
        let text = "# header\nframes = 100\n\ngamma = fast\n";
        let err = parse_config(text, "a.conf", Path::new(".")).unwrap_err().to_string();
        assert!(err.starts_with("a.conf:4:"), "{err}");

        let err = parse_config("frames = 1\n", "b.conf", Path::new(".")).unwrap_err().to_string();
        assert!(err.starts_with("b.conf:1:"), "{err}");

        let text = "distribution = bernoulli(0.5, 0, 1)\ntransforms = identity, log\n";
        let err = parse_config(text, "c.conf", Path::new(".")).unwrap_err().to_string();
        assert!(err.starts_with("c.conf:2:") && err.contains("ln(0)"), "{err}");

        let err = parse_config("colour = red\n", "d.conf", Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("d.conf:1:") && err.contains("unknown key"), "{err}");

        let err = parse_config("frames = 10\nframes = 20\n", "e.conf", Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("e.conf:2:") && err.contains("line 1"), "{err}");
    }

    #[test]
    fn json_form_matches_text_form() {
        let json = r#"{
  "distribution": "uniform(0.1, 1.0)",
  "transforms": ["identity", "power(3)"],
  "frames": 500,
  "noise": "gaussian(1, 2)",
  "save_patterns": true
}"#;
        let a = parse_config(json, "j", Path::new(".")).unwrap();
        let text = "distribution = uniform(0.1, 1.0)\ntransforms = identity, power(3)\nframes = 500\nnoise = gaussian(1, 2)\nsave_patterns = true\n";
        assert_eq!(a, parse_config(text, "t", Path::new(".")).unwrap());

        let err = parse_config("{\n  \"frames\": 500,\n  \"gamma\": -1\n}", "k.json", Path::new(".")).unwrap_err().to_string();
        assert!(err.starts_with("k.json:3:"), "{err}");
        let err = parse_config("{\n  \"frames\": 500,\n  oops\n}", "l.json", Path::new(".")).unwrap_err().to_string();
        assert!(err.starts_with("l.json:3:"), "{err}");
    }

    #[test]
    fn missing_image_file_is_reported() {
        let err = parse_config("image = /nonexistent/x.pgm\n", "m", Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("m:1:") && err.contains("does not exist"), "{err}");
    }

    #[test]
    fn overrides_apply_and_validate() {
        let cfg = apply_overrides(preset("paper-sim").unwrap(), &["frames=2".into(), "seed = 9".into()]).unwrap();
        assert_eq!((cfg.frames, cfg.seed), (2, 9));
        assert!(apply_overrides(cfg, &["frames=1".into()]).is_err());
    }
}
