//! Pixel laws and pixel-value transforms.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::image::PatternFrame;
use crate::rng::{CounterStream, SeedRecipe};

/// The i.i.d. law of every pattern pixel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub enum DistributionSpec {
    /// Continuous uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// `value1` with probability `p`, otherwise `value0`.
    Bernoulli { p: f64, value0: f64, value1: f64 },
    /// Finite law: `values[i]` with probability `probs[i]`.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl DistributionSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = DistributionSpec::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn bernoulli(p: f64, value0: f64, value1: f64) -> Result<Self> {
        let d = DistributionSpec::Bernoulli { p, value0, value1 };
        d.validate()?;
        Ok(d)
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let d = DistributionSpec::Discrete { values, probs };
        d.validate()?;
        Ok(d)
    }

    /// Single atom at `value`.
    pub fn point_mass(value: f64) -> Result<Self> {
        Self::discrete(alloc::vec![value], alloc::vec![1.0])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            DistributionSpec::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo < hi) {
                    return bad(format!("uniform({lo}, {hi}) needs 0 <= lo < hi"));
                }
            }
            DistributionSpec::Bernoulli { p, value0, value1 } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return bad(format!("bernoulli p = {p} must lie in (0, 1)"));
                }
                if !(value0.is_finite() && value1.is_finite() && *value0 >= 0.0 && *value1 >= 0.0) {
                    return bad("bernoulli values must be finite and >= 0".into());
                }
                if value0 == value1 {
                    return bad("bernoulli values must differ".into());
                }
            }
            DistributionSpec::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("discrete law needs matching, nonempty values and probs".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("discrete values must be finite and >= 0".into());
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return bad("discrete probabilities must be >= 0".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("discrete probabilities sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    /// Smallest value the law can produce.
    pub fn support_min(&self) -> f64 {
        match self {
            DistributionSpec::Uniform { lo, .. } => *lo,
            DistributionSpec::Bernoulli { value0, value1, .. } => value0.min(*value1),
            DistributionSpec::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .map(|(v, _)| *v)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// `(value, probability)` pairs for laws with finite support.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            DistributionSpec::Uniform { .. } => None,
            DistributionSpec::Bernoulli { p, value0, value1 } => {
                Some(alloc::vec![(*value0, 1.0 - p), (*value1, *p)])
            }
            DistributionSpec::Discrete { values, probs } => {
                Some(values.iter().copied().zip(probs.iter().copied()).collect())
            }
        }
    }

    /// Precomputes what the per-pixel draw needs.
    pub fn sampler(&self) -> PixelSampler {
        match self {
            DistributionSpec::Uniform { lo, hi } => PixelSampler::Uniform { lo: *lo, width: hi - lo },
            DistributionSpec::Bernoulli { p, value0, value1 } => {
                PixelSampler::Bernoulli { p: *p, value0: *value0, value1: *value1 }
            }
            DistributionSpec::Discrete { values, probs } => {
                let mut acc = 0.0;
                let cumulative = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                PixelSampler::Discrete { values: values.clone(), cumulative }
            }
        }
    }
}

/// Maps a uniform draw `u ∈ [0, 1)` to a pixel intensity.
#[derive(Debug, Clone)]
pub enum PixelSampler {
    Uniform { lo: f64, width: f64 },
    Bernoulli { p: f64, value0: f64, value1: f64 },
    Discrete { values: Vec<f64>, cumulative: Vec<f64> },
}

impl PixelSampler {
    #[inline(always)]
    pub fn map(&self, u: f64) -> f64 {
        match self {
            PixelSampler::Uniform { lo, width } => lo + width * u,
            PixelSampler::Bernoulli { p, value0, value1 } => {
                if u < *p {
                    *value1
                } else {
                    *value0
                }
            }
            PixelSampler::Discrete { values, cumulative } => {
                let i = cumulative.partition_point(|&c| c <= u);
                values[i.min(values.len() - 1)]
            }
        }
    }

    /// Writes frame `frame` of an `out.len()`-pixel stack.
    #[inline]
    pub fn fill(&self, stream: &CounterStream, frame: usize, out: &mut [f64]) {
        let base = SeedRecipe::pattern_counter(frame, out.len(), 0);
        match self {
            PixelSampler::Uniform { lo, width } => {
                for (m, v) in out.iter_mut().enumerate() {
                    *v = lo + width * stream.uniform(base.wrapping_add(m as u64));
                }
            }
            _ => {
                for (m, v) in out.iter_mut().enumerate() {
                    *v = self.map(stream.uniform(base.wrapping_add(m as u64)));
                }
            }
        }
    }
}

/// Draws pattern `frame_index` of an `pixels`-pixel stack.
pub fn sample_pattern(
    dist: &DistributionSpec,
    pixels: usize,
    frame_index: usize,
    recipe: &SeedRecipe,
) -> Result<PatternFrame> {
    dist.validate()?;
    let mut values = alloc::vec![0.0; pixels];
    dist.sampler().fill(&recipe.pattern_stream(), frame_index, &mut values);
    PatternFrame::new(values)
}

/// The function `f` in `F = f(I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub enum TransformSpec {
    Identity,
    /// `x^k`, `k > 0`.
    Power(f64),
    Exp,
    /// Natural logarithm; needs a strictly positive support.
    Log,
}

impl TransformSpec {
    pub fn validate(&self) -> Result<()> {
        if let TransformSpec::Power(k) = self {
            if !(k.is_finite() && *k > 0.0) {
                return Err(Error::InvalidTransform(format!("power exponent {k} must be > 0")));
            }
        }
        Ok(())
    }

    /// Integer exponent, when the transform is `x^k` with integral `k`.
    pub fn integer_power(&self) -> Option<u32> {
        match self {
            TransformSpec::Power(k) if libm::trunc(*k) == *k && *k >= 1.0 && *k <= 64.0 => Some(*k as u32),
            _ => None,
        }
    }

    /// `f(x)`; may return NaN or -inf outside the domain.
    #[inline(always)]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TransformSpec::Identity => x,
            TransformSpec::Power(k) => match self.integer_power() {
                Some(n) => int_pow(x, n),
                None => libm::pow(x, *k),
            },
            TransformSpec::Exp => libm::exp(x),
            TransformSpec::Log => libm::log(x),
        }
    }

    /// Evaluates `f` in place over a frame buffer.
    #[inline]
    pub fn eval_into(&self, input: &[f64], out: &mut [f64]) {
        match self {
            TransformSpec::Identity => out.copy_from_slice(input),
            TransformSpec::Power(_) if self.integer_power() == Some(3) => {
                for (o, &x) in out.iter_mut().zip(input) {
                    *o = x * x * x;
                }
            }
            _ => {
                for (o, &x) in out.iter_mut().zip(input) {
                    *o = self.eval(x);
                }
            }
        }
    }

    /// Short name usable in file names, e.g. `power3`.
    pub fn slug(&self) -> String {
        match self {
            TransformSpec::Identity => "identity".into(),
            TransformSpec::Power(k) => format!("power{k}").replace('.', "p"),
            TransformSpec::Exp => "exp".into(),
            TransformSpec::Log => "log".into(),
        }
    }
}

#[inline(always)]
fn int_pow(x: f64, n: u32) -> f64 {
    match n {
        1 => x,
        2 => x * x,
        3 => x * x * x,
        _ => {
            let (mut base, mut e, mut acc) = (x, n, 1.0);
            while e > 0 {
                if e & 1 == 1 {
                    acc *= base;
                }
                base *= base;
                e >>= 1;
            }
            acc
        }
    }
}

/// Checks that `transform` is defined on the whole support of `dist`.
pub fn validate_pair(dist: &DistributionSpec, transform: &TransformSpec) -> Result<()> {
    dist.validate()?;
    transform.validate()?;
    let min = dist.support_min();
    match transform {
        TransformSpec::Log if min <= 0.0 => Err(Error::InvalidTransform(format!(
            "log is undefined on {dist}: the patterns contain {min} and ln(0) does not exist"
        ))),
        TransformSpec::Power(k) if transform.integer_power().is_none() && min <= 0.0 => {
            Err(Error::InvalidTransform(format!(
                "non-integer power({k}) needs a strictly positive support; {dist} reaches {min}"
            )))
        }
        _ => Ok(()),
    }
}

/// Applies `F = f(I)` to every pixel of a frame.
pub fn apply_transform(frame: &PatternFrame, transform: &TransformSpec) -> Result<PatternFrame> {
    transform.validate()?;
    let mut out = alloc::vec![0.0; frame.len()];
    transform.eval_into(frame.values(), &mut out);
    if let Some((pixel, _)) = out.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::TransformDomain {
            pixel,
            value: frame.values()[pixel],
            transform: transform.to_string(),
        });
    }
    Ok(PatternFrame::from_transformed(out))
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Uniform { lo, hi } => write!(f, "uniform({lo:?}, {hi:?})"),
            DistributionSpec::Bernoulli { p, value0, value1 } => {
                write!(f, "bernoulli({p:?}, {value0:?}, {value1:?})")
            }
            DistributionSpec::Discrete { values, probs } => {
                f.write_str("discrete(")?;
                write_list(f, values)?;
                f.write_str("; ")?;
                write_list(f, probs)?;
                f.write_str(")")
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, xs: &[f64]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{x:?}")?;
    }
    Ok(())
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformSpec::Identity => f.write_str("identity"),
            TransformSpec::Power(k) => write!(f, "power({k:?})"),
            TransformSpec::Exp => f.write_str("exp"),
            TransformSpec::Log => f.write_str("log"),
        }
    }
}

/// Splits `name(args)` into the name and the raw argument text.
pub(crate) fn split_call(s: &str) -> (&str, Option<&str>) {
    let s = s.trim();
    match (s.find('('), s.ends_with(')')) {
        (Some(open), true) => (s[..open].trim(), Some(&s[open + 1..s.len() - 1])),
        _ => (s, None),
    }
}

pub(crate) fn parse_numbers(args: &str) -> Result<Vec<f64>> {
    args.split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| {
            a.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("not a number: '{a}'")))
        })
        .collect()
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Parses `uniform(lo, hi)`, `bernoulli(p, v0, v1)` or
    /// `discrete(v1, v2, ...; p1, p2, ...)`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s);
        let args = args.ok_or_else(|| Error::InvalidDistribution(format!("expected name(args), got '{s}'")))?;
        match name.to_ascii_lowercase().as_str() {
            "uniform" => match parse_numbers(args)?.as_slice() {
                [lo, hi] => Self::uniform(*lo, *hi),
                _ => Err(Error::InvalidDistribution("uniform takes (lo, hi)".into())),
            },
            "bernoulli" => match parse_numbers(args)?.as_slice() {
                [p] => Self::bernoulli(*p, 0.0, 1.0),
                [p, v0, v1] => Self::bernoulli(*p, *v0, *v1),
                _ => Err(Error::InvalidDistribution("bernoulli takes (p, value0, value1)".into())),
            },
            "discrete" => {
                let (values, probs) = args
                    .split_once(';')
                    .ok_or_else(|| Error::InvalidDistribution("discrete takes (values; probs)".into()))?;
                Self::discrete(parse_numbers(values)?, parse_numbers(probs)?)
            }
            other => Err(Error::InvalidDistribution(format!("unknown distribution '{other}'"))),
        }
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s);
        let t = match (name.to_ascii_lowercase().as_str(), args) {
            ("identity" | "id" | "i", None) => TransformSpec::Identity,
            ("exp", None) => TransformSpec::Exp,
            ("log" | "ln", None) => TransformSpec::Log,
            ("power" | "pow", Some(a)) => match parse_numbers(a)?.as_slice() {
                [k] => TransformSpec::Power(*k),
                _ => return Err(Error::InvalidTransform("power takes one exponent".into())),
            },
            _ => return Err(Error::InvalidTransform(format!("unknown transform '{s}'"))),
        };
        t.validate()?;
        Ok(t)
    }
}

impl TryFrom<String> for DistributionSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DistributionSpec> for String {
    fn from(d: DistributionSpec) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for TransformSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TransformSpec> for String {
    fn from(t: TransformSpec) -> String {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_frame_in_range() {
        let d = DistributionSpec::uniform(0.1, 1.0).unwrap();
        let r = SeedRecipe::new(3);
        for t in 0..5 {
            let f = sample_pattern(&d, 4096, t, &r).unwrap();
            assert!(f.values().iter().all(|v| (0.1..=1.0).contains(v)));
        }
    }

    #[test]
    fn bernoulli_frame_is_binary_and_balanced() {
        let d = DistributionSpec::bernoulli(0.5, 0.0, 1.0).unwrap();
        let f = sample_pattern(&d, 200_000, 0, &SeedRecipe::new(11)).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0 || v == 1.0));
        let ones = f.values().iter().filter(|&&v| v == 1.0).count() as f64 / 200_000.0;
        // 5 standard errors of a fair coin at n = 2e5
        assert!((ones - 0.5).abs() < 5.0 * (0.25f64 / 200_000.0).sqrt());
    }

    #[test]
    fn point_mass_frame_is_constant() {
        let d = DistributionSpec::point_mass(0.3).unwrap();
        let f = sample_pattern(&d, 100, 9, &SeedRecipe::new(1)).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn discrete_sampler_respects_zero_probability_atoms() {
        let d = DistributionSpec::discrete(vec![0.0, 2.0, 5.0], vec![0.5, 0.0, 0.5]).unwrap();
        let f = sample_pattern(&d, 10_000, 0, &SeedRecipe::new(5)).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0 || v == 5.0));
        assert_eq!(d.support_min(), 0.0);
    }

    #[test]
    fn invalid_distributions() {
        assert!(DistributionSpec::uniform(1.0, 0.5).is_err());
        assert!(DistributionSpec::uniform(-0.1, 0.5).is_err());
        assert!(DistributionSpec::bernoulli(1.0, 0.0, 1.0).is_err());
        assert!(DistributionSpec::bernoulli(0.5, 1.0, 1.0).is_err());
        assert!(DistributionSpec::discrete(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn transforms_on_values() {
        let f = PatternFrame::new(vec![0.5, 0.0, 2.0]).unwrap();
        assert_eq!(apply_transform(&f, &TransformSpec::Identity).unwrap(), f);
        let cube = apply_transform(&f, &TransformSpec::Power(3.0)).unwrap();
        assert_eq!(cube.values()[0], 0.125);
        let e = apply_transform(&f, &TransformSpec::Exp).unwrap();
        assert_eq!(e.values()[1], 1.0);
    }

    #[test]
    fn log_of_zero_names_pixel() {
        let f = PatternFrame::new(vec![0.5, 1.0, 0.0]).unwrap();
        match apply_transform(&f, &TransformSpec::Log) {
            Err(Error::TransformDomain { pixel, .. }) => assert_eq!(pixel, 2),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn pairing_rules() {
        let bern = DistributionSpec::bernoulli(0.5, 0.0, 1.0).unwrap();
        let unif = DistributionSpec::uniform(0.1, 1.0).unwrap();
        assert!(validate_pair(&bern, &TransformSpec::Log).is_err());
        assert!(validate_pair(&unif, &TransformSpec::Log).is_ok());
        assert!(validate_pair(&bern, &TransformSpec::Power(3.0)).is_ok());
        assert!(validate_pair(&bern, &TransformSpec::Power(0.5)).is_err());
        assert!(validate_pair(&unif, &TransformSpec::Power(0.5)).is_ok());
        assert!(validate_pair(&unif, &TransformSpec::Power(0.0)).is_err());
    }

    #[test]
    fn parse_and_display() {
        let cases = ["uniform(0.1, 1.0)", "bernoulli(0.5, 0.0, 1.0)", "discrete(1.0, 2.0; 0.25, 0.75)"];
        for c in cases {
            let d: DistributionSpec = c.parse().unwrap();
            assert_eq!(d.to_string(), c);
        }
        assert_eq!("power(3)".parse::<TransformSpec>().unwrap(), TransformSpec::Power(3.0));
        assert_eq!(" ln ".parse::<TransformSpec>().unwrap(), TransformSpec::Log);
        assert!("cosh".parse::<TransformSpec>().is_err());
        assert_eq!(TransformSpec::Power(3.0).slug(), "power3");
        assert_eq!(TransformSpec::Power(0.5).slug(), "power0p5");
    }
}
