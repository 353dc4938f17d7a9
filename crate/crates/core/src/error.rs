use alloc::string::String;
use core::fmt;

use crate::estimators::Estimator;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Image dimensions are zero or do not match the value count.
    InvalidDimensions { width: usize, height: usize, len: usize },
    /// A gray value is outside `[0, 1]` or not finite.
    GrayOutOfRange { index: usize, value: f64 },
    /// A pattern intensity is negative or not finite.
    InvalidIntensity { index: usize, value: f64 },
    InvalidDistribution(String),
    InvalidTransform(String),
    /// A transform was evaluated outside its domain, e.g. `ln(0)`.
    TransformDomain { pixel: usize, value: f64, transform: String },
    /// Two arrays that must line up do not.
    LengthMismatch { expected: usize, found: usize },
    /// Not enough frames or samples for the requested quantity.
    TooFewSamples { needed: usize, found: usize },
    /// A ratio estimator hit a zero denominator.
    DegenerateRun { estimator: Estimator, reason: &'static str },
    /// A theoretical constant is undefined for this image and law.
    DegenerateConstant(&'static str),
    /// The assembled ΔG² variance came out negative.
    NegativeVariance { sigma2: f64, terms: String },
    /// A gray region has fewer than two pixels.
    RegionTooSmall { level: f64, pixels: usize },
    /// Fewer than two distinct gray levels for a line fit.
    TooFewLevels(usize),
    /// A frame source failed to produce frame `frame`.
    FrameRead { frame: usize, message: String },
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimensions { width, height, len } => write!(
                f,
                "invalid image dimensions {width}x{height} for {len} values"
            ),
            Error::GrayOutOfRange { index, value } => {
                write!(f, "gray value {value} at pixel {index} is outside [0, 1]")
            }
            Error::InvalidIntensity { index, value } => {
                write!(f, "pattern intensity {value} at pixel {index} is not a finite nonnegative number")
            }
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::InvalidTransform(msg) => write!(f, "invalid transform: {msg}"),
            Error::TransformDomain { pixel, value, transform } => write!(
                f,
                "transform {transform} is undefined at pixel {pixel} (value {value})"
            ),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::TooFewSamples { needed, found } => {
                write!(f, "need at least {needed} samples, found {found}")
            }
            Error::DegenerateRun { estimator, reason } => {
                write!(f, "{estimator} is undefined for this run: {reason}")
            }
            Error::DegenerateConstant(msg) => write!(f, "degenerate constant: {msg}"),
            Error::NegativeVariance { sigma2, terms } => {
                write!(f, "assembled variance {sigma2} is negative ({terms})")
            }
            Error::RegionTooSmall { level, pixels } => write!(
                f,
                "gray region {level} has {pixels} pixel(s); variance needs at least 2"
            ),
            Error::TooFewLevels(n) => write!(f, "line fit needs at least 2 gray levels, got {n}"),
            Error::FrameRead { frame, message } => write!(f, "failed to read frame {frame}: {message}"),
            Error::InvalidParameter(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for Error {}
