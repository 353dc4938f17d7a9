//! Plain and raw PGM (P2/P5), 8-bit.
//!
//! Gray values map linearly to `[0, 1]` by dividing by maxval; writing uses
//! maxval 255 and rounds, so `k/255` images round-trip bit-exactly.

use std::fs;
use std::path::Path;

use ghoststat_core::GrayImage;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PgmFormat {
    /// ASCII samples.
    Plain,
    #[default]
    Raw,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, String> {
        let tok = self.token().ok_or_else(|| format!("missing {what}"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad {what} {:?}", String::from_utf8_lossy(tok)))
    }
}

/// Parses a P2 or P5 image.
pub fn decode(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut cur = Cursor { bytes, pos: 0 };
    let format = match cur.token() {
        Some(b"P2") => PgmFormat::Plain,
        Some(b"P5") => PgmFormat::Raw,
        Some(other) => return Err(format!("not a PGM file (magic {:?})", String::from_utf8_lossy(other))),
        None => return Err("empty file".into()),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} unsupported (8-bit only)"));
    }
    let len = width.checked_mul(height).filter(|&n| n > 0).ok_or("zero or overflowing dimensions")?;
    let scale = maxval as f64;
    let mut values = Vec::with_capacity(len);
    match format {
        PgmFormat::Raw => {
            // exactly one whitespace byte separates the header from the raster
            let start = cur.pos + 1;
            let raster = bytes.get(start..start + len).ok_or_else(|| format!("raster truncated: need {len} bytes"))?;
            for &b in raster {
                if b as usize > maxval {
                    return Err(format!("sample {b} exceeds maxval {maxval}"));
                }
                values.push(b as f64 / scale);
            }
        }
        PgmFormat::Plain => {
            for i in 0..len {
                let v = cur.number("sample").map_err(|e| format!("{e} at sample {i}"))?;
                if v > maxval {
                    return Err(format!("sample {v} exceeds maxval {maxval}"));
                }
                values.push(v as f64 / scale);
            }
        }
    }
    GrayImage::new(width, height, values).map_err(|e| e.to_string())
}

/// `round(255·v)` for `v` clamped to `[0, 1]`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes 8-bit samples with maxval 255. Comment lines must not contain newlines.
pub fn encode_bytes(width: usize, height: usize, samples: &[u8], format: PgmFormat, comments: &[String]) -> Vec<u8> {
    assert_eq!(samples.len(), width * height);
    let magic = match format {
        PgmFormat::Plain => "P2",
        PgmFormat::Raw => "P5",
    };
    let mut out = format!("{magic}\n");
    for c in comments {
        out.push_str("# ");
        out.push_str(&c.replace('\n', " "));
        out.push('\n');
    }
    out.push_str(&format!("{width} {height}\n255\n"));
    let mut out = out.into_bytes();
    match format {
        PgmFormat::Raw => out.extend_from_slice(samples),
        PgmFormat::Plain => {
            for row in samples.chunks(width) {
                let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn encode(image: &GrayImage, format: PgmFormat, comments: &[String]) -> Vec<u8> {
    let samples: Vec<u8> = image.values().iter().map(|&v| quantize(v)).collect();
    encode_bytes(image.width(), image.height(), &samples, format, comments)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write_pgm(path: &Path, image: &GrayImage, format: PgmFormat, comments: &[String]) -> Result<()> {
    fs::write(path, encode(image, format, comments)).map_err(Error::io(path))
}

/// Min-max maps `values` onto `0..=255`; a constant input maps to 0.
pub fn normalize_min_max(values: &[f64]) -> (Vec<u8>, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let samples = values
        .iter()
        .map(|&v| if span > 0.0 { quantize((v - min) / span) } else { 0 })
        .collect();
    (samples, min, max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_bit_exact() {
        let samples: Vec<u8> = (0..=255).collect();
        let bytes = encode_bytes(16, 16, &samples, PgmFormat::Raw, &["hello".into()]);
        let img = decode(&bytes).unwrap();
        assert_eq!(encode(&img, PgmFormat::Raw, &["hello".into()]), bytes);
        assert_eq!(img.values()[51], 0.2);
    }

    #[test]
    fn plain_with_comments() {
        let text = b"P2\n# a comment\n3 1 # trailing\n# more\n255\n0 128\n255\n";
        let img = decode(text).unwrap();
        assert_eq!(img.values(), &[0.0, 128.0 / 255.0, 1.0]);
        let again = decode(&encode(&img, PgmFormat::Plain, &[])).unwrap();
        assert_eq!(again, img);
    }

    #[test]
    fn smaller_maxval_scales() {
        let img = decode(b"P2 2 1 15 0 15").unwrap();
        assert_eq!(img.values(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(decode(b"P6 1 1 255 \x00\x00\x00").is_err());
        assert!(decode(b"P5 2 2 255 \x00").unwrap_err().contains("truncated"));
        assert!(decode(b"P2 1 1 1000 5").is_err());
        assert!(decode(b"P2 0 1 255").is_err());
        assert!(decode(b"P2 2 1 255 3").unwrap_err().contains("sample"));
    }

    #[test]
    fn min_max_normalization() {
        let (s, lo, hi) = normalize_min_max(&[-1.0, 0.0, 1.0]);
        assert_eq!((s, lo, hi), (vec![0, 128, 255], -1.0, 1.0));
        assert_eq!(normalize_min_max(&[2.0, 2.0]).0, vec![0, 0]);
    }
}
