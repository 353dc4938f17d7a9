//! Pattern-stack files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                       |
//! |--------|------|-----------------------------|
//! | 0      | 4    | magic `GIPS`                |
//! | 4      | 2    | version (1)                 |
//! | 6      | 4    | pixels per frame `M`        |
//! | 10     | 4    | frames `T`                  |
//! | 14     | 2    | dtype (1 = f64)             |
//! | 16     | 8·T·M| values, frame-major         |
//!
//! Reconstructions and exact object images use the same layout with `T = 1`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ghoststat_core::{FrameSource, PatternStack};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"GIPS";
pub const VERSION: u16 = 1;
pub const DTYPE_F64: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackHeader {
    pub pixels: u32,
    pub frames: u32,
}

impl StackHeader {
    pub fn new(pixels: usize, frames: usize) -> Result<Self> {
        let fit = |n: usize, what: &str| {
            u32::try_from(n).map_err(|_| Error::Usage(format!("{what} = {n} does not fit the stack header")))
        };
        Ok(Self { pixels: fit(pixels, "pixels")?, frames: fit(frames, "frames")? })
    }

    pub fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&VERSION.to_le_bytes());
        b[6..10].copy_from_slice(&self.pixels.to_le_bytes());
        b[10..14].copy_from_slice(&self.frames.to_le_bytes());
        b[14..16].copy_from_slice(&DTYPE_F64.to_le_bytes());
        b
    }

    pub fn parse(b: &[u8; HEADER_LEN]) -> Result<Self, String> {
        if b[0..4] != MAGIC {
            return Err("not a pattern stack (bad magic)".into());
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(format!("unsupported stack version {version}"));
        }
        let dtype = u16::from_le_bytes([b[14], b[15]]);
        if dtype != DTYPE_F64 {
            return Err(format!("unsupported dtype tag {dtype} (only 1 = f64)"));
        }
        let pixels = u32::from_le_bytes(b[6..10].try_into().unwrap());
        let frames = u32::from_le_bytes(b[10..14].try_into().unwrap());
        if pixels == 0 {
            return Err("stack has zero pixels per frame".into());
        }
        Ok(Self { pixels, frames })
    }

    pub fn data_len(&self) -> u64 {
        8 * self.pixels as u64 * self.frames as u64
    }
}

/// Streams frames into a stack file.
pub struct StackWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: StackHeader,
    written: u64,
}

impl StackWriter {
    pub fn create(path: &Path, pixels: usize, frames: usize) -> Result<Self> {
        let header = StackHeader::new(pixels, frames)?;
        let file = File::create(path).map_err(Error::io(path))?;
        let mut out = BufWriter::new(file);
        out.write_all(&header.to_bytes()).map_err(Error::io(path))?;
        Ok(Self { path: path.to_owned(), out, header, written: 0 })
    }

    pub fn write_frame(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.header.pixels as usize {
            return Err(Error::format(&self.path, format!("frame of {} values, expected {}", values.len(), self.header.pixels)));
        }
        for v in values {
            self.out.write_all(&v.to_le_bytes()).map_err(Error::io(&self.path))?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.header.frames as u64 {
            return Err(Error::format(
                &self.path,
                format!("wrote {} frames, header declares {}", self.written, self.header.frames),
            ));
        }
        self.out.flush().map_err(Error::io(&self.path))
    }
}

pub fn write_stack(path: &Path, pixels: usize, values: &[f64]) -> Result<()> {
    if pixels == 0 || !values.len().is_multiple_of(pixels) {
        return Err(Error::Usage(format!("{} values do not form frames of {pixels}", values.len())));
    }
    let mut w = StackWriter::create(path, pixels, values.len() / pixels)?;
    for frame in values.chunks(pixels) {
        w.write_frame(frame)?;
    }
    w.finish()
}

fn read_header(file: &mut File, path: &Path) -> Result<StackHeader> {
    let mut hb = [0u8; HEADER_LEN];
    file.read_exact(&mut hb).map_err(|_| Error::format(path, "file shorter than the 16-byte header"))?;
    let header = StackHeader::parse(&hb).map_err(|m| Error::format(path, m))?;
    let len = file.metadata().map_err(Error::io(path))?.len();
    let want = HEADER_LEN as u64 + header.data_len();
    if len != want {
        return Err(Error::format(path, format!("size {len} bytes, header implies {want}")));
    }
    Ok(header)
}

fn decode_f64s(bytes: &[u8], out: &mut [f64]) {
    for (v, b) in out.iter_mut().zip(bytes.chunks_exact(8)) {
        *v = f64::from_le_bytes(b.try_into().unwrap());
    }
}

/// Header and raw values of a stack, without the pattern checks; used for
/// reconstructions, which may be negative.
pub fn read_values(path: &Path) -> Result<(StackHeader, Vec<f64>)> {
    let mut file = File::open(path).map_err(Error::io(path))?;
    let header = read_header(&mut file, path)?;
    let mut bytes = Vec::with_capacity(header.data_len() as usize);
    file.read_to_end(&mut bytes).map_err(Error::io(path))?;
    let mut values = vec![0.0; bytes.len() / 8];
    decode_f64s(&bytes, &mut values);
    Ok((header, values))
}

/// Loads a whole pattern stack into memory.
pub fn read_stack(path: &Path) -> Result<PatternStack> {
    let (header, values) = read_values(path)?;
    PatternStack::new(header.pixels as usize, values).map_err(|e| Error::format(path, e.to_string()))
}

/// Frame source reading frames on demand with positioned reads, so any
/// number of workers can share one handle.
#[derive(Debug)]
pub struct FileFrames {
    path: PathBuf,
    file: File,
    header: StackHeader,
}

impl FileFrames {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = File::open(path).map_err(Error::io(path))?;
        let header = read_header(&mut file, path)?;
        Ok(Self { path: path.to_owned(), file, header })
    }

    pub fn header(&self) -> StackHeader {
        self.header
    }

    #[cfg(unix)]
    fn read_at(&self, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
        std::os::unix::fs::FileExt::read_exact_at(&self.file, buf, offset)
    }

    #[cfg(windows)]
    fn read_at(&self, mut buf: &mut [u8], mut offset: u64) -> std::io::Result<()> {
        use std::os::windows::fs::FileExt;
        while !buf.is_empty() {
            let n = self.file.seek_read(buf, offset)?;
            if n == 0 {
                return Err(std::io::ErrorKind::UnexpectedEof.into());
            }
            buf = &mut buf[n..];
            offset += n as u64;
        }
        Ok(())
    }
}

impl FrameSource for FileFrames {
    fn pixel_count(&self) -> usize {
        self.header.pixels as usize
    }

    fn frame_count(&self) -> usize {
        self.header.frames as usize
    }

    fn fill_frame(&self, t: usize, out: &mut [f64]) -> ghoststat_core::Result<()> {
        let frame_err = |message: String| ghoststat_core::Error::FrameRead { frame: t, message };
        if t >= self.frame_count() {
            return Err(frame_err("frame index out of range".into()));
        }
        let mut bytes = vec![0u8; 8 * self.pixel_count()];
        let offset = HEADER_LEN as u64 + t as u64 * bytes.len() as u64;
        self.read_at(&mut bytes, offset)
            .map_err(|e| frame_err(format!("{}: {e}", self.path.display())))?;
        decode_f64s(&bytes, out);
        if let Some(n) = out.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(frame_err(format!("pixel {n} holds {} (intensities must be finite and non-negative)", out[n])));
        }
        Ok(())
    }
}
