use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Grayscale frame with values normalized to `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// Clamps to `[0, 1]` and rounds onto the 8-bit grid.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|v| quantize(*v)).collect()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

fn quantize(v: f64) -> u8 {
    let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (c * 255.0).round() as u8
}

/// Binary PGM (`P5`) with `maxval ≤ 255`; header comments are skipped.
pub fn decode_pgm(bytes: &[u8]) -> Result<Frame> {
    let mut pos = 0;
    let magic = header_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::FormatError(format!(
            "expected P5 magic, found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = header_number(bytes, &mut pos)?;
    let height = header_number(bytes, &mut pos)?;
    let maxval = header_number(bytes, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::FormatError(format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::FormatError("missing raster separator".into()));
    }
    pos += 1;
    let count = width
        .checked_mul(height)
        .filter(|c| *c > 0)
        .ok_or_else(|| Error::FormatError(format!("bad frame size {width}x{height}")))?;
    let raster = bytes
        .get(pos..pos + count)
        .ok_or_else(|| Error::FormatError("truncated raster".into()))?;
    let scale = maxval as f64;
    Frame::new(width, height, raster.iter().map(|&b| (b as f64 / scale).min(1.0)).collect())
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::FormatError("truncated PGM header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = header_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::FormatError(format!("bad header field {:?}", String::from_utf8_lossy(tok))))
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend(frame.to_bytes());
    out
}

pub fn read_pgm(path: &Path) -> Result<Frame> {
    decode_pgm(&fs::read(path)?).map_err(|e| match e {
        Error::FormatError(msg) => Error::FormatError(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_pgm(frame: &Frame, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(frame))?;
    Ok(())
}
