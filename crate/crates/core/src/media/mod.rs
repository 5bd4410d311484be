//! Matrix files, PGM frames and the background-subtraction pipeline.
//!
//! Binary matrix layout: the bytes `LRPM`, then rows and cols as
//! little-endian `u64`, then `rows·cols` little-endian `f64` in row-major
//! order.

mod frames;
mod pgm;
mod scene;

pub use frames::{
    background_subtract, frames_to_matrix, matrix_to_frames, read_pgm_files, read_pgm_sequence, BackgroundSplit,
    FrameSequence,
};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm, Frame};
pub use scene::{synthetic_scene, Scene, SceneSource, SceneSpec};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mat::DenseMatrix;

const MAGIC: &[u8; 4] = b"LRPM";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Binary,
    Csv,
}

impl MatrixFormat {
    /// `.csv` files are CSV, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Binary,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "bin" => Ok(Self::Binary),
            "csv" => Ok(Self::Csv),
            other => Err(Error::ParseError(format!("unknown matrix format `{other}`"))),
        }
    }
}

pub fn encode_binary(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < 20 {
        return Err(Error::FormatError("matrix file shorter than its header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::FormatError(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(4), word(12));
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::FormatError(format!("implausible shape {rows}x{cols}")))?;
    let body = &bytes[20..];
    if body.len() != len {
        return Err(Error::FormatError(format!(
            "expected {len} payload bytes for {rows}x{cols}, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseMatrix::new(rows as usize, cols as usize, data).map_err(|e| Error::FormatError(e.to_string()))
}

/// One row per line, shortest round-trip decimal form.
pub fn encode_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::ParseError(format!("line {}: `{}` is not a number", lineno + 1, field.trim())))?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::ParseError(format!("line {}: {width} fields, expected {c}", lineno + 1)))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::ParseError("empty CSV matrix".into()))?;
    DenseMatrix::new(rows, cols, data).map_err(|e| Error::ParseError(e.to_string()))
}

pub fn write_matrix(m: &DenseMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Binary => fs::write(path, encode_binary(m))?,
        MatrixFormat::Csv => fs::write(path, encode_csv(m))?,
    }
    Ok(())
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<DenseMatrix> {
    match format {
        MatrixFormat::Binary => decode_binary(&fs::read(path)?),
        MatrixFormat::Csv => parse_csv(&fs::read_to_string(path)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let m = DenseMatrix::from_rows(&[[1.0, -2.5e-300, 3.0], [f64::MIN_POSITIVE, 0.1, -0.0]]);
        let back = decode_binary(&encode_binary(&m)).unwrap();
        let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
        assert_eq!(back.shape(), (2, 3));
    }

    #[test]
    fn binary_errors() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0]]);
        let mut bytes = encode_binary(&m);
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_binary(&bytes), Err(Error::FormatError(_))));
        let good = encode_binary(&m);
        assert!(matches!(decode_binary(&good[..good.len() - 1]), Err(Error::FormatError(_))));
        assert!(matches!(decode_binary(b"LRPM"), Err(Error::FormatError(_))));
    }

    #[test]
    fn csv_parse_and_round_trip() {
        let m = parse_csv("1,2\n3,4\n").unwrap();
        assert_eq!(m, DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let odd = DenseMatrix::from_rows(&[[0.1, 1e-17, -3.25e12]]);
        assert_eq!(parse_csv(&encode_csv(&odd)).unwrap(), odd);
        assert!(matches!(parse_csv("1,x\n"), Err(Error::ParseError(_))));
        assert!(matches!(parse_csv("1,2\n3\n"), Err(Error::ParseError(_))));
        assert!(matches!(parse_csv(""), Err(Error::ParseError(_))));
    }

    #[test]
    fn format_selection() {
        assert_eq!(MatrixFormat::from_path(Path::new("a/Y.CSV")), MatrixFormat::Csv);
        assert_eq!(MatrixFormat::from_path(Path::new("Y.bin")), MatrixFormat::Binary);
        assert_eq!("csv".parse::<MatrixFormat>().unwrap(), MatrixFormat::Csv);
    }
}
