use std::fs;
use std::path::{Path, PathBuf};

use super::pgm::{read_pgm, Frame};
use crate::error::{Error, Result};
use crate::mat::DenseMatrix;
use crate::solver::{solve, ScheduleSource, SolveOutcome, StopRule};

/// Nonempty run of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    width: usize,
    height: usize,
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::InvalidInput("empty frame sequence".into()))?;
        let (width, height) = (first.width, first.height);
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| (f.width, f.height) != (width, height)) {
            return Err(Error::InvalidInput(format!(
                "frame {i} is {}x{}, expected {width}x{height}",
                f.width, f.height
            )));
        }
        Ok(Self { width, height, frames })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
}

/// All `*.pgm` files in `dir`, ordered by file name.
pub fn read_pgm_sequence(dir: &Path) -> Result<FrameSequence> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("no .pgm files in {}", dir.display())));
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    read_pgm_files(&paths)
}

/// The listed files in the given order.
pub fn read_pgm_files(paths: &[PathBuf]) -> Result<FrameSequence> {
    let frames = paths.iter().map(|p| read_pgm(p)).collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames)
}

/// `(width·height) × frames` matrix; column `j` is frame `j` flattened
/// row-major.
pub fn frames_to_matrix(seq: &FrameSequence) -> DenseMatrix {
    let pixels = seq.width * seq.height;
    let count = seq.len();
    DenseMatrix::from_fn(pixels, count, |i, j| seq.frames[j].pixels[i])
}

/// Inverse of [`frames_to_matrix`].
pub fn matrix_to_frames(m: &DenseMatrix, width: usize, height: usize) -> Result<FrameSequence> {
    if m.rows() != width * height {
        return Err(Error::InvalidDimensions(format!(
            "{} rows cannot hold {width}x{height} frames",
            m.rows()
        )));
    }
    let frames = (0..m.cols())
        .map(|j| Frame::new(width, height, m.column(j)))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames)
}

/// Background and foreground frames, both clamped to `[0, 1]`, plus the raw
/// solve.
#[derive(Debug, Clone)]
pub struct BackgroundSplit {
    pub background: FrameSequence,
    pub foreground: FrameSequence,
    pub outcome: SolveOutcome,
}

/// Splits a frame sequence into a rank-`r` background and sparse
/// foreground. Without an explicit stop rule the iteration stops once
/// successive iterates change by less than `1e-3` relative.
pub fn background_subtract(
    seq: &FrameSequence,
    r: usize,
    schedule: &ScheduleSource,
    stop: Option<StopRule>,
    seed: u64,
) -> Result<BackgroundSplit> {
    if r > seq.len() {
        return Err(Error::InvalidRank { rank: r, max: seq.len() });
    }
    let y = frames_to_matrix(seq);
    let stop = stop.unwrap_or(StopRule::iterate_change(1e-3, 500));
    let outcome = solve(&y, r, schedule, &stop, None, seed)?;
    let background = matrix_to_frames(&outcome.low_rank.map(|v| v.clamp(0.0, 1.0)), seq.width, seq.height)?;
    let foreground = matrix_to_frames(&outcome.sparse.map(|v| v.abs().min(1.0)), seq.width, seq.height)?;
    Ok(BackgroundSplit { background, foreground, outcome })
}
