use std::str::FromStr;

use super::{SolverState, TraceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMode {
    /// `‖Y − X_k − S_k‖_F / ‖Y‖_F < tol`.
    ResidualRel,
    /// `max(‖X_k − X_{k−1}‖_F/‖X_{k−1}‖_F, ‖S_k − S_{k−1}‖_F/‖S_{k−1}‖_F) < tol`.
    IterateChange,
    /// Exactly `max_iters` iterations.
    FixedIters,
}

impl FromStr for StopMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual" | "residual_rel" => Ok(Self::ResidualRel),
            "change" | "iterate_change" => Ok(Self::IterateChange),
            "fixed" | "fixed_iters" => Ok(Self::FixedIters),
            other => Err(Error::ParseError(format!("unknown stop mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub mode: StopMode,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl StopRule {
    pub fn residual(tolerance: f64, max_iters: usize) -> Self {
        Self { mode: StopMode::ResidualRel, tolerance, max_iters }
    }

    pub fn iterate_change(tolerance: f64, max_iters: usize) -> Self {
        Self { mode: StopMode::IterateChange, tolerance, max_iters }
    }

    pub fn fixed(iters: usize) -> Self {
        Self { mode: StopMode::FixedIters, tolerance: 0.0, max_iters: iters }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidInput(format!("stop tolerance {} must be >= 0", self.tolerance)));
        }
        Ok(())
    }

    pub(crate) fn satisfied_at_init(&self, residual: f64) -> bool {
        self.mode == StopMode::ResidualRel && residual < self.tolerance
    }

    pub(crate) fn satisfied(&self, rec: &TraceRecord, prev: &SolverState, next: &SolverState) -> Result<bool> {
        Ok(match self.mode {
            StopMode::ResidualRel => rec.residual_rel < self.tolerance,
            StopMode::FixedIters => false,
            StopMode::IterateChange => {
                let dx = relative_change(next.low_rank(), prev.low_rank())?;
                let ds = relative_change(&next.s, &prev.s)?;
                dx.max(ds) < self.tolerance
            }
        })
    }
}

/// `‖a − b‖_F / ‖b‖_F`; a zero `b` counts as infinite change unless `a` is
/// zero too.
fn relative_change(a: &crate::mat::DenseMatrix, b: &crate::mat::DenseMatrix) -> Result<f64> {
    let d = a.distance(b)?;
    let nb = b.frobenius();
    Ok(if nb > 0.0 {
        d / nb
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}
