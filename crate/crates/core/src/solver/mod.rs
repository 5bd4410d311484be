//! Robust PCA iterations on the factorization `X = L·Rᵀ`.
//!
//! Each LRPCA iteration soft-thresholds the current residual to update the
//! outliers, then takes one scaled gradient step on both factors:
//!
//! ```text
//! S'  = S_ζ(Y − L Rᵀ)
//! E   = L Rᵀ + S' − Y
//! L'  = L − η · E R (RᵀR)⁻¹
//! R'  = R − η · Eᵀ L (LᵀL)⁻¹
//! ```
//!
//! Both factor updates read the old factors. ScaledGD is the same iteration
//! with the top-fraction sparsifier in place of soft-thresholding.

mod stop;
mod trace;

pub use stop::{StopMode, StopRule};
pub use trace::{SolveTrace, TraceRecord};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::learn::ParamSchedule;
use crate::mat::{gram_solve, truncated_svd, DenseMatrix};
use crate::ops::{check_threshold, shrink, sparsify_top_fraction};

/// Low-rank factors `(L, R)` with `X = L·Rᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub l: DenseMatrix,
    pub r: DenseMatrix,
}

impl FactorPair {
    pub fn new(l: DenseMatrix, r: DenseMatrix) -> Result<Self> {
        if l.cols() != r.cols() || l.cols() == 0 {
            return Err(Error::InvalidDimensions(format!(
                "factor inner dimensions differ: {} vs {}",
                l.cols(),
                r.cols()
            )));
        }
        if !l.is_finite() || !r.is_finite() {
            return Err(Error::InvalidInput("non-finite factor entries".into()));
        }
        Ok(Self { l, r })
    }

    pub fn rank(&self) -> usize {
        self.l.cols()
    }

    pub fn product(&self) -> DenseMatrix {
        self.l.matmul_t(&self.r).expect("inner dimensions checked at construction")
    }
}

/// `(L_k, R_k, S_k)` plus the cached product `L_k·R_kᵀ`.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub factors: FactorPair,
    pub s: DenseMatrix,
    pub iteration: usize,
    low_rank: DenseMatrix,
}

impl SolverState {
    pub fn new(factors: FactorPair, s: DenseMatrix, iteration: usize) -> Result<Self> {
        let shape = (factors.l.rows(), factors.r.rows());
        if s.shape() != shape {
            return Err(Error::InvalidDimensions(format!(
                "S is {}x{} but factors give {}x{}",
                s.rows(),
                s.cols(),
                shape.0,
                shape.1
            )));
        }
        let low_rank = factors.product();
        Ok(Self { factors, s, iteration, low_rank })
    }

    /// `L_k·R_kᵀ`.
    pub fn low_rank(&self) -> &DenseMatrix {
        &self.low_rank
    }
}

/// Where each iteration's `(ζ, η)` come from.
#[derive(Debug, Clone)]
pub enum ScheduleSource {
    Learned(ParamSchedule),
    /// `ζ_0 = ‖X⋆‖_∞`, `ζ_k = ‖L_{k−1}R_{k−1}ᵀ − X⋆‖_∞`, constant `η`.
    Oracle { eta: f64 },
    /// The same `(ζ, η)` for initialization and every iteration.
    Fixed { zeta: f64, eta: f64 },
}

impl ScheduleSource {
    fn initial_threshold(&self, truth: Option<&DenseMatrix>) -> Result<f64> {
        match self {
            Self::Learned(p) => Ok(p.zeta0()),
            Self::Oracle { .. } => Ok(truth.ok_or(Error::MissingGroundTruth)?.max_abs()),
            Self::Fixed { zeta, .. } => Ok(*zeta),
        }
    }

    fn params(&self, k: usize, current: &DenseMatrix, truth: Option<&DenseMatrix>) -> Result<(f64, f64)> {
        match self {
            Self::Learned(p) => Ok(p.at(k)),
            Self::Oracle { eta } => {
                let t = truth.ok_or(Error::MissingGroundTruth)?;
                Ok((current.max_abs_diff(t)?, *eta))
            }
            Self::Fixed { zeta, eta } => Ok((*zeta, *eta)),
        }
    }
}

/// Result of a full solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub low_rank: DenseMatrix,
    pub sparse: DenseMatrix,
    pub factors: FactorPair,
    pub trace: SolveTrace,
    /// Iterations executed after initialization.
    pub iterations: usize,
    /// Whether the stop rule's tolerance test fired (always false for
    /// `FixedIters`).
    pub converged: bool,
}

/// `S_0 = S_ζ0(Y)`, `(U, Σ, V) = SVD_r(Y − S_0)`, `L_0 = UΣ^½`, `R_0 = VΣ^½`.
pub fn spectral_init(y: &DenseMatrix, r: usize, zeta0: f64, seed: u64) -> Result<SolverState> {
    check_threshold(zeta0)?;
    let s0 = y.map(|v| shrink(v, zeta0));
    init_from_sparse(y, s0, r, seed)
}

fn init_from_sparse(y: &DenseMatrix, s0: DenseMatrix, r: usize, seed: u64) -> Result<SolverState> {
    let svd = truncated_svd(&y.sub(&s0)?, r, seed)?;
    let root: Vec<f64> = svd.sigma.iter().map(|s| s.sqrt()).collect();
    let factors = FactorPair::new(svd.u.scale_columns(&root), svd.v.scale_columns(&root))?;
    SolverState::new(factors, s0, 0)
}

/// One LRPCA iteration.
pub fn lrpca_step(state: &SolverState, y: &DenseMatrix, zeta: f64, eta: f64) -> Result<SolverState> {
    check_threshold(zeta)?;
    let (s_new, residual) = split_residual(y, state.low_rank(), |d| {
        Ok(d.map(|v| shrink(v, zeta)))
    })?;
    advance(state, s_new, &residual, eta)
}

/// One ScaledGD iteration (top-fraction sparsifier).
pub fn scaledgd_step(state: &SolverState, y: &DenseMatrix, alpha_tilde: f64, eta: f64) -> Result<SolverState> {
    let (s_new, residual) = split_residual(y, state.low_rank(), |d| sparsify_top_fraction(d, alpha_tilde))?;
    advance(state, s_new, &residual, eta)
}

/// Returns `S' = detect(Y − X)` and the shared residual `E = X + S' − Y`.
fn split_residual(
    y: &DenseMatrix,
    x: &DenseMatrix,
    detect: impl FnOnce(&DenseMatrix) -> Result<DenseMatrix>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let d = y.sub(x)?;
    let s_new = detect(&d)?;
    let e = s_new.sub(&d)?;
    Ok((s_new, e))
}

fn advance(state: &SolverState, s_new: DenseMatrix, residual: &DenseMatrix, eta: f64) -> Result<SolverState> {
    let factors = scaled_update(&state.factors, residual, eta)?;
    SolverState::new(factors, s_new, state.iteration + 1)
}

/// Scaled gradient step on both factors from the shared residual.
pub(crate) fn scaled_update(f: &FactorPair, residual: &DenseMatrix, eta: f64) -> Result<FactorPair> {
    if residual.as_slice().iter().all(|v| *v == 0.0) {
        // zero gradient: nothing moves, whatever the Gram matrices look like
        return Ok(f.clone());
    }
    let grad_l = residual.matmul(&f.r)?;
    let grad_r = residual.t_matmul(&f.l)?;
    let step_l = gram_solve(&grad_l, &f.r.gram())?;
    let step_r = gram_solve(&grad_r, &f.l.gram())?;
    let mut l = f.l.clone();
    let mut r = f.r.clone();
    l.axpy(-eta, &step_l)?;
    r.axpy(-eta, &step_r)?;
    if !l.is_finite() || !r.is_finite() {
        return Err(Error::Diverged);
    }
    FactorPair::new(l, r)
}

/// One LRPCA layer on bare factors (no outlier matrix kept). Used by the
/// training loops where only the factor trajectory matters.
pub(crate) fn lrpca_layer(y: &DenseMatrix, f: &FactorPair, zeta: f64, eta: f64) -> Result<FactorPair> {
    check_threshold(zeta)?;
    let x = f.product();
    let mut e = DenseMatrix::zeros(y.rows(), y.cols());
    for ((out, &yv), &xv) in e.as_mut_slice().iter_mut().zip(y.as_slice()).zip(x.as_slice()) {
        let d = yv - xv;
        *out = shrink(d, zeta) - d;
    }
    scaled_update(f, &e, eta)
}

/// `‖Y − X − S‖_F / ‖Y‖_F`.
pub fn residual_rel(y: &DenseMatrix, x: &DenseMatrix, s: &DenseMatrix) -> Result<f64> {
    if y.shape() != x.shape() || y.shape() != s.shape() {
        return Err(Error::InvalidDimensions("residual_rel: shapes differ".into()));
    }
    let ny = y.frobenius();
    if ny == 0.0 {
        return Err(Error::InvalidInput("residual_rel of a zero observation".into()));
    }
    let num: f64 = y
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .zip(s.as_slice())
        .map(|((a, b), c)| {
            let d = a - b - c;
            d * d
        })
        .sum();
    Ok(num.sqrt() / ny)
}

/// `‖X − X⋆‖_F / ‖X⋆‖_F` (absolute error when `X⋆ = 0`).
pub fn relative_error(x: &DenseMatrix, truth: &DenseMatrix) -> Result<f64> {
    let d = x.distance(truth)?;
    let nt = truth.frobenius();
    Ok(if nt > 0.0 { d / nt } else { d })
}

fn validate_problem(y: &DenseMatrix, r: usize, truth: Option<&DenseMatrix>) -> Result<()> {
    if y.is_empty() {
        return Err(Error::InvalidDimensions("empty observation".into()));
    }
    if !y.is_finite() {
        return Err(Error::InvalidInput("observation has non-finite entries".into()));
    }
    let max = y.rows().min(y.cols());
    if r == 0 || r > max {
        return Err(Error::InvalidRank { rank: r, max });
    }
    if let Some(t) = truth {
        if t.shape() != y.shape() {
            return Err(Error::InvalidDimensions("truth and observation shapes differ".into()));
        }
    }
    Ok(())
}

/// Runs LRPCA: spectral initialization, then iterations until `stop` fires.
pub fn solve(
    y: &DenseMatrix,
    r: usize,
    schedule: &ScheduleSource,
    stop: &StopRule,
    truth: Option<&DenseMatrix>,
    seed: u64,
) -> Result<SolveOutcome> {
    validate_problem(y, r, truth)?;
    stop.validate()?;
    let zeta0 = schedule.initial_threshold(truth)?;
    drive(
        y,
        stop,
        truth,
        Some(zeta0),
        || spectral_init(y, r, zeta0, seed),
        |k, state| {
            let (zeta, eta) = schedule.params(k, state.low_rank(), truth)?;
            Ok((lrpca_step(state, y, zeta, eta)?, Some(zeta), Some(eta)))
        },
    )
}

/// Runs the ScaledGD baseline: `S_0 = T_α̃(Y)`, rank-r spectral init, then
/// sparsified scaled gradient iterations with constant step size.
pub fn solve_scaledgd(
    y: &DenseMatrix,
    r: usize,
    alpha_tilde: f64,
    eta: f64,
    stop: &StopRule,
    truth: Option<&DenseMatrix>,
    seed: u64,
) -> Result<SolveOutcome> {
    validate_problem(y, r, truth)?;
    stop.validate()?;
    drive(
        y,
        stop,
        truth,
        None,
        || init_from_sparse(y, sparsify_top_fraction(y, alpha_tilde)?, r, seed),
        |_, state| Ok((scaledgd_step(state, y, alpha_tilde, eta)?, None, Some(eta))),
    )
}

type StepResult = Result<(SolverState, Option<f64>, Option<f64>)>;

fn drive(
    y: &DenseMatrix,
    stop: &StopRule,
    truth: Option<&DenseMatrix>,
    zeta0: Option<f64>,
    init: impl FnOnce() -> Result<SolverState>,
    mut step: impl FnMut(usize, &SolverState) -> StepResult,
) -> Result<SolveOutcome> {
    let clock = Instant::now();
    let mut state = init()?;
    let mut trace = SolveTrace::default();
    let record = |state: &SolverState, zeta, eta, clock: &Instant| -> Result<TraceRecord> {
        Ok(TraceRecord {
            iter: state.iteration,
            zeta,
            eta,
            residual_rel: residual_rel(y, state.low_rank(), &state.s)?,
            rel_err: truth.map(|t| relative_error(state.low_rank(), t)).transpose()?,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        })
    };
    let first = record(&state, zeta0, None, &clock)?;
    let mut converged = stop.satisfied_at_init(first.residual_rel);
    trace.records.push(first);

    let mut k = 0;
    while !converged && k < stop.max_iters {
        k += 1;
        let (next, zeta, eta) = step(k, &state)?;
        let rec = record(&next, zeta, eta, &clock)?;
        converged = stop.satisfied(&rec, &state, &next)?;
        trace.records.push(rec);
        state = next;
    }
    Ok(SolveOutcome {
        low_rank: state.low_rank.clone(),
        sparse: state.s.clone(),
        factors: state.factors.clone(),
        trace,
        iterations: k,
        converged,
    })
}
