use std::fmt::Write as _;

use super::ParamSchedule;
use crate::error::{Error, Result};
use crate::mat::DenseMatrix;
use crate::par;
use crate::solver::{lrpca_layer, spectral_init, FactorPair};
use crate::synth::{derive_seed, InstanceSource, ProblemInstance};

/// Added inside the log of the normalized loss so exact recoveries stay finite.
const LOSS_FLOOR: f64 = 1e-30;

/// Inclusive arithmetic grid `min, min + step, …, ≤ max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min: 0.1, max: 1.0, step: 0.1 }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.min > 0.0) || self.max < self.min {
            return Err(Error::InvalidInput(format!("bad grid {self:?}")));
        }
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        // round to 12 decimals so 0.1-step grids land on 0.3 rather than 0.30000000000000004
        Ok((0..count)
            .map(|i| ((self.min + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect())
    }
}

/// How each new layer's parameters are initialized before its stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarmStart {
    /// `ζ_k` starts at the oracle value `‖X_{k−1} − X⋆‖_∞` measured on a
    /// fresh instance under the current schedule; `η_k` copies `η_{k−1}`.
    Oracle,
    /// `ζ_0 = zeta0`, `ζ_k = ratio·ζ_{k−1}`; `η_k` copies `η_{k−1}`.
    Geometric { zeta0: f64, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub k_bar: usize,
    pub sgd_steps_per_stage: usize,
    pub learning_rate: f64,
    /// Central-difference step in log-parameter space.
    pub fd_epsilon: f64,
    pub grid: GridSpec,
    /// Instances drawn for the tail grid search.
    pub grid_instances: usize,
    pub seed: u64,
    pub warm_start: WarmStart,
    /// `η_1` before training.
    pub initial_eta: f64,
    /// Upper bound on the ℓ2 norm of each SGD step's gradient.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 10,
            k_bar: 15,
            sgd_steps_per_stage: 10,
            learning_rate: 0.1,
            fd_epsilon: 1e-3,
            grid: GridSpec::default(),
            grid_instances: 20,
            seed: 0,
            warm_start: WarmStart::Oracle,
            initial_eta: 0.5,
            grad_clip: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if self.k_bar < self.k {
            return bad("K_bar must be >= K");
        }
        if !(self.learning_rate > 0.0) || !(self.fd_epsilon > 0.0) || !(self.grad_clip > 0.0) {
            return bad("learning rate, fd epsilon and gradient clip must be positive");
        }
        if !(self.initial_eta > 0.0) {
            return bad("initial eta must be positive");
        }
        if self.grid_instances == 0 {
            return bad("grid search needs at least one instance");
        }
        self.grid.points()?;
        Ok(())
    }
}

/// Normalized loss at one SGD step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub stage: usize,
    pub step: usize,
    /// `‖L_kR_kᵀ − X⋆‖²_F / ‖X⋆‖²_F` on that step's instance.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct Trained {
    /// FNN part; tail factors are left at `β = φ = 1`.
    pub schedule: ParamSchedule,
    pub log: Vec<StepLog>,
}

impl Trained {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("stage,step,loss\n");
        for l in &self.log {
            let _ = writeln!(out, "{},{},{:.16e}", l.stage, l.step, l.loss);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub beta: f64,
    pub phi: f64,
    /// Mean `‖L_K̄R_K̄ᵀ − X⋆‖²_F`; `+∞` when the iteration broke down.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub schedule: ParamSchedule,
    pub evaluations: Vec<GridPoint>,
}

#[derive(Debug, Clone)]
pub struct FrmnnOutcome {
    pub schedule: ParamSchedule,
    pub log: Vec<StepLog>,
    pub grid: Vec<GridPoint>,
}

/// Raw parameter arrays for the first `k` layers.
#[derive(Debug, Clone)]
struct Params {
    zetas: Vec<f64>,
    etas: Vec<f64>,
}

impl Params {
    fn from_schedule(s: &ParamSchedule, k: usize) -> Self {
        Self {
            zetas: (0..=k).map(|j| s.at(j).0).collect(),
            etas: (1..=k).map(|j| s.at(j).1).collect(),
        }
    }

    /// Active parameter count for stage `k`: `ζ_0..ζ_k`, `η_1..η_k`.
    fn active(k: usize) -> usize {
        2 * k + 1
    }

    /// `(layer, value)` of active parameter `idx`: thresholds first.
    fn layer_of(k: usize, idx: usize) -> usize {
        if idx <= k {
            idx
        } else {
            idx - k
        }
    }

    fn get_mut(&mut self, k: usize, idx: usize) -> &mut f64 {
        if idx <= k {
            &mut self.zetas[idx]
        } else {
            &mut self.etas[idx - k - 1]
        }
    }
}

fn svd_seed(base: u64, inst: &ProblemInstance) -> u64 {
    derive_seed(base, inst.seed)
}

fn init_factors(inst: &ProblemInstance, zeta0: f64, seed: u64) -> Result<FactorPair> {
    Ok(spectral_init(&inst.y, inst.r, zeta0, seed)?.factors)
}

/// Applies layers `from..=to` (1-based) starting from `start`.
fn run_layers(inst: &ProblemInstance, start: &FactorPair, p: &Params, from: usize, to: usize) -> Result<FactorPair> {
    let mut f = start.clone();
    for j in from..=to {
        f = lrpca_layer(&inst.y, &f, p.zetas[j], p.etas[j - 1])?;
    }
    Ok(f)
}

/// Factor pairs after layers `0..=k`.
fn trajectory(inst: &ProblemInstance, p: &Params, k: usize, seed: u64) -> Result<Vec<FactorPair>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(init_factors(inst, p.zetas[0], seed)?);
    for j in 1..=k {
        let next = lrpca_layer(&inst.y, &out[j - 1], p.zetas[j], p.etas[j - 1])?;
        out.push(next);
    }
    Ok(out)
}

fn squared_error(f: &FactorPair, truth: &DenseMatrix) -> Result<f64> {
    let d = f.product().distance(truth)?;
    Ok(d * d)
}

fn normalized_loss(f: &FactorPair, inst: &ProblemInstance) -> Result<f64> {
    let scale = inst.x_star.frobenius().powi(2);
    let e = squared_error(f, &inst.x_star)?;
    Ok(if scale > 0.0 { e / scale } else { e })
}

/// Mean `‖L_kR_kᵀ − X⋆‖²_F` over `batch` after exactly `k` iterations.
pub fn stage_loss(theta: &ParamSchedule, k: usize, batch: &[ProblemInstance], seed: u64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let p = Params::from_schedule(theta, k);
    let losses = par::map_indexed(batch.len(), |i| -> Result<f64> {
        let inst = &batch[i];
        let traj = trajectory(inst, &p, k, svd_seed(seed, inst))?;
        squared_error(&traj[k], &inst.x_star)
    });
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / batch.len() as f64)
}

/// Central finite-difference gradient of `ln(loss/‖X⋆‖² + floor)` with
/// respect to the logs of the active parameters `ζ_0..ζ_k, η_1..η_k`, plus
/// the unperturbed normalized loss.
fn objective_gradient(
    inst: &ProblemInstance,
    p: &Params,
    k: usize,
    eps: f64,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let base = trajectory(inst, p, k, seed)?;
    let base_loss = normalized_loss(&base[k], inst)?;
    let n = Params::active(k);
    let evals = par::map_indexed(2 * n, |job| -> f64 {
        let idx = job / 2;
        let sign = if job % 2 == 0 { 1.0 } else { -1.0 };
        let mut q = p.clone();
        *q.get_mut(k, idx) *= (sign * eps).exp();
        let layer = Params::layer_of(k, idx);
        let end = if idx == 0 {
            init_factors(inst, q.zetas[0], seed).and_then(|f0| run_layers(inst, &f0, &q, 1, k))
        } else {
            run_layers(inst, &base[layer - 1], &q, layer, k)
        };
        match end.and_then(|f| normalized_loss(&f, inst)) {
            Ok(l) if l.is_finite() => (l + LOSS_FLOOR).ln(),
            _ => f64::NAN,
        }
    });
    let grad = (0..n).map(|i| (evals[2 * i] - evals[2 * i + 1]) / (2.0 * eps)).collect();
    Ok((base_loss, grad))
}

/// Finite-difference gradient used by the SGD loop, exposed for checking.
/// Order: `ζ_0..ζ_k`, then `η_1..η_k`, each with respect to the log of the
/// parameter.
pub fn stage_gradient(theta: &ParamSchedule, k: usize, inst: &ProblemInstance, eps: f64, seed: u64) -> Result<Vec<f64>> {
    let p = Params::from_schedule(theta, k);
    Ok(objective_gradient(inst, &p, k, eps, svd_seed(seed, inst))?.1)
}

fn warm_start(
    cfg: &TrainConfig,
    p: &mut Params,
    stage: usize,
    source: &mut dyn InstanceSource,
) -> Result<()> {
    if stage > 0 {
        p.etas[stage - 1] = if stage == 1 { cfg.initial_eta } else { p.etas[stage - 2] };
    }
    p.zetas[stage] = match cfg.warm_start {
        WarmStart::Geometric { zeta0, ratio } => {
            if stage == 0 {
                zeta0
            } else {
                ratio * p.zetas[stage - 1]
            }
        }
        WarmStart::Oracle => {
            let inst = source.next_instance()?;
            if stage == 0 {
                inst.x_star.max_abs()
            } else {
                let traj = trajectory(&inst, p, stage - 1, svd_seed(cfg.seed, &inst))?;
                traj[stage - 1].product().max_abs_diff(&inst.x_star)?
            }
        }
    };
    Ok(())
}

/// Layer-wise training of the first `K` layers. Stage `k` runs
/// `sgd_steps_per_stage` batch-size-1 SGD steps on the loss after `k`
/// iterations, each on a fresh instance, updating every parameter of layers
/// `0..=k` multiplicatively (`p ← p·exp(−lr·g)`), which also keeps them
/// nonnegative.
pub fn layerwise_train(source: &mut dyn InstanceSource, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    let kk = cfg.k;
    let mut p = Params { zetas: vec![0.0; kk + 1], etas: vec![cfg.initial_eta; kk] };
    let mut log = Vec::new();
    for stage in 0..=kk {
        warm_start(cfg, &mut p, stage, source)?;
        for step in 0..cfg.sgd_steps_per_stage {
            let inst = source.next_instance()?;
            let diverged = |loss: f64| Error::TrainingDiverged { stage, loss };
            let (loss, mut grad) = objective_gradient(&inst, &p, stage, cfg.fd_epsilon, svd_seed(cfg.seed, &inst))
                .map_err(|_| diverged(f64::NAN))?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(diverged(loss));
            }
            log.push(StepLog { stage, step, loss });
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.grad_clip {
                grad.iter_mut().for_each(|g| *g *= cfg.grad_clip / norm);
            }
            for (idx, g) in grad.iter().enumerate() {
                *p.get_mut(stage, idx) *= (-cfg.learning_rate * g).exp();
            }
        }
    }
    Ok(Trained { schedule: ParamSchedule::new(p.zetas, p.etas, 1.0, 1.0)?, log })
}

/// Fixes the first `K` layers and picks `(β, φ)` from the grid minimizing the
/// mean squared error after `K̄` iterations. Ties go to the smaller `φ`, then
/// the smaller `β`.
pub fn grid_search_tail(theta_fnn: &ParamSchedule, dataset: &[ProblemInstance], cfg: &TrainConfig) -> Result<GridOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("grid search needs a nonempty dataset".into()));
    }
    if cfg.k_bar < theta_fnn.k() {
        return Err(Error::InvalidInput("K_bar must be >= K".into()));
    }
    let kk = theta_fnn.k();
    let p = Params::from_schedule(theta_fnn, kk);
    let heads: Vec<FactorPair> = par::map_indexed(dataset.len(), |i| {
        let inst = &dataset[i];
        trajectory(inst, &p, kk, svd_seed(cfg.seed, inst)).map(|mut t| t.pop().expect("nonempty"))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let grid = cfg.grid.points()?;
    let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&phi| grid.iter().map(move |&beta| (beta, phi))).collect();
    let evaluations: Vec<GridPoint> = par::map_indexed(pairs.len(), |g| {
        let (beta, phi) = pairs[g];
        let loss = theta_fnn
            .with_tail(beta, phi)
            .map(|tail| {
                let mut sum = 0.0;
                for (inst, head) in dataset.iter().zip(&heads) {
                    let mut f = head.clone();
                    for k in kk + 1..=cfg.k_bar {
                        let (zeta, eta) = tail.at(k);
                        match lrpca_layer(&inst.y, &f, zeta, eta) {
                            Ok(next) => f = next,
                            Err(_) => return f64::INFINITY,
                        }
                    }
                    match squared_error(&f, &inst.x_star) {
                        Ok(e) if e.is_finite() => sum += e,
                        _ => return f64::INFINITY,
                    }
                }
                sum / dataset.len() as f64
            })
            .unwrap_or(f64::INFINITY);
        GridPoint { beta, phi, loss }
    });

    // pairs are ordered by φ then β, so the first strict minimum wins ties
    let mut best = 0;
    for (i, e) in evaluations.iter().enumerate() {
        if e.loss < evaluations[best].loss {
            best = i;
        }
    }
    let chosen = evaluations[best];
    Ok(GridOutcome { schedule: theta_fnn.with_tail(chosen.beta, chosen.phi)?, evaluations })
}

/// Both training phases: layer-wise SGD, then the tail grid search on
/// `grid_instances` fresh instances from the same source.
pub fn train_frmnn(source: &mut dyn InstanceSource, cfg: &TrainConfig) -> Result<FrmnnOutcome> {
    let trained = layerwise_train(source, cfg)?;
    let dataset = (0..cfg.grid_instances)
        .map(|_| source.next_instance())
        .collect::<Result<Vec<_>>>()?;
    let grid = grid_search_tail(&trained.schedule, &dataset, cfg)?;
    Ok(FrmnnOutcome { schedule: grid.schedule, log: trained.log, grid: grid.evaluations })
}
