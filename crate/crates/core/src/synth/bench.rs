//! Benchmark harnesses: convergence traces, recoverability sweeps, runtime
//! scaling and schedule generalization. Trials run concurrently; results are
//! collected in seed order so reports depend only on the inputs.

use std::fmt::Write as _;

use super::{derive_seed, gen_instance, ProblemInstance};
use crate::error::{Error, Result};
use crate::learn::ParamSchedule;
use crate::par;
use crate::solver::{solve, solve_scaledgd, ScheduleSource, SolveOutcome, SolveTrace, StopRule};

/// ScaledGD's sparsification level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaTilde {
    Fixed(f64),
    /// `min(c·α, 1)` for the instance's outlier fraction `α`.
    TimesAlpha(f64),
}

impl AlphaTilde {
    pub fn resolve(&self, alpha: f64) -> f64 {
        match *self {
            Self::Fixed(a) => a,
            Self::TimesAlpha(c) => (c * alpha).min(1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SolverSpec {
    Lrpca(ScheduleSource),
    ScaledGd { alpha_tilde: AlphaTilde, eta: f64 },
}

impl SolverSpec {
    /// The baseline defaults: `α̃ = 2α`, `η = 0.5`.
    pub fn scaledgd_default() -> Self {
        Self::ScaledGd { alpha_tilde: AlphaTilde::TimesAlpha(2.0), eta: 0.5 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lrpca(ScheduleSource::Learned(_)) => "lrpca",
            Self::Lrpca(ScheduleSource::Oracle { .. }) => "lrpca-oracle",
            Self::Lrpca(ScheduleSource::Fixed { .. }) => "lrpca-fixed",
            Self::ScaledGd { .. } => "scaledgd",
        }
    }

    /// Solves `inst` with the ground truth attached for error tracking.
    pub fn run(&self, inst: &ProblemInstance, stop: &StopRule, seed: u64) -> Result<SolveOutcome> {
        match self {
            Self::Lrpca(schedule) => solve(&inst.y, inst.r, schedule, stop, Some(&inst.x_star), seed),
            Self::ScaledGd { alpha_tilde, eta } => solve_scaledgd(
                &inst.y,
                inst.r,
                alpha_tilde.resolve(inst.alpha),
                *eta,
                stop,
                Some(&inst.x_star),
                seed,
            ),
        }
    }
}

/// One solver run on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub solver: String,
    pub seed: u64,
    pub alpha: f64,
    pub n: usize,
    pub r: usize,
    pub iters: usize,
    /// `‖X̂ − X⋆‖_F / ‖X⋆‖_F`; infinite when the solver broke down.
    pub final_rel_err: f64,
    pub wall_ms: f64,
    /// `final_rel_err < tolerance` of the run.
    pub success: bool,
}

impl BenchRecord {
    fn from_outcome(spec: &SolverSpec, inst: &ProblemInstance, out: &SolveOutcome, tol: f64) -> Self {
        let last = out.trace.last().expect("trace has the init record");
        let err = last.rel_err.unwrap_or(f64::INFINITY);
        Self {
            solver: spec.name().to_string(),
            seed: inst.seed,
            alpha: inst.alpha,
            n: inst.y.rows(),
            r: inst.r,
            iters: out.iterations,
            final_rel_err: err,
            wall_ms: last.wall_ms,
            success: err < tol,
        }
    }

    fn failed(spec: &SolverSpec, inst: &ProblemInstance, stop: &StopRule) -> Self {
        Self {
            solver: spec.name().to_string(),
            seed: inst.seed,
            alpha: inst.alpha,
            n: inst.y.rows(),
            r: inst.r,
            iters: stop.max_iters,
            final_rel_err: f64::INFINITY,
            wall_ms: 0.0,
            success: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
}

impl BenchReport {
    /// CSV `solver,seed,alpha,n,r,iters,final_rel_err,wall_ms,success`;
    /// with `timings` off every `wall_ms` is written as 0.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from("solver,seed,alpha,n,r,iters,final_rel_err,wall_ms,success\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.16e},{:.3},{}",
                r.solver,
                r.seed,
                r.alpha,
                r.n,
                r.r,
                r.iters,
                r.final_rel_err,
                if timings { r.wall_ms } else { 0.0 },
                r.success
            );
        }
        out
    }
}

/// Report plus one trace per solver, aligned by iteration and wall time.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub report: BenchReport,
    pub traces: Vec<(String, SolveTrace)>,
}

/// Runs every solver on the same instance. A run succeeds when its final
/// error to `X⋆` is below `stop.tolerance`.
pub fn convergence_bench(specs: &[SolverSpec], inst: &ProblemInstance, stop: &StopRule, seed: u64) -> Result<ConvergenceReport> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("convergence bench needs at least one solver".into()));
    }
    let mut report = BenchReport::default();
    let mut traces = Vec::new();
    for spec in specs {
        let out = spec.run(inst, stop, seed)?;
        report.records.push(BenchRecord::from_outcome(spec, inst, &out, stop.tolerance));
        traces.push((spec.name().to_string(), out.trace));
    }
    Ok(ConvergenceReport { report, traces })
}

/// Shape and seeding shared by the multi-trial benches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSetup {
    pub n: usize,
    pub r: usize,
    pub trials: usize,
    pub seed: u64,
    pub stop: StopRule,
}

/// Success counts per solver and `α`, in input order.
#[derive(Debug, Clone)]
pub struct RecoverabilityTable {
    pub alphas: Vec<f64>,
    pub trials: usize,
    /// `(solver name, successes per α)`.
    pub rows: Vec<(String, Vec<usize>)>,
    pub report: BenchReport,
}

impl RecoverabilityTable {
    /// `solver,<α_1>,…` with `successes/trials` cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("solver");
        for a in &self.alphas {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
        for (name, counts) in &self.rows {
            out.push_str(name);
            for c in counts {
                let _ = write!(out, ",{c}/{}", self.trials);
            }
            out.push('\n');
        }
        out
    }

    pub fn successes(&self, solver: &str, alpha: f64) -> Option<usize> {
        let col = self.alphas.iter().position(|a| *a == alpha)?;
        self.rows.iter().find(|(n, _)| n == solver).map(|(_, c)| c[col])
    }
}

/// For each `α` and solver, counts trials whose final error to `X⋆` is below
/// `success_tol`. Trial `t` uses the instance seed `derive_seed(seed, t)` at
/// every `α`, so columns share seeds. A solver breakdown counts as a failure.
pub fn recoverability_sweep(
    alphas: &[f64],
    specs: &[SolverSpec],
    setup: &TrialSetup,
    success_tol: f64,
) -> Result<RecoverabilityTable> {
    if setup.trials == 0 {
        return Err(Error::InvalidInput("recoverability sweep needs at least one trial".into()));
    }
    if specs.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidInput("recoverability sweep needs solvers and alphas".into()));
    }
    let mut report = BenchReport::default();
    let mut rows: Vec<(String, Vec<usize>)> = specs.iter().map(|s| (s.name().to_string(), Vec::new())).collect();
    for &alpha in alphas {
        let instances = par::map_indexed(setup.trials, |t| {
            gen_instance(setup.n, setup.n, setup.r, alpha, derive_seed(setup.seed, t as u64))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for (spec, row) in specs.iter().zip(rows.iter_mut()) {
            let records = par::map_indexed(setup.trials, |t| {
                let inst = &instances[t];
                match spec.run(inst, &setup.stop, inst.seed) {
                    Ok(out) => BenchRecord::from_outcome(spec, inst, &out, success_tol),
                    Err(_) => BenchRecord::failed(spec, inst, &setup.stop),
                }
            });
            row.1.push(records.iter().filter(|r| r.success).count());
            report.records.extend(records);
        }
    }
    Ok(RecoverabilityTable { alphas: alphas.to_vec(), trials: setup.trials, rows, report })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeRow {
    pub n: usize,
    pub r: usize,
    pub iters: usize,
    /// Median wall time of one iteration, initialization excluded.
    pub median_ms: f64,
}

pub fn runtime_csv(rows: &[RuntimeRow]) -> String {
    let mut out = String::from("n,r,iters,median_ms\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:.6}", r.n, r.r, r.iters, r.median_ms);
    }
    out
}

/// Median per-iteration LRPCA time for every `(n, r)` pair on an `n×n`
/// instance with `α = 0.1`, using a fixed schedule and no ground truth so
/// only the iteration itself and the residual are timed. Pairs run one at a
/// time.
pub fn runtime_scaling_bench(n_list: &[usize], r_list: &[usize], iters: usize, seed: u64) -> Result<Vec<RuntimeRow>> {
    if iters < 10 {
        return Err(Error::InvalidInput(format!("runtime bench needs at least 10 iterations, got {iters}")));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        for &r in r_list {
            let inst = gen_instance(n, n, r, 0.1, derive_seed(seed, (n * 1000 + r) as u64))?;
            let schedule = ScheduleSource::Fixed { zeta: inst.x_star.max_abs(), eta: 0.5 };
            let out = solve(&inst.y, r, &schedule, &StopRule::fixed(iters), None, seed)?;
            let mut times = out.trace.iteration_times();
            times.sort_by(f64::total_cmp);
            let mid = times.len() / 2;
            let median = if times.len() % 2 == 0 { 0.5 * (times[mid - 1] + times[mid]) } else { times[mid] };
            rows.push(RuntimeRow { n, r, iters, median_ms: median });
        }
    }
    Ok(rows)
}

/// Mean iteration count for `schedule` to stop on `setup.trials` fresh
/// `n×n` instances with outlier fraction `alpha`. Runs hitting the
/// iteration cap count with the cap.
pub fn mean_iterations(schedule: &ParamSchedule, alpha: f64, setup: &TrialSetup) -> Result<f64> {
    let spec = SolverSpec::Lrpca(ScheduleSource::Learned(schedule.clone()));
    let counts = par::map_indexed(setup.trials, |t| -> Result<usize> {
        let inst = gen_instance(setup.n, setup.n, setup.r, alpha, derive_seed(setup.seed, t as u64))?;
        Ok(spec.run(&inst, &setup.stop, inst.seed)?.iterations)
    });
    let mut sum = 0usize;
    for c in counts {
        sum += c?;
    }
    Ok(sum as f64 / setup.trials.max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizationRow {
    pub n: usize,
    pub r: usize,
    pub mean_iters: f64,
}

pub fn generalization_csv(rows: &[GeneralizationRow]) -> String {
    let mut out = String::from("n,r,mean_iters\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.n, r.r, r.mean_iters);
    }
    out
}

/// For each target `(n, r)`, the mean iterations of the base schedule
/// rescaled to the target. `setup.n` and `setup.r` are ignored; the other
/// fields apply to every target.
pub fn generalization_bench(
    theta_base: &ParamSchedule,
    base: (usize, usize),
    targets: &[(usize, usize)],
    alpha: f64,
    setup: &TrialSetup,
) -> Result<Vec<GeneralizationRow>> {
    targets
        .iter()
        .map(|&(n, r)| {
            let theta = theta_base.rescale(base.0, base.1, n, r)?;
            let s = TrialSetup { n, r, ..*setup };
            Ok(GeneralizationRow { n, r, mean_iters: mean_iterations(&theta, alpha, &s)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_setup(trials: usize) -> TrialSetup {
        TrialSetup { n: 40, r: 2, trials, seed: 3, stop: StopRule::residual(1e-8, 200) }
    }

    #[test]
    fn empty_solver_list() {
        let inst = gen_instance(10, 10, 1, 0.1, 0).unwrap();
        assert!(convergence_bench(&[], &inst, &StopRule::fixed(3), 0).is_err());
    }

    #[test]
    fn zero_budget_gives_init_only() {
        let inst = gen_instance(20, 20, 2, 0.1, 0).unwrap();
        let specs = [SolverSpec::Lrpca(ScheduleSource::Oracle { eta: 0.5 }), SolverSpec::scaledgd_default()];
        let rep = convergence_bench(&specs, &inst, &StopRule::fixed(0), 0).unwrap();
        assert!(rep.traces.iter().all(|(_, t)| t.len() == 1));
        assert_eq!(rep.report.records.len(), 2);
    }

    #[test]
    fn oracle_beats_baseline() {
        let inst = gen_instance(150, 150, 3, 0.1, 2).unwrap();
        let specs = [SolverSpec::Lrpca(ScheduleSource::Oracle { eta: 0.5 }), SolverSpec::scaledgd_default()];
        let rep = convergence_bench(&specs, &inst, &StopRule::residual(1e-6, 500), 0).unwrap();
        let [a, b] = [&rep.report.records[0], &rep.report.records[1]];
        assert!(a.final_rel_err < 1e-6 && b.final_rel_err < 1e-5, "{a:?} {b:?}");
        assert!(a.iters <= b.iters);
    }

    #[test]
    fn outlier_free_sweep_all_succeed() {
        let specs = [SolverSpec::Lrpca(ScheduleSource::Oracle { eta: 0.5 }), SolverSpec::scaledgd_default()];
        let table = recoverability_sweep(&[0.0], &specs, &small_setup(3), 1e-6).unwrap();
        assert_eq!(table.successes("lrpca-oracle", 0.0), Some(3));
        assert_eq!(table.successes("scaledgd", 0.0), Some(3));
        assert_eq!(table.to_csv(), "solver,0\nlrpca-oracle,3/3\nscaledgd,3/3\n");
    }

    #[test]
    fn dense_outliers_defeat_baseline() {
        let specs = [SolverSpec::scaledgd_default()];
        let table = recoverability_sweep(&[0.95], &specs, &small_setup(3), 1e-3).unwrap();
        assert_eq!(table.successes("scaledgd", 0.95), Some(0));
    }

    #[test]
    fn sweep_is_reproducible() {
        let specs = [SolverSpec::Lrpca(ScheduleSource::Oracle { eta: 0.5 })];
        let a = recoverability_sweep(&[0.1, 0.2], &specs, &small_setup(2), 1e-6).unwrap();
        let b = recoverability_sweep(&[0.1, 0.2], &specs, &small_setup(2), 1e-6).unwrap();
        assert_eq!(a.report.to_csv(false), b.report.to_csv(false));
        assert_eq!(a.report.records.len(), 4);
    }

    #[test]
    fn runtime_needs_enough_iterations() {
        assert!(runtime_scaling_bench(&[20], &[2], 0, 1).is_err());
        let rows = runtime_scaling_bench(&[30], &[1, 2], 10, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.median_ms >= 0.0));
    }

    #[test]
    fn generalization_identity_target() {
        let theta = ParamSchedule::constant(4, 0.05, 1e-3, 0.5).unwrap().with_tail(1.0, 0.7).unwrap();
        let setup = TrialSetup { stop: StopRule::residual(1e-6, 100), ..small_setup(2) };
        let rows = generalization_bench(&theta, (40, 2), &[(40, 2)], 0.05, &setup).unwrap();
        let direct = mean_iterations(&theta, 0.05, &setup).unwrap();
        assert_eq!(rows[0].mean_iters, direct);
    }

    #[test]
    fn report_csv_header() {
        let csv = BenchReport::default().to_csv(true);
        assert_eq!(csv, "solver,seed,alpha,n,r,iters,final_rel_err,wall_ms,success\n");
    }
}
