use std::fs;
use std::path::{Path, PathBuf};

use lrpca::learn::{train_frmnn, GridSpec, TrainConfig, WarmStart};
use lrpca::media::{
    background_subtract, read_matrix, read_pgm_sequence, write_matrix, write_pgm, MatrixFormat, SceneSource, SceneSpec,
};
use lrpca::solver::{solve, ScheduleSource, StopMode, StopRule};
use lrpca::synth::bench::{
    convergence_bench, generalization_bench, generalization_csv, recoverability_sweep, runtime_csv,
    runtime_scaling_bench, AlphaTilde, SolverSpec, TrialSetup,
};
use lrpca::synth::{gen_instance_with, InstanceSource, OutlierPattern, SyntheticSource};
use lrpca::ParamSchedule;

use crate::config::Params;
use crate::{BenchArgs, BgsubArgs, Cli, CliError, Command, GenArgs, Shape, SolveArgs, StopArgs, TrainArgs};

type Res<T> = Result<T, CliError>;

const COMMON: &[&str] = &["seed", "out"];
const SHAPE: &[&str] = &["n1", "n2", "r", "alpha"];
const STOP: &[&str] = &["stop", "tol", "max_iters"];

/// Collects the flags that were actually given.
#[derive(Default)]
struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn set<T: ToString>(&mut self, key: &'static str, v: Option<T>) {
        if let Some(v) = v {
            self.0.push((key, v.to_string()));
        }
    }

    fn shape(&mut self, s: &Shape) {
        self.set("n1", s.n);
        self.set("n2", s.n);
        self.set("n1", s.n1);
        self.set("n2", s.n2);
        self.set("r", s.r);
        self.set("alpha", s.alpha);
    }

    fn stop(&mut self, s: &StopArgs) {
        if let Some(v) = &s.stop {
            self.set("stop", v.first());
            self.set("tol", v.get(1));
        }
        self.set("tol", s.tol);
        self.set("max_iters", s.max_iters);
    }

    fn fixed(&mut self, f: &Option<Vec<f64>>) {
        if let Some(v) = f {
            self.set("fixed_zeta", v.first());
            self.set("fixed_eta", v.get(1));
        }
    }
}

struct Ctx {
    params: Params,
    out: PathBuf,
    seed: u64,
    timings: bool,
}

impl Ctx {
    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Res<()> {
        fs::write(self.out.join(name), contents)?;
        Ok(())
    }

    fn finish(&self) -> Res<()> {
        self.write("manifest.txt", self.params.manifest())
    }
}

fn keys(groups: &[&[&'static str]]) -> Vec<&'static str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

fn context(cli: &Cli, command: &str, known: &[&str], mut ov: Overrides) -> Res<Ctx> {
    ov.set("seed", cli.seed);
    ov.set("out", cli.out.clone());
    let params = Params::new(command, known, cli.config.as_deref(), ov.0)?;
    let seed = match params.opt::<u64>("seed")? {
        Some(s) => s,
        None => {
            let s = match std::env::var("LRPCA_SEED") {
                Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("LRPCA_SEED `{v}` is not a u64")))?,
                Err(_) => 0,
            };
            params.get::<u64>("seed", s)?
        }
    };
    let out = PathBuf::from(params.get::<String>("out", ".".into())?);
    Ok(Ctx { params, out, seed, timings: !cli.no_timings })
}

pub fn run(cli: Cli) -> Res<()> {
    if let Some(j) = cli.jobs {
        lrpca::par::set_jobs(j).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let ctx = match &cli.command {
        Command::Gen(a) => gen(&cli, a)?,
        Command::Train(a) => train(&cli, a)?,
        Command::Solve(a) => solve_cmd(&cli, a)?,
        Command::Bench(a) => bench(&cli, a)?,
        Command::Bgsub(a) => bgsub(&cli, a)?,
    };
    ctx.finish()
}

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(CliError::Usage(msg.into()))
}

fn make_out(ctx: &Ctx) -> Res<()> {
    fs::create_dir_all(&ctx.out)?;
    Ok(())
}

/// `(n1, n2, r, alpha)` with range checks.
fn shape(p: &Params, n: usize, r: usize, alpha: f64) -> Res<(usize, usize, usize, f64)> {
    let n1 = p.get("n1", n)?;
    let n2 = p.get("n2", n)?;
    let r = p.get("r", r)?;
    let alpha = p.get("alpha", alpha)?;
    if n1 == 0 || n2 == 0 {
        return usage("matrix dimensions must be positive");
    }
    if r == 0 || r > n1.min(n2) {
        return usage(format!("rank {r} must lie in 1..={}", n1.min(n2)));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return usage(format!("alpha {alpha} must lie in [0, 1]"));
    }
    Ok((n1, n2, r, alpha))
}

fn stop_rule(p: &Params, mode: &str, tol: f64, max_iters: usize) -> Res<StopRule> {
    let mode: String = p.get("stop", mode.to_string())?;
    let mode: StopMode = mode.parse().map_err(|e: lrpca::Error| CliError::Usage(e.to_string()))?;
    let max_iters = p.get("max_iters", max_iters)?;
    let rule = match mode {
        StopMode::FixedIters => StopRule::fixed(max_iters),
        _ => StopRule { mode, tolerance: p.get("tol", tol)?, max_iters },
    };
    rule.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(rule)
}

fn load_schedule(p: &Params) -> Res<ParamSchedule> {
    let path = p.input("schedule")?;
    Ok(ParamSchedule::from_csv(&fs::read_to_string(path)?)?)
}

fn gen(cli: &Cli, a: &GenArgs) -> Res<Ctx> {
    let mut ov = Overrides::default();
    ov.shape(&a.shape);
    ov.set("pattern", a.pattern.clone());
    let ctx = context(cli, "gen", &keys(&[COMMON, SHAPE, &["pattern"]]), ov)?;
    let p = &ctx.params;
    let (n1, n2, r, alpha) = shape(p, 200, 5, 0.1)?;
    let pattern = match p.get::<String>("pattern", "global".into())?.as_str() {
        "global" => OutlierPattern::Global,
        "rowcol" => OutlierPattern::RowColumn,
        other => return usage(format!("unknown pattern `{other}`")),
    };
    make_out(&ctx)?;
    let inst = gen_instance_with(n1, n2, r, alpha, ctx.seed, pattern)?;
    for (name, m) in [("Y.bin", &inst.y), ("X_star.bin", &inst.x_star), ("S_star.bin", &inst.s_star)] {
        write_matrix(m, &ctx.out.join(name), MatrixFormat::Binary)?;
    }
    Ok(ctx)
}

fn train(cli: &Cli, a: &TrainArgs) -> Res<Ctx> {
    let mut ov = Overrides::default();
    ov.shape(&a.shape);
    ov.set("data", a.data.clone());
    ov.set("k", a.k);
    ov.set("k_bar", a.k_bar);
    ov.set("sgd_steps", a.sgd_steps);
    ov.set("learning_rate", a.learning_rate);
    ov.set("grid_instances", a.grid_instances);
    ov.set("warm_start", a.warm_start.clone());
    let own: &[&str] = &[
        "data",
        "k",
        "k_bar",
        "sgd_steps",
        "learning_rate",
        "fd_epsilon",
        "grad_clip",
        "grid_min",
        "grid_max",
        "grid_step",
        "grid_instances",
        "warm_start",
        "warm_zeta0",
        "warm_ratio",
        "initial_eta",
        "scene_width",
        "scene_height",
        "scene_frames",
    ];
    let ctx = context(cli, "train", &keys(&[COMMON, SHAPE, own]), ov)?;
    let p = &ctx.params;
    let d = TrainConfig::default();
    let warm_start = match p.get::<String>("warm_start", "oracle".into())?.as_str() {
        "oracle" => WarmStart::Oracle,
        "geometric" => WarmStart::Geometric { zeta0: p.require("warm_zeta0")?, ratio: p.get("warm_ratio", 0.5)? },
        other => return usage(format!("unknown warm start `{other}`")),
    };
    let cfg = TrainConfig {
        k: p.get("k", d.k)?,
        k_bar: p.get("k_bar", d.k_bar)?,
        sgd_steps_per_stage: p.get("sgd_steps", d.sgd_steps_per_stage)?,
        learning_rate: p.get("learning_rate", d.learning_rate)?,
        fd_epsilon: p.get("fd_epsilon", d.fd_epsilon)?,
        grid: GridSpec {
            min: p.get("grid_min", d.grid.min)?,
            max: p.get("grid_max", d.grid.max)?,
            step: p.get("grid_step", d.grid.step)?,
        },
        grid_instances: p.get("grid_instances", d.grid_instances)?,
        seed: ctx.seed,
        warm_start,
        initial_eta: p.get("initial_eta", d.initial_eta)?,
        grad_clip: p.get("grad_clip", d.grad_clip)?,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut source: Box<dyn InstanceSource> = match p.get::<String>("data", "synthetic".into())?.as_str() {
        "synthetic" => {
            let (n1, n2, r, alpha) = shape(p, 200, 5, 0.1)?;
            Box::new(SyntheticSource::new(n1, n2, r, alpha, ctx.seed))
        }
        "scene" => {
            let s = SceneSpec::default();
            let spec = SceneSpec {
                width: p.get("scene_width", s.width)?,
                height: p.get("scene_height", s.height)?,
                frames: p.get("scene_frames", s.frames)?,
                quantize: true,
                ..s
            };
            Box::new(SceneSource::new(spec, ctx.seed))
        }
        other => return usage(format!("unknown training data `{other}`")),
    };
    make_out(&ctx)?;
    let out = train_frmnn(source.as_mut(), &cfg)?;
    ctx.write("schedule.csv", out.schedule.to_csv())?;
    let mut log = String::from("stage,step,loss\n");
    for l in &out.log {
        log.push_str(&format!("{},{},{:.16e}\n", l.stage, l.step, l.loss));
    }
    ctx.write("train_log.csv", log)?;
    let mut grid = String::from("beta,phi,loss\n");
    for g in &out.grid {
        grid.push_str(&format!("{},{},{:.16e}\n", g.beta, g.phi, g.loss));
    }
    ctx.write("grid.csv", grid)?;
    Ok(ctx)
}

/// Exactly one of `schedule`, `oracle`, or `fixed_zeta`/`fixed_eta`.
fn schedule_source(p: &Params, allow_oracle: bool) -> Res<ScheduleSource> {
    let oracle = allow_oracle && p.has("oracle") && p.get::<bool>("oracle", false)?;
    let fixed = p.has("fixed_zeta") || p.has("fixed_eta");
    let learned = p.has("schedule");
    match (learned, oracle, fixed) {
        (true, false, false) => Ok(ScheduleSource::Learned(load_schedule(p)?)),
        (false, true, false) => Ok(ScheduleSource::Oracle { eta: p.get("eta", 0.5)? }),
        (false, false, true) => {
            let zeta: f64 = p.require("fixed_zeta")?;
            let eta: f64 = p.require("fixed_eta")?;
            if !(zeta >= 0.0) || !zeta.is_finite() {
                return usage(format!("fixed threshold {zeta} must be >= 0"));
            }
            Ok(ScheduleSource::Fixed { zeta, eta })
        }
        _ if allow_oracle => usage("give exactly one of --schedule, --oracle, --fixed"),
        _ => usage("give exactly one of --schedule, --fixed"),
    }
}

fn solve_cmd(cli: &Cli, a: &SolveArgs) -> Res<Ctx> {
    let mut ov = Overrides::default();
    ov.set("y", a.y.clone());
    ov.set("r", a.r);
    ov.set("schedule", a.schedule.clone());
    if a.oracle {
        ov.set("oracle", Some(true));
    }
    ov.fixed(&a.fixed);
    ov.set("truth", a.truth.clone());
    ov.stop(&a.stop);
    let own: &[&str] = &["y", "r", "schedule", "oracle", "eta", "fixed_zeta", "fixed_eta", "truth"];
    let ctx = context(cli, "solve", &keys(&[COMMON, STOP, own]), ov)?;
    let p = &ctx.params;
    let y_path = p.input("y")?;
    let r: usize = p.require("r")?;
    let truth_path = if p.has("truth") { Some(p.input("truth")?) } else { None };
    let source = schedule_source(p, true)?;
    let stop = stop_rule(p, "residual", 1e-6, 500)?;
    let y = read_matrix(&y_path, MatrixFormat::from_path(&y_path))?;
    let truth = match &truth_path {
        Some(t) => Some(read_matrix(t, MatrixFormat::from_path(t))?),
        None => None,
    };
    make_out(&ctx)?;
    let out = solve(&y, r, &source, &stop, truth.as_ref(), ctx.seed)?;
    write_matrix(&out.low_rank, &ctx.out.join("X_hat.bin"), MatrixFormat::Binary)?;
    write_matrix(&out.sparse, &ctx.out.join("S_hat.bin"), MatrixFormat::Binary)?;
    ctx.write("trace.csv", out.trace.to_csv(ctx.timings))?;
    Ok(ctx)
}

fn solver_specs(p: &Params, default: &str) -> Res<Vec<SolverSpec>> {
    let names: Vec<String> = p.list("solvers", default)?;
    names
        .iter()
        .map(|name| match name.as_str() {
            "lrpca" => Ok(SolverSpec::Lrpca(ScheduleSource::Learned(load_schedule(p)?))),
            "lrpca-oracle" => Ok(SolverSpec::Lrpca(ScheduleSource::Oracle { eta: p.get("eta", 0.5)? })),
            "scaledgd" => {
                let raw: String = p.get("alpha_tilde", "2alpha".into())?;
                let alpha_tilde = match raw.strip_suffix("alpha") {
                    Some(c) => AlphaTilde::TimesAlpha(parse_num(c, "alpha_tilde")?),
                    None => AlphaTilde::Fixed(parse_num(&raw, "alpha_tilde")?),
                };
                Ok(SolverSpec::ScaledGd { alpha_tilde, eta: p.get("scaledgd_eta", 0.5)? })
            }
            other => usage(format!("unknown solver `{other}`")),
        })
        .collect()
}

fn parse_num(s: &str, key: &str) -> Res<f64> {
    s.trim().parse().map_err(|_| CliError::Usage(format!("bad value `{s}` for `{key}`")))
}

fn square(p: &Params, n: usize, r: usize, alpha: f64) -> Res<(usize, usize, f64)> {
    let (n1, n2, r, alpha) = shape(p, n, r, alpha)?;
    if n1 != n2 {
        return usage("this benchmark uses square instances: set n");
    }
    Ok((n1, r, alpha))
}

fn bench(cli: &Cli, a: &BenchArgs) -> Res<Ctx> {
    let mut ov = Overrides::default();
    ov.set("kind", a.kind.clone());
    ov.shape(&a.shape);
    ov.set("solvers", a.solvers.clone());
    ov.set("schedule", a.schedule.clone());
    ov.set("alphas", a.alphas.clone());
    ov.set("trials", a.trials);
    ov.set("n_list", a.n_list.clone());
    ov.set("r_list", a.r_list.clone());
    ov.set("iters", a.iters);
    ov.set("targets", a.targets.clone());
    ov.stop(&a.stop);
    let own: &[&str] = &[
        "kind",
        "solvers",
        "schedule",
        "eta",
        "alpha_tilde",
        "scaledgd_eta",
        "alphas",
        "trials",
        "success_tol",
        "n_list",
        "r_list",
        "iters",
        "base_n",
        "base_r",
        "targets",
    ];
    let ctx = context(cli, "bench", &keys(&[COMMON, SHAPE, STOP, own]), ov)?;
    let p = &ctx.params;
    let kind: String = p.require("kind")?;
    match kind.as_str() {
        "convergence" => {
            let (n1, n2, r, alpha) = shape(p, 500, 5, 0.1)?;
            let specs = solver_specs(p, "lrpca-oracle,scaledgd")?;
            let stop = stop_rule(p, "residual", 1e-6, 300)?;
            make_out(&ctx)?;
            let inst = gen_instance_with(n1, n2, r, alpha, ctx.seed, OutlierPattern::Global)?;
            let out = convergence_bench(&specs, &inst, &stop, ctx.seed)?;
            ctx.write("report.csv", out.report.to_csv(ctx.timings))?;
            for (name, trace) in &out.traces {
                ctx.write(&format!("trace_{name}.csv"), trace.to_csv(ctx.timings))?;
            }
        }
        "recoverability" => {
            let (n, r, _) = square(p, 500, 5, 0.1)?;
            let alphas: Vec<f64> = p.list("alphas", "0.4:0.7:0.05")?;
            if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return usage("alphas must lie in [0, 1]");
            }
            let specs = solver_specs(p, "lrpca-oracle,scaledgd")?;
            let setup = TrialSetup {
                n,
                r,
                trials: p.get("trials", 10)?,
                seed: ctx.seed,
                stop: stop_rule(p, "residual", 1e-6, 300)?,
            };
            let tol = p.get("success_tol", 1e-3)?;
            make_out(&ctx)?;
            let table = recoverability_sweep(&alphas, &specs, &setup, tol)?;
            ctx.write("report.csv", table.to_csv())?;
            ctx.write("trials.csv", table.report.to_csv(ctx.timings))?;
        }
        "runtime" => {
            let n_list: Vec<usize> = p.list("n_list", "1000,2000")?;
            let r_list: Vec<usize> = p.list("r_list", "5,10,20")?;
            let iters = p.get("iters", 20)?;
            make_out(&ctx)?;
            let rows = runtime_scaling_bench(&n_list, &r_list, iters, ctx.seed)?;
            ctx.write("report.csv", runtime_csv(&rows))?;
        }
        "generalization" => {
            let theta = load_schedule(p)?;
            let base = (p.require::<usize>("base_n")?, p.require::<usize>("base_r")?);
            let pairs: Vec<String> = p.list("targets", "")?;
            let targets = pairs
                .iter()
                .map(|s| {
                    let (n, r) = s.split_once(':').ok_or_else(|| CliError::Usage(format!("target `{s}` is not n:r")))?;
                    Ok((parse_num(n, "targets")? as usize, parse_num(r, "targets")? as usize))
                })
                .collect::<Res<Vec<_>>>()?;
            let alpha = p.get("alpha", 0.1)?;
            let setup = TrialSetup {
                n: 0,
                r: 0,
                trials: p.get("trials", 5)?,
                seed: ctx.seed,
                stop: stop_rule(p, "residual", 1e-4, 300)?,
            };
            make_out(&ctx)?;
            let rows = generalization_bench(&theta, base, &targets, alpha, &setup)?;
            ctx.write("report.csv", generalization_csv(&rows))?;
        }
        other => return usage(format!("unknown bench kind `{other}`")),
    }
    Ok(ctx)
}

fn has_pgm(dir: &Path) -> bool {
    fs::read_dir(dir)
        .map(|rd| rd.flatten().any(|e| e.path().extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm"))))
        .unwrap_or(false)
}

fn bgsub(cli: &Cli, a: &BgsubArgs) -> Res<Ctx> {
    let mut ov = Overrides::default();
    ov.set("frames", a.frames.clone());
    ov.set("r", a.r);
    ov.set("schedule", a.schedule.clone());
    ov.fixed(&a.fixed);
    ov.stop(&a.stop);
    let own: &[&str] = &["frames", "r", "schedule", "fixed_zeta", "fixed_eta"];
    let ctx = context(cli, "bgsub", &keys(&[COMMON, STOP, own]), ov)?;
    let p = &ctx.params;
    let dir = p.input("frames")?;
    if !has_pgm(&dir) {
        return usage(format!("no .pgm frames in {}", dir.display()));
    }
    let r = p.get("r", 2)?;
    let source = schedule_source(p, false)?;
    let stop = stop_rule(p, "change", 1e-3, 500)?;
    let seq = read_pgm_sequence(&dir)?;
    if r == 0 || r > seq.len() {
        return usage(format!("rank {r} must lie in 1..={}", seq.len()));
    }
    make_out(&ctx)?;
    let split = background_subtract(&seq, r, &source, Some(stop), ctx.seed)?;
    for (t, (bg, fg)) in split.background.frames().iter().zip(split.foreground.frames()).enumerate() {
        write_pgm(bg, &ctx.out.join(format!("bg_{t:05}.pgm")))?;
        write_pgm(fg, &ctx.out.join(format!("fg_{t:05}.pgm")))?;
    }
    ctx.write("trace.csv", split.outcome.trace.to_csv(ctx.timings))?;
    Ok(ctx)
}
