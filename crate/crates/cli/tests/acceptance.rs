//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fail.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lrpca::learn::{train_frmnn, TrainConfig};
use lrpca::mat::{matrix_norm, truncated_svd, DenseMatrix, NormKind};
use lrpca::media::{
    background_subtract, frames_to_matrix, read_pgm_sequence, synthetic_scene, write_pgm, SceneSource, SceneSpec,
};
use lrpca::ops::{soft_threshold, sparsify_top_fraction, support_of};
use lrpca::solver::{lrpca_step, relative_error, residual_rel, spectral_init, ScheduleSource, StopRule};
use lrpca::synth::bench::{
    mean_iterations, recoverability_sweep, runtime_scaling_bench, AlphaTilde, SolverSpec, TrialSetup,
};
use lrpca::synth::{derive_seed, gen_instance, gen_instance_with, OutlierPattern, SyntheticSource};
use lrpca::ParamSchedule;
use lrpca_testkit::{best_rank, brute_sparsify, frobenius, frobenius_distance, Dense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

// C1, C2
const SPARSIFY_BUDGET_S: f64 = 1.0;
const BOUND_SLACK: f64 = 1e-12;
const BOUND_BUDGET_S: f64 = 10.0;
// C3
const NORM_SLACK: f64 = 1e-10;
// C4
const SVD_TOL: f64 = 1e-9;
// C5
const ORACLE_TARGET: f64 = 1e-6;
const ORACLE_MAX_ITERS: usize = 60;
const ORACLE_RATIO: f64 = 0.9;
const ORACLE_BUDGET_S: f64 = 30.0;
// C6
const SPEEDUP_RATIO: f64 = 0.8;
const RESIDUAL_STOP: f64 = 1e-4;
const TRAIN_BUDGET_S: f64 = 1800.0;
// C7
const SUCCESS_ERR: f64 = 1e-3;
const LRPCA_MIN_SUCCESS: usize = 8;
const SCALEDGD_MAX_SUCCESS: usize = 2;
// C8
const RANK_RATIO: f64 = 2.5;
const SIZE_RATIO: f64 = 5.5;
const RUNTIME_BUDGET_S: f64 = 120.0;
// C9
const GEN_SLACK_N: f64 = 2.0;
const GEN_SLACK_R: f64 = 3.0;
// C10
const MASK_THRESHOLD: f64 = 0.1;
const MASK_MIN: f64 = 0.9;
const BG_RESIDUAL: f64 = 1e-3;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, ok: bool, detail: String) {
        println!("{} C{id} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn to_dense(m: &DenseMatrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn c1(rep: &mut Report) {
    let mut g = rng(SEED ^ 1);
    let t = Instant::now();
    let mut mismatches = 0;
    for _ in 0..500 {
        // distinct magnitudes: a shuffled ladder with random signs
        let mut mags: Vec<f64> = (1..=64).map(|i| i as f64 + g.gen_range(0.0..0.5)).collect();
        for i in (1..64).rev() {
            mags.swap(i, g.gen_range(0..=i));
        }
        let data = mags.iter().map(|m| if g.gen_bool(0.5) { *m } else { -*m }).collect();
        let m = DenseMatrix::new(8, 8, data).unwrap();
        let alpha_tilde = g.gen_range(0.0..=1.0);
        let fast = sparsify_top_fraction(&m, alpha_tilde).unwrap();
        let slow = DenseMatrix::new(8, 8, brute_sparsify(&to_dense(&m), alpha_tilde).concat()).unwrap();
        mismatches += usize::from(fast != slow);
    }
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        1,
        "sparsify vs full-sort oracle",
        mismatches == 0 && secs < SPARSIFY_BUDGET_S,
        format!("{mismatches}/500 mismatches, {secs:.3}s (budget {SPARSIFY_BUDGET_S}s)"),
    );
}

fn c2(rep: &mut Report) {
    let mut g = rng(SEED ^ 2);
    let t = Instant::now();
    let (mut contained, mut bounded) = (0, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (n1, n2) = (g.gen_range(2..30), g.gen_range(2..30));
        let density = g.gen_range(0.0..0.5);
        let scale = g.gen_range(0.01..10.0);
        let x_star = DenseMatrix::from_fn(n1, n2, |_, _| g.gen_range(-1.0..1.0));
        let s_star = DenseMatrix::from_fn(n1, n2, |_, _| {
            if g.gen_bool(density) {
                g.gen_range(-20.0..20.0)
            } else {
                0.0
            }
        });
        let noise = DenseMatrix::from_fn(n1, n2, |_, _| g.gen_range(-scale..scale));
        let x_k = x_star.add(&noise).unwrap();
        let zeta = x_star.max_abs_diff(&x_k).unwrap();
        let y = x_star.add(&s_star).unwrap();
        let s = soft_threshold(&y.sub(&x_k).unwrap(), zeta).unwrap();
        contained += usize::from(support_of(&s, 0.0).is_subset(&support_of(&s_star, 0.0)));
        let gap = s.max_abs_diff(&s_star).unwrap() - 2.0 * zeta;
        worst = worst.max(gap);
        bounded += usize::from(gap <= BOUND_SLACK);
    }
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        2,
        "thresholded support and error bound",
        contained == 1000 && bounded == 1000 && secs < BOUND_BUDGET_S,
        format!(
            "containment {contained}/1000, bound {bounded}/1000 (max excess {worst:.1e}, slack {BOUND_SLACK:e}), {secs:.2}s"
        ),
    );
}

fn c3(rep: &mut Report) {
    let n = 200;
    let mut ok = 0;
    let mut total = 0;
    for (i, alpha) in [0.05, 0.1, 0.2].into_iter().enumerate() {
        let count = if i < 2 { 67 } else { 66 };
        for t in 0..count {
            let inst = gen_instance_with(n, n, 1, alpha, derive_seed(SEED ^ 3, (i * 1000 + t) as u64), OutlierPattern::RowColumn)
                .unwrap();
            let s = &inst.s_star;
            let an = (alpha * n as f64).floor();
            let inf = s.max_abs();
            let spectral = matrix_norm(s, NormKind::Spectral).unwrap() <= an * inf * (1.0 + NORM_SLACK);
            let two_inf = matrix_norm(s, NormKind::TwoInf).unwrap() <= an.sqrt() * inf * (1.0 + NORM_SLACK);
            let one_inf = matrix_norm(s, NormKind::OneInf).unwrap() <= an * inf * (1.0 + NORM_SLACK);
            ok += usize::from(spectral && two_inf && one_inf);
            total += 1;
        }
    }
    rep.line(3, "sparse-matrix norm bounds", ok == total, format!("{ok}/{total} matrices satisfy all three bounds"));
}

fn c4(rep: &mut Report) {
    let mut g = rng(SEED ^ 4);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let r = [1, 3, 5][t % 3];
        let m = DenseMatrix::from_fn(30, 30, |_, _| g.gen_range(-1.0..1.0));
        let svd = truncated_svd(&m, r, t as u64).unwrap();
        let oracle = best_rank(&to_dense(&m), r);
        worst = worst.max(frobenius_distance(&to_dense(&svd.reconstruct()), &oracle) / frobenius(&oracle));
    }
    rep.line(4, "truncated SVD vs Jacobi oracle", worst <= SVD_TOL, format!("max rel error {worst:.2e} (tol {SVD_TOL:e})"));
}

fn c5(rep: &mut Report) {
    let t = Instant::now();
    let inst = gen_instance(500, 500, 5, 0.1, SEED ^ 5).unwrap();
    let star = support_of(&inst.s_star, 0.0);
    let mut state = spectral_init(&inst.y, 5, inst.x_star.max_abs(), 0).unwrap();
    let mut contained = support_of(&state.s, 0.0).is_subset(&star);
    let mut errs = vec![relative_error(state.low_rank(), &inst.x_star).unwrap()];
    while errs.len() <= ORACLE_MAX_ITERS && *errs.last().unwrap() >= ORACLE_TARGET {
        let zeta = state.low_rank().max_abs_diff(&inst.x_star).unwrap();
        state = lrpca_step(&state, &inst.y, zeta, 0.5).unwrap();
        contained &= support_of(&state.s, 0.0).is_subset(&star);
        errs.push(relative_error(state.low_rank(), &inst.x_star).unwrap());
    }
    let iters = errs.len() - 1;
    let ratio = errs.windows(2).skip(3).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    let reached = *errs.last().unwrap() < ORACLE_TARGET;
    rep.line(
        5,
        "oracle-mode convergence",
        reached && iters <= ORACLE_MAX_ITERS && ratio <= ORACLE_RATIO && contained && secs < ORACLE_BUDGET_S,
        format!(
            "rel err {:.1e} after {iters} iterations (cap {ORACLE_MAX_ITERS}), max ratio after iteration 3 {ratio:.3} (cap {ORACLE_RATIO}), containment {contained}, {secs:.1}s",
            errs.last().unwrap()
        ),
    );
}

fn reference_config(seed: u64) -> TrainConfig {
    TrainConfig { k: 10, k_bar: 15, sgd_steps_per_stage: 2, grid_instances: 5, seed, ..TrainConfig::default() }
}

fn train(n: usize, r: usize, alpha: f64, cfg: &TrainConfig) -> (ParamSchedule, f64) {
    let t = Instant::now();
    let out = train_frmnn(&mut SyntheticSource::new(n, n, r, alpha, cfg.seed ^ 0xDA7A), cfg).unwrap();
    (out.schedule, t.elapsed().as_secs_f64())
}

fn c6(rep: &mut Report) -> ParamSchedule {
    let (schedule, secs) = train(500, 5, 0.1, &reference_config(SEED ^ 6));
    let stop = StopRule::residual(RESIDUAL_STOP, 500);
    let held_out = TrialSetup { n: 500, r: 5, trials: 20, seed: SEED ^ 0x6E1D, stop };
    let learned = mean_iterations(&schedule, 0.1, &held_out).unwrap();
    let baseline = SolverSpec::ScaledGd { alpha_tilde: AlphaTilde::Fixed(0.2), eta: 0.5 };
    let mut total = 0usize;
    for t in 0..held_out.trials {
        let inst = gen_instance(500, 500, 5, 0.1, derive_seed(held_out.seed, t as u64)).unwrap();
        total += baseline.run(&inst, &stop, inst.seed).unwrap().iterations;
    }
    let scaledgd = total as f64 / held_out.trials as f64;
    rep.line(
        6,
        "trained schedule vs ScaledGD",
        learned <= SPEEDUP_RATIO * scaledgd && secs < TRAIN_BUDGET_S,
        format!(
            "mean iterations to residual {RESIDUAL_STOP:e}: trained {learned:.1}, ScaledGD {scaledgd:.1} (ratio {:.2}, cap {SPEEDUP_RATIO}); training {secs:.0}s",
            learned / scaledgd
        ),
    );
    schedule
}

fn c7(rep: &mut Report) {
    // a K̄ = 15 tail freezes short of 1e-3 at this outlier level; a
    // longer grid horizon lets the search pick a slower decay
    let cfg = TrainConfig { k: 10, k_bar: 40, sgd_steps_per_stage: 2, grid_instances: 2, seed: SEED ^ 7, ..TrainConfig::default() };
    let (schedule, secs) = train(500, 5, 0.45, &cfg);
    let setup = TrialSetup { n: 500, r: 5, trials: 10, seed: SEED ^ 0x7E57, stop: StopRule::residual(1e-7, 300) };
    let lrpca = [SolverSpec::Lrpca(ScheduleSource::Learned(schedule))];
    let ours = recoverability_sweep(&[0.45], &lrpca, &setup, SUCCESS_ERR).unwrap().rows[0].1[0];
    let baseline = [SolverSpec::scaledgd_default()];
    let theirs = recoverability_sweep(&[0.5], &baseline, &setup, SUCCESS_ERR).unwrap().rows[0].1[0];
    rep.line(
        7,
        "recoverability at high outlier fraction",
        ours >= LRPCA_MIN_SUCCESS && theirs <= SCALEDGD_MAX_SUCCESS,
        format!(
            "trained LRPCA {ours}/10 at alpha 0.45 (need >= {LRPCA_MIN_SUCCESS}), ScaledGD {theirs}/10 at alpha 0.5 (need <= {SCALEDGD_MAX_SUCCESS}); training {secs:.0}s"
        ),
    );
    let tuned = [SolverSpec::ScaledGd { alpha_tilde: AlphaTilde::Fixed(0.6), eta: 0.5 }];
    let tuned_ok = recoverability_sweep(&[0.5], &tuned, &setup, SUCCESS_ERR).unwrap().rows[0].1[0];
    println!("INFO C7 ScaledGD with alpha_tilde 0.6 instead of min(2 alpha, 1) = 1: {tuned_ok}/10 at alpha 0.5");
}

fn c8(rep: &mut Report) {
    let t = Instant::now();
    let rows = runtime_scaling_bench(&[1000, 2000], &[5, 10], 10, SEED ^ 8).unwrap();
    let median = |n, r| rows.iter().find(|row| row.n == n && row.r == r).unwrap().median_ms;
    let rank = median(2000, 10) / median(2000, 5);
    let size = median(2000, 5) / median(1000, 5);
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        8,
        "per-iteration runtime scaling",
        rank <= RANK_RATIO && size <= SIZE_RATIO && secs < RUNTIME_BUDGET_S,
        format!(
            "r 5->10 at n 2000: {rank:.2}x (cap {RANK_RATIO}), n 1000->2000 at r 5: {size:.2}x (cap {SIZE_RATIO}); medians {:.1}/{:.1}/{:.1} ms, {secs:.0}s",
            median(1000, 5),
            median(2000, 5),
            median(2000, 10)
        ),
    );
}

fn c9(rep: &mut Report, base: &ParamSchedule) {
    let stop = StopRule::residual(RESIDUAL_STOP, 500);
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, r, slack, grid) in [(1500, 5, GEN_SLACK_N, 3), (500, 15, GEN_SLACK_R, 5)] {
        let cfg = TrainConfig { grid_instances: grid, ..reference_config(SEED ^ 9 ^ (n * r) as u64) };
        let (target, secs) = train(n, r, 0.1, &cfg);
        let setup = TrialSetup { n, r, trials: 5, seed: SEED ^ 0x9E1D, stop };
        let rescaled = mean_iterations(&base.rescale(500, 5, n, r).unwrap(), 0.1, &setup).unwrap();
        let trained = mean_iterations(&target, 0.1, &setup).unwrap();
        ok &= rescaled <= trained + slack;
        parts.push(format!(
            "n {n} r {r}: base-trained {rescaled:.1} vs target-trained {trained:.1} (slack +{slack}, target training {secs:.0}s)"
        ));
    }
    rep.line(9, "generalization from n 500, r 5", ok, parts.join("; "));
}

fn c10(rep: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec::default();
    let cfg = TrainConfig { k: 5, k_bar: 10, sgd_steps_per_stage: 5, grid_instances: 5, seed: SEED ^ 10, ..TrainConfig::default() };
    let schedule = train_frmnn(&mut SceneSource::new(spec, SEED ^ 0x5CE), &cfg).unwrap().schedule;
    let scene = synthetic_scene(&SceneSpec { quantize: true, ..spec }, SEED ^ 0xB10B).unwrap();
    for (t, f) in scene.frames.frames().iter().enumerate() {
        write_pgm(f, &dir.path().join(format!("frame_{t:04}.pgm"))).unwrap();
    }
    let seq = read_pgm_sequence(dir.path()).unwrap();
    let split = background_subtract(&seq, 2, &ScheduleSource::Learned(schedule), None, 0).unwrap();
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (fg, mask) in split.foreground.frames().iter().zip(&scene.masks) {
        for (v, m) in fg.pixels.iter().zip(mask) {
            match (*v > MASK_THRESHOLD, *m) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
    }
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    let recall = tp as f64 / (tp + fneg).max(1) as f64;
    let y = frames_to_matrix(&seq);
    let residual = residual_rel(&y, &split.outcome.low_rank, &split.outcome.sparse).unwrap();
    rep.line(
        10,
        "background subtraction on a moving-blob scene",
        precision >= MASK_MIN && recall >= MASK_MIN && residual < BG_RESIDUAL,
        format!(
            "precision {precision:.3}, recall {recall:.3} (min {MASK_MIN}), residual {residual:.1e} (cap {BG_RESIDUAL:e}) after {} iterations",
            split.outcome.iterations
        ),
    );
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_lrpca")).args(args).env_remove("LRPCA_SEED").status().unwrap().success()
}

/// Every file except the manifest, which names its own output directory.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .flatten()
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .filter(|(name, _)| name != "manifest.txt")
        .collect();
    files.sort();
    files
}

fn c11(rep: &mut Report) {
    let root = tempfile::tempdir().unwrap();
    let frames = root.path().join("frames");
    fs::create_dir(&frames).unwrap();
    let scene = synthetic_scene(&SceneSpec { frames: 12, quantize: true, ..SceneSpec::default() }, 3).unwrap();
    for (t, f) in scene.frames.frames().iter().enumerate() {
        write_pgm(f, &frames.join(format!("{t:03}.pgm"))).unwrap();
    }
    let p = |s: &Path| s.to_str().unwrap().to_string();
    let mut identical = 0;
    let mut checked = 0;
    for round in ["a", "b"] {
        let d = root.path().join(round);
        let g = d.join("gen");
        let t = d.join("train");
        let runs: Vec<Vec<String>> = vec![
            vec!["gen", "--n", "60", "--r", "2", "--alpha", "0.1", "--seed", "5", "--out", &p(&g)]
                .into_iter()
                .map(String::from)
                .collect(),
            ["train", "--n", "40", "--r", "2", "--k", "3", "--k-bar", "5", "--sgd-steps", "2", "--grid-instances", "2"]
                .into_iter()
                .map(String::from)
                .chain(["--seed".into(), "5".into(), "--out".into(), p(&t)])
                .collect(),
            vec![
                "solve".into(),
                "--y".into(),
                p(&g.join("Y.bin")),
                "--r".into(),
                "2".into(),
                "--schedule".into(),
                p(&t.join("schedule.csv")),
                "--no-timings".into(),
                "--seed".into(),
                "5".into(),
                "--out".into(),
                p(&d.join("solve")),
            ],
            ["bench", "recoverability", "--n", "50", "--r", "2", "--alphas", "0.1,0.3", "--trials", "2", "--no-timings"]
                .into_iter()
                .map(String::from)
                .chain(["--seed".into(), "5".into(), "--out".into(), p(&d.join("bench"))])
                .collect(),
            vec![
                "bgsub".into(),
                "--frames".into(),
                p(&frames),
                "--r".into(),
                "2".into(),
                "--schedule".into(),
                p(&t.join("schedule.csv")),
                "--no-timings".into(),
                "--out".into(),
                p(&d.join("bgsub")),
            ],
        ];
        for args in &runs {
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            if !run_cli(&args) {
                rep.line(11, "CLI determinism", false, format!("`lrpca {}` failed", args.join(" ")));
                return;
            }
        }
    }
    for sub in ["gen", "train", "solve", "bench", "bgsub"] {
        let a = outputs(&root.path().join("a").join(sub));
        let b = outputs(&root.path().join("b").join(sub));
        checked += a.len();
        identical += a.iter().zip(&b).filter(|(x, y)| x == y).count();
        if a.len() != b.len() {
            checked += 1;
        }
    }
    rep.line(
        11,
        "CLI determinism",
        identical == checked && checked > 0,
        format!("{identical}/{checked} output files byte-identical across two seeded runs"),
    );
}

fn main() {
    let mut rep = Report { failed: 0 };
    c1(&mut rep);
    c2(&mut rep);
    c3(&mut rep);
    c4(&mut rep);
    c5(&mut rep);
    let base = c6(&mut rep);
    c7(&mut rep);
    c8(&mut rep);
    c9(&mut rep, &base);
    c10(&mut rep);
    c11(&mut rep);
    println!("{} of 11 criteria passed", 11 - rep.failed);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}
