//! The acceptance suite: nine end-to-end criteria, each reported as one
//! PASS/FAIL line. Used by `mflq verify` and by the `acceptance` test target.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use mflq::backward::{check_bsde_estimate, solve_mfbsde, BsdeOptions};
use mflq::control::{
    evaluate_cost, example31_oracle, example31_spec, probe_direction, quadratic_expansion_check, ScalarProfile,
};
use mflq::forward::{check_sde_estimate, simulate_mfsde, ControlInput, MeanMode};
use mflq::hamiltonian::{
    continuation_solve, prepare, stability_check, CoupledSystem, HamiltonianOptions, TransformMode,
};
use mflq::model::{problem_to_json, random_problem};
use mflq::spectral::{admissible_windows, check_pd, compute_kappas, compute_kappas_transformed, DELTA_PD};
use mflq::{
    CostSet, ForcingTuple, InitialState, MatrixTrack, Process, ProblemSpec, RandomProblem, TimeGrid,
};

use crate::commands::{self, example_errors, load_problem};
use crate::config::{Cli, RunConfig};
use crate::error::{RunError, RunResult};
use crate::output::OutputDir;
use crate::pipeline::{self, noise_bank};

pub struct Context {
    /// scratch directory for problem files and run outputs
    pub root: PathBuf,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {} {} {} ({:.1}s): {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.seconds,
            self.detail
        )
    }
}

type Check = fn(&Context) -> RunResult<(bool, String)>;

pub const CRITERIA: [(u8, &str, Check); 9] = [
    (1, "worked example end-to-end", c1_example),
    (2, "dissipation constants of the worked example", c2_kappas),
    (3, "block and Schur definiteness tests agree", c3_pd_agreement),
    (4, "quadratic expansion identity", c4_expansion),
    (5, "cost invariance under the cross-term transform", c5_transform_cost),
    (6, "forward, backward and stability estimates", c6_estimates),
    (7, "untransformed worked example outside the weighted space", c7_non_membership),
    (8, "backward truncation consistency", c8_truncation),
    (9, "byte-identical reruns", c9_determinism),
];

/// Run the selected criteria (all when `only` is empty), in order.
pub fn run(ctx: &Context, only: &[u8]) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .filter(|(id, _, _)| only.is_empty() || only.contains(id))
        .map(|&(id, title, check)| run_one(ctx, id, title, check))
        .collect()
}

fn run_one(ctx: &Context, id: u8, title: &str, check: Check) -> CriterionOutcome {
    let start = Instant::now();
    let (pass, detail) = match check(ctx) {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome { id, title: title.to_string(), pass, detail, seconds: start.elapsed().as_secs_f64() }
}

fn scratch(ctx: &Context, name: &str) -> RunResult<PathBuf> {
    let dir = ctx.root.join(name);
    std::fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.display().to_string(), source })?;
    Ok(dir)
}

fn write_problem(dir: &Path, name: &str, spec: &ProblemSpec) -> RunResult<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, problem_to_json(spec)).map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

/// Parse a command line exactly as the binary would.
fn parse_cli<I, S>(args: I) -> RunResult<Cli>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    Cli::try_parse_from(args).map_err(|e| RunError::Usage(e.to_string()))
}

fn ex31(rho: f64, horizon: f64, dt: f64, weight_k: f64) -> RunResult<ProblemSpec> {
    let grid = TimeGrid::new(0.0, horizon, dt)?;
    Ok(example31_spec(rho, &ScalarProfile::Constant(0.0), 1.0, grid, weight_k)?)
}

fn deterministic(paths: usize, values: &[f64]) -> RunResult<Process> {
    Ok(Process::from_fn(paths, values.len(), 1, |k| vec![values[k]])?)
}

fn c1_example(ctx: &Context) -> RunResult<(bool, String)> {
    let dir = scratch(ctx, "c1")?;
    let file = write_problem(&dir, "example31.json", &ex31(1.0, 20.0, 1e-3, 0.0)?)?;
    let seed = ctx.seed.to_string();
    let out = dir.join("out");
    let cli = parse_cli([
        OsString::from("mflq"),
        "optimize".into(),
        file.clone().into(),
        "--transform".into(),
        "auto".into(),
        "--T".into(),
        "20".into(),
        "--dt".into(),
        "1e-3".into(),
        "--K".into(),
        "0".into(),
        "--paths".into(),
        "8".into(),
        "--seed".into(),
        seed.into(),
        "--out".into(),
        out.into(),
    ])?;
    let cfg = RunConfig::resolve(&cli.command, &cli.run)?;
    let start = Instant::now();
    let spec = cfg.apply(load_problem(&file)?)?;
    let mut dir_out = OutputDir::create(Path::new(&cfg.out))?;
    let run = commands::optimize(&spec, &cfg, 8, &mut dir_out)?;
    let seconds = start.elapsed().as_secs_f64();
    let (e, csv) = example_errors(&spec, 1.0, 1.0, &run)?;
    dir_out.write_csv("example31.csv", &csv)?;
    dir_out.finish("optimize", &cfg, 0)?;
    let pass = e.pass && seconds <= 60.0;
    Ok((
        pass,
        format!(
            "sup|x-e^(-s/2)| {:.2e}, sup|u*+e^(-s/2)| {:.2e}, |y|+|z| {:.2e}, J {:.2e}, {seconds:.1}s",
            e.sup_x, e.sup_u, e.norm_yz, e.cost
        ),
    ))
}

fn c2_kappas(_: &Context) -> RunResult<(bool, String)> {
    let mut worst = 0.0f64;
    for rho in [0.5, 1.0, 2.0] {
        for a in [0.0, 0.7] {
            let grid = TimeGrid::new(0.0, 1.0, 0.1)?;
            let spec = example31_spec(rho, &ScalarProfile::Constant(a), 1.0, grid, 0.0)?;
            let k = compute_kappas(&spec)?;
            let t = compute_kappas_transformed(&spec)?;
            for (got, want) in [
                (k.kappa1, 2.0 * rho),
                (k.kappa2, rho),
                (k.kappa, rho),
                (t.kappa1, rho / 2.0),
                (t.kappa2, rho / 2.0),
                (t.kappa, rho / 2.0),
            ] {
                worst = worst.max((got - want).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("max abs error {worst:.1e} over rho in {{0.5, 1, 2}}, a in {{0, 0.7}}")))
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// One (Q, S, R) block of a given kind: 0 strictly definite, 1 shifted and
/// often indefinite, 2 Schur complement exactly singular, 3 degenerate R,
/// 4 just outside the boundary.
fn cost_block(rng: &mut ChaCha8Rng, n: usize, m: usize, kind: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let g = uniform(rng, n, n);
    let h = uniform(rng, m, m);
    let s = uniform(rng, m, n);
    let v = uniform(rng, n, 1);
    let r_pd = &h * h.transpose() + DMatrix::identity(m, m) * 0.5;
    let schur_base = |r: &DMatrix<f64>| sym(s.transpose() * r.clone().try_inverse().expect("definite") * &s);
    match kind {
        0 => (sym(&g * g.transpose() + schur_base(&r_pd)) + DMatrix::identity(n, n) * 0.1, s.clone(), r_pd),
        1 => {
            let shift = rng.random_range(0.0..1.5);
            (sym(&g * g.transpose()) - DMatrix::identity(n, n) * shift, s.clone(), r_pd)
        }
        2 => (schur_base(&r_pd) + sym(&v * v.transpose()), s.clone(), r_pd),
        3 => {
            let w = uniform(rng, m, 1);
            (sym(&g * g.transpose()), s.clone(), sym(&w * w.transpose()) * rng.random_range(-1.0..1.0))
        }
        _ => (schur_base(&r_pd) - sym(&v * v.transpose()) * 1e-3, s.clone(), r_pd),
    }
}

fn c3_pd_agreement(ctx: &Context) -> RunResult<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x5eed_0003);
    let (mut agree, mut passed, total) = (0usize, 0usize, 1000usize);
    let mut first_disagreement = None;
    for i in 0..total {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let (q1, s1, r1) = cost_block(&mut rng, n, m, i % 5);
        let (q2, s2, r2) = cost_block(&mut rng, n, m, (i / 5) % 5);
        let c = |mat: DMatrix<f64>| MatrixTrack::Constant(mat);
        let cost = CostSet {
            state_weight: c(q1.clone()),
            state_weight_mean: c(&q2 - &q1),
            cross_weight: c(s1.clone()),
            cross_weight_mean: c(&s2 - &s1),
            control_weight: c(r1.clone()),
            control_weight_mean: c(&r2 - &r1),
        };
        let v = check_pd(&cost, DELTA_PD)?;
        if v.agree {
            agree += 1;
        } else if first_disagreement.is_none() {
            first_disagreement = Some(i);
        }
        passed += usize::from(v.pass);
    }
    let mixed = passed > total / 10 && passed < total - total / 10;
    let mut detail = format!("{agree}/{total} agree, {passed} pass and {} fail", total - passed);
    if let Some(i) = first_disagreement {
        let _ = write!(detail, ", first disagreement at case {i}");
    }
    Ok((agree == total && mixed, detail))
}

fn c4_expansion(ctx: &Context) -> RunResult<(bool, String)> {
    let paths = 1000;
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let cfg = RandomProblem {
            n: 1 + (i % 2) as usize,
            m: 1 + ((i / 2) % 2) as usize,
            jump_atoms: (i % 3) as usize,
            horizon: 1.0,
            dt: 1e-3,
            ..Default::default()
        };
        let spec = random_problem(ctx.seed.wrapping_mul(1000).wrapping_add(400 + i), &cfg)?;
        let bank = noise_bank(&spec, ctx.seed.wrapping_add(i), paths)?;
        let points = spec.grid.points();
        let u = probe_direction(ctx.seed.wrapping_add(4100 + i), paths, points, cfg.m, 0.95, 1.0)?;
        let v = probe_direction(ctx.seed.wrapping_add(4200 + i), paths, points, cfg.m, 0.9, 1.0)?;
        let rows = quadratic_expansion_check(&spec, &u, &v, 0, &[1e-2, 1e-1], &bank, MeanMode::ExactMean, None)?;
        worst = rows.iter().map(|r| r.identity_error).fold(worst, f64::max);
    }
    let spec = ex31(1.0, 4.0, 1e-3, 0.0)?;
    let bank = noise_bank(&spec, ctx.seed, paths)?;
    let oracle = example31_oracle(1.0, &ScalarProfile::Constant(0.0), 1.0, &spec.grid)?;
    let u = deterministic(paths, &oracle.u)?;
    let decay: Vec<f64> = (0..spec.grid.points()).map(|k| (-spec.grid.s(k)).exp()).collect();
    let v = deterministic(paths, &decay)?;
    let rows = quadratic_expansion_check(&spec, &u, &v, 0, &[1e-2], &bank, MeanMode::ExactMean, None)?;
    let example = rows.iter().map(|r| r.identity_error).fold(0.0, f64::max);
    worst = worst.max(example);
    Ok((worst <= 1e-6, format!("max relative identity error {worst:.1e} (worked example {example:.1e}), M={paths}, dt=1e-3")))
}

fn c5_transform_cost(ctx: &Context) -> RunResult<(bool, String)> {
    let paths = 100;
    let mut worst = 0.0f64;
    let none = ForcingTuple::none();
    for i in 0..4u64 {
        let cfg = RandomProblem {
            n: 2,
            m: 1 + (i % 2) as usize,
            jump_atoms: (i % 3) as usize,
            cross_terms: true,
            horizon: 2.0,
            dt: 0.01,
            ..Default::default()
        };
        let spec = random_problem(ctx.seed.wrapping_mul(1000).wrapping_add(500 + i), &cfg)?;
        let (tspec, t) = prepare(&spec, TransformMode::Auto)?;
        let t = t.ok_or_else(|| RunError::Failed("cross-term problem was not transformed".into()))?;
        let bank = noise_bank(&spec, ctx.seed.wrapping_add(50 + i), paths)?;
        let kk = spec.weight_k;
        for j in 0..20u64 {
            let u = probe_direction(ctx.seed.wrapping_add(5000 + 20 * i + j), paths, spec.grid.points(), cfg.m, 0.9, 1.0)?;
            let x = simulate_mfsde(&spec, ControlInput::Open(&u), &none, &bank, MeanMode::Empirical)?.states;
            let uu = t.to_transformed_control(&u, &x)?;
            let xt = simulate_mfsde(&tspec, ControlInput::Open(&uu), &none, &bank, MeanMode::Empirical)?.states;
            let j0 = evaluate_cost(&spec, &x, &u, kk)?;
            let jt = evaluate_cost(&tspec, &xt, &uu, kk)?;
            worst = worst.max((j0 - jt).abs() / (j0.abs() + 1e-300));
        }
    }
    Ok((worst <= 1e-8, format!("max relative cost difference {worst:.1e} over 4 problems x 20 controls")))
}

fn trial_problem(seed: u64, i: u64, paths: usize) -> RunResult<(ProblemSpec, mflq::forward::NoiseBank, f64)> {
    let cfg = RandomProblem {
        n: 1 + (i % 2) as usize,
        m: 1,
        jump_atoms: (i % 3) as usize,
        gaussian_initial: i % 4 < 2,
        horizon: 2.0,
        dt: 0.02,
        ..Default::default()
    };
    let spec = random_problem(seed, &cfg)?;
    let bank = noise_bank(&spec, seed.wrapping_add(1), paths)?;
    let kappa = compute_kappas(&spec)?.kappa;
    Ok((spec, bank, kappa))
}

fn c6_estimates(ctx: &Context) -> RunResult<(bool, String)> {
    let trials = 100u64;
    let paths = 100;
    let none = ForcingTuple::none();
    let estimate = |i: u64| -> RunResult<(bool, bool)> {
        let seed = ctx.seed.wrapping_mul(10_000).wrapping_add(600 + i);
        let (spec, bank, kappa) = trial_problem(seed, i, paths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kk = rng.random_range(-0.5..0.9) * kappa;
        let n = spec.dims.n;
        let amp: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = spec.grid.clone();
        let drift = Process::from_fn(paths, g.points(), n, |k| amp.iter().map(|a| a * (-g.s(k)).exp()).collect())?;
        let forcing = ForcingTuple { drift: Some(drift), ..ForcingTuple::none() };
        let x = simulate_mfsde(&spec, ControlInput::Zero, &forcing, &bank, MeanMode::ExactMean)?.states;
        let fwd = check_sde_estimate(&spec, &x, &forcing, kk, None, None)?.holds;
        let x0 = simulate_mfsde(&spec, ControlInput::Zero, &none, &bank, MeanMode::ExactMean)?.states;
        let sol = solve_mfbsde(&spec, &x0, None, kk, None, Some(&x0), &bank, &BsdeOptions::default())?;
        let bwd = check_bsde_estimate(&spec, &sol, &x0, None)?.holds;
        Ok((fwd, bwd))
    };
    let est: Vec<RunResult<(bool, bool)>> = (0..trials).into_par_iter().map(estimate).collect();
    let (mut fwd_fail, mut bwd_fail) = (0, 0);
    for r in est {
        let (f, b) = r?;
        fwd_fail += usize::from(!f);
        bwd_fail += usize::from(!b);
    }

    // Stability: a single constant fitted on the even trials must bound the
    // odd ones. The ratios for Δ and 2Δ coincide exactly only for n = 1; for
    // n > 1 the state-dependent regression basis leaves an O(1/M) mismatch,
    // reported but not gated.
    let stability = |i: u64| -> RunResult<(f64, f64)> {
        let seed = ctx.seed.wrapping_mul(10_000).wrapping_add(700 + i);
        let (spec, bank, _) = trial_problem(seed, i, 64)?;
        let kap = compute_kappas(&spec)?;
        let kk = 0.5 * (kap.kappa1 - kap.kappa2).max(0.0) + 0.1 * kap.kappa;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.dims.n;
        let base: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let delta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let opts = HamiltonianOptions { exploratory: true, ..Default::default() };
        let shifted = |c: f64| -> Vec<f64> { base.iter().zip(&delta).map(|(b, d)| b + c * d).collect() };
        let solve = |x: Vec<f64>| -> RunResult<_> {
            let s = spec.with_initial(InitialState::Deterministic(x));
            let sys = CoupledSystem::new(&s, kk)?;
            let (sol, _) = continuation_solve(&sys, &none, &bank, &opts)?;
            Ok((sys, sol))
        };
        let (sys, a) = solve(shifted(0.0))?;
        let (_, b) = solve(shifted(1.0))?;
        let (_, c) = solve(shifted(2.0))?;
        let r1 = stability_check(&sys, &a, &b)?.ratio.unwrap_or(f64::NAN);
        let r2 = stability_check(&sys, &a, &c)?.ratio.unwrap_or(f64::NAN);
        Ok((r1, r2))
    };
    let ratios: Vec<(f64, f64)> = (0..trials).into_par_iter().map(stability).collect::<RunResult<_>>()?;
    let homogeneity = ratios.iter().map(|(a, b)| (a - b).abs() / a.abs().max(1e-300)).fold(0.0, f64::max);
    let finite = ratios.iter().all(|(a, b)| a.is_finite() && b.is_finite() && *a > 0.0);
    let c_fit = 2.0 * ratios.iter().step_by(2).map(|r| r.0.max(r.1)).fold(0.0, f64::max);
    let stab_fail = ratios.iter().skip(1).step_by(2).filter(|r| r.0.max(r.1) > c_fit).count();
    let pass = fwd_fail == 0 && bwd_fail == 0 && finite && stab_fail == 0;
    Ok((
        pass,
        format!(
            "violations: forward {fwd_fail}/{trials}, backward {bwd_fail}/{trials}, stability {stab_fail}/{} \
             above fitted C={c_fit:.3}; ratio mismatch between delta and 2 delta {homogeneity:.1e}",
            trials / 2
        ),
    ))
}

fn c7_non_membership(ctx: &Context) -> RunResult<(bool, String)> {
    let mut detail = String::new();
    let mut pass = true;
    let none = ForcingTuple::none();
    for kk in [0.5, 0.75] {
        let mut masses = Vec::new();
        for horizon in [10.0, 20.0, 40.0, 80.0] {
            let spec = ex31(1.0, horizon, 1e-2, kk)?;
            let oracle = example31_oracle(1.0, &ScalarProfile::Constant(0.0), 1.0, &spec.grid)?;
            let bank = noise_bank(&spec, ctx.seed, 4)?;
            let u = deterministic(4, &oracle.u)?;
            let x = simulate_mfsde(&spec, ControlInput::Open(&u), &none, &bank, MeanMode::ExactMean)?.states;
            masses.push(x.weighted_norm(&spec.grid, kk, None));
        }
        let ratios: Vec<f64> = masses.windows(2).map(|w| w[1] / w[0]).collect();
        let grows = ratios.iter().all(|r| *r >= 1.9);
        let spec = ex31(1.0, 4.0, 0.1, kk)?;
        let bank = noise_bank(&spec, ctx.seed, 2)?;
        let refused = match pipeline::solve_hamiltonian(&spec, TransformMode::Off, &bank, &HamiltonianOptions::default()) {
            Err(e) => e.is_precondition(),
            Ok(_) => false,
        };
        let flagged = admissible_windows(&spec, 0.0)?.hamiltonian_window.status.starts_with("not guaranteed");
        pass &= grows && refused && flagged;
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
        let _ = write!(detail, "K={kk}: doubling ratios [{}], refused {refused}, flagged {flagged}; ", shown.join(", "));
    }
    Ok((pass, detail.trim_end_matches("; ").to_string()))
}

fn c8_truncation(ctx: &Context) -> RunResult<(bool, String)> {
    let (horizon, dt, paths) = (40.0, 0.02, 200);
    let opts = BsdeOptions::default();
    let none = ForcingTuple::none();
    let mut worst = 0.0f64;
    for i in 0..5u64 {
        let cfg = RandomProblem {
            n: 1 + (i % 2) as usize,
            jump_atoms: (i % 3) as usize,
            gaussian_initial: i % 2 == 0,
            horizon: 2.0 * horizon,
            dt,
            ..Default::default()
        };
        let long = random_problem(ctx.seed.wrapping_mul(1000).wrapping_add(800 + i), &cfg)?;
        let bank = noise_bank(&long, ctx.seed.wrapping_add(80 + i), paths)?;
        let short = long.with_grid(TimeGrid::new(long.grid.t0, horizon, dt)?)?;
        let x_long = simulate_mfsde(&long, ControlInput::Zero, &none, &bank, MeanMode::ExactMean)?.states;
        let x_short = x_long.truncated(short.grid.points());
        let kk = long.weight_k;
        let a = solve_mfbsde(&short, &x_short, None, kk, None, Some(&x_short), &bank, &opts)?;
        let b = solve_mfbsde(&long, &x_long, None, kk, None, Some(&x_long), &bank, &opts)?;
        let half = TimeGrid::new(long.grid.t0, horizon / 2.0, dt)?;
        let hp = half.points();
        let jw = long.marks.entry_weights(long.dims.n);
        for (pa, pb, w) in [(&a.y, &b.y, None), (&a.z, &b.z, None), (&a.k, &b.k, Some(jw.as_slice()))] {
            let (pa, pb) = (pa.truncated(hp), pb.truncated(hp));
            let dist = pa.weighted_distance(&pb, &half, kk, w)?.sqrt();
            let scale = pb.weighted_norm(&half, kk, w).sqrt().max(1.0);
            worst = worst.max(dist / scale);
        }
    }
    Ok((worst <= 1e-4, format!("max relative distance of y, z, k on [t0, T/2] {worst:.1e}, T={horizon} vs {}", 2.0 * horizon)))
}

fn csv_files(dir: &Path) -> RunResult<Vec<(String, Vec<u8>)>> {
    let io = |source| RunError::Io { path: dir.display().to_string(), source };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let bytes = std::fs::read(&path).map_err(io)?;
            files.push((path.file_name().unwrap_or_default().to_string_lossy().into_owned(), bytes));
        }
    }
    files.sort();
    Ok(files)
}

fn c9_determinism(ctx: &Context) -> RunResult<(bool, String)> {
    let dir = scratch(ctx, "c9")?;
    let cfg = RandomProblem { n: 2, m: 1, cross_terms: true, horizon: 2.0, dt: 0.02, ..Default::default() };
    let spec = random_problem(ctx.seed.wrapping_add(900), &cfg)?;
    let kap = compute_kappas(&spec)?;
    let spec = spec.with_weight(0.5 * (kap.kappa1 - kap.kappa2).max(0.0) + 0.1 * kap.kappa);
    let file = write_problem(&dir, "problem.json", &spec)?;
    let seed = ctx.seed.to_string();
    let mut compared = 0;
    let mut differing = Vec::new();
    for sub in ["simulate", "solve-bsde", "optimize"] {
        let mut runs = Vec::new();
        for rep in ["a", "b"] {
            let out = dir.join(format!("{sub}-{rep}"));
            let cli = parse_cli([
                OsString::from("mflq"),
                sub.into(),
                file.clone().into(),
                "--paths".into(),
                "50".into(),
                "--seed".into(),
                seed.clone().into(),
                "--out".into(),
                out.clone().into(),
            ])?;
            let rc = RunConfig::resolve(&cli.command, &cli.run)?;
            commands::execute(&cli.command, &rc)?;
            runs.push(csv_files(&out)?);
        }
        if runs[0].is_empty() {
            return Err(RunError::Failed(format!("{sub} wrote no CSV files")));
        }
        compared += runs[0].len();
        if runs[0] != runs[1] {
            differing.push(sub);
        }
    }
    let detail = if differing.is_empty() {
        format!("{compared} CSV files identical across two runs")
    } else {
        format!("outputs differ for {}", differing.join(", "))
    };
    Ok((differing.is_empty(), detail))
}
