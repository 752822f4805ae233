use super::*;
use crate::error::Error;
use crate::forward::{simulate_mfsde, ControlInput, MeanMode, NoiseBank};
use crate::model::{CoefficientSet, CostSet, Dims, ForcingTuple, InitialState, MarkMeasure, MatrixTrack, Process, ProblemSpec, TimeGrid};

fn scalar_spec(a: f64, abar: f64, c: f64, horizon: f64, dt: f64) -> ProblemSpec {
    let dims = Dims { n: 1, m: 1, d: 1, l: 0 };
    let mut co = CoefficientSet::zeros(dims, 0);
    co.drift = MatrixTrack::scalar(a);
    co.drift_mean = MatrixTrack::scalar(abar);
    co.diffusion = vec![MatrixTrack::scalar(c)];
    let mut cost = CostSet::zeros(1, 1);
    cost.control_weight = MatrixTrack::scalar(1.0);
    ProblemSpec {
        dims,
        coeffs: co,
        cost,
        marks: MarkMeasure::empty(),
        grid: TimeGrid::new(0.0, horizon, dt).unwrap(),
        initial: InitialState::Deterministic(vec![1.0]),
        weight_k: 0.0,
    }
    .validated()
    .unwrap()
}

fn bank(spec: &ProblemSpec, paths: usize, seed: u64) -> NoiseBank {
    NoiseBank::generate(seed, paths, &spec.grid, spec.dims.d, &spec.marks, spec.dims.n).unwrap()
}

fn constant_driver(spec: &ProblemSpec, paths: usize, v: f64) -> Process {
    Process::deterministic(paths, spec.grid.points(), 1, vec![v; spec.grid.points()]).unwrap()
}

#[test]
fn zero_driver_gives_zero_solution() {
    let spec = scalar_spec(-1.0, 0.3, 0.4, 2.0, 0.01);
    let b = bank(&spec, 32, 1);
    let f = Process::zeros(32, spec.grid.points(), 1);
    let sol = solve_mfbsde(&spec, &f, None, 0.0, None, None, &b, &BsdeOptions::default()).unwrap();
    assert_eq!(sol.y.sup_abs(), 0.0);
    assert_eq!(sol.z.sup_abs(), 0.0);
}

#[test]
fn constant_driver_matches_closed_form() {
    // dy = −(P y + c)ds, y(T)=0 → y(s) = (c/−P)(1 − e^{P(T−s)}), P = a + 2K
    let (a, kk, c, horizon) = (-2.0, 0.25, 3.0, 8.0);
    let spec = scalar_spec(a, 0.0, 0.0, horizon, 1e-3);
    let b = bank(&spec, 4, 2);
    let f = constant_driver(&spec, 4, c);
    let sol = solve_mfbsde(&spec, &f, None, kk, None, None, &b, &BsdeOptions::default()).unwrap();
    let p = a + 2.0 * kk;
    let mut err: f64 = 0.0;
    for k in 0..spec.grid.points() {
        let s = spec.grid.s(k);
        let exact = c / -p * (1.0 - (p * (horizon - s)).exp());
        err = err.max((sol.y.at(k, 0)[0] - exact).abs());
    }
    assert!(err < 5e-3, "sup error {err}");
    assert!((sol.y.at(0, 0)[0] - c / -p).abs() < 5e-3);
}

#[test]
fn geometric_driver_matches_conditional_expectation() {
    // Forward dx = a x ds + σ x dW. Backward dy = −(a y + x)ds + z dW (no z term).
    // y_t = g(t) x_t, z_t = σ g(t) x_t, g(t) = (1 − e^{2a(T−t)})/(−2a).
    let (a, sigma, horizon) = (-0.5, 0.4, 4.0);
    let fwd = scalar_spec(a, 0.0, sigma, horizon, 5e-3);
    let bwd = scalar_spec(a, 0.0, 0.0, horizon, 5e-3);
    let paths = 4000;
    let b = bank(&fwd, paths, 3);
    let x = simulate_mfsde(&fwd, ControlInput::Zero, &ForcingTuple::none(), &b, MeanMode::ExactMean).unwrap().states;
    let sol = solve_mfbsde(&bwd, &x, None, 0.0, None, Some(&x), &b, &BsdeOptions::default()).unwrap();
    let g = |t: f64| (1.0 - (2.0 * a * (horizon - t)).exp()) / (-2.0 * a);
    assert!((sol.y.at(0, 0)[0] - g(0.0)).abs() < 0.02 * g(0.0), "y0 {} vs {}", sol.y.at(0, 0)[0], g(0.0));
    let mid = spec_mid(&fwd);
    let t = fwd.grid.s(mid);
    let (mut num, mut den, mut zs) = (0.0, 0.0, 0.0);
    for p in 0..paths {
        let xv = x.at(mid, p)[0];
        num += (sol.y.at(mid, p)[0] - g(t) * xv).powi(2);
        den += (g(t) * xv).powi(2);
        zs += (sol.z.at(mid, p)[0] - sigma * g(t) * xv).powi(2);
    }
    assert!((num / den).sqrt() < 0.02, "y relative error {}", (num / den).sqrt());
    assert!((zs / den).sqrt() < 0.1 * sigma, "z relative error {}", (zs / den).sqrt());
}

fn spec_mid(spec: &ProblemSpec) -> usize {
    spec.grid.num_steps / 2
}

#[test]
fn solution_is_linear_in_the_driver() {
    let spec = scalar_spec(-1.0, 0.4, 0.6, 2.0, 0.01);
    let paths = 64;
    let b = bank(&spec, paths, 4);
    let x = simulate_mfsde(&spec, ControlInput::Zero, &ForcingTuple::none(), &b, MeanMode::Empirical).unwrap().states;
    let f1 = x.clone();
    let f2 = Process::from_fn(paths, spec.grid.points(), 1, |i| vec![((i * 37 % 101) as f64 / 50.0) - 1.0]).unwrap();
    let opts = BsdeOptions::default();
    let solve = |f: &Process| solve_mfbsde(&spec, f, None, 0.1, None, Some(&x), &b, &opts).unwrap();
    let combo = solve(&f1.lin_comb(1.0, &f2, -2.5).unwrap());
    let (s1, s2) = (solve(&f1), solve(&f2));
    let expect = s1.y.lin_comb(1.0, &s2.y, -2.5).unwrap();
    let scale = expect.sup_abs().max(1.0);
    let diff = combo.y.lin_comb(1.0, &expect, -1.0).unwrap().sup_abs();
    assert!(diff < 1e-10 * scale, "diff {diff}");
}

#[test]
fn mean_track_follows_the_mean_equation() {
    // E y solves ȳ' = −((A+Ā+2K) ȳ + E f) regardless of the fluctuation part.
    let (a, abar, c) = (-1.5, 0.5, 2.0);
    let spec = scalar_spec(a, abar, 0.3, 6.0, 1e-3);
    let b = bank(&spec, 8, 5);
    let f = constant_driver(&spec, 8, c);
    let sol = solve_mfbsde(&spec, &f, None, 0.0, None, None, &b, &BsdeOptions::default()).unwrap();
    let p = a + abar;
    let exact0 = c / -p * (1.0 - (p * 6.0).exp());
    assert!((sol.y.mean_at(0)[0] - exact0).abs() < 5e-3, "{} vs {exact0}", sol.y.mean_at(0)[0]);
}

#[test]
fn window_violation_is_named() {
    let spec = scalar_spec(-1.0, 0.0, 0.0, 1.0, 0.1);
    let b = bank(&spec, 4, 6);
    let f = constant_driver(&spec, 4, 1.0);
    let err = solve_mfbsde(&spec, &f, None, 1.5, None, None, &b, &BsdeOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Window(_)));
    assert!(err.to_string().contains("backward solvability window K < kappa violated"), "{err}");
    let err = solve_mfbsde(&spec, &f, None, 0.2, Some(0.1), None, &b, &BsdeOptions::default()).unwrap_err();
    assert!(err.to_string().contains("driver weight window"), "{err}");
}

#[test]
fn integrability_estimate_holds_on_a_forced_problem() {
    let spec = scalar_spec(-1.2, 0.3, 0.5, 8.0, 0.01);
    let paths = 400;
    let b = bank(&spec, paths, 7);
    let x = simulate_mfsde(&spec, ControlInput::Zero, &ForcingTuple::none(), &b, MeanMode::ExactMean).unwrap().states;
    for kk in [-0.3, 0.0, 0.3] {
        let sol = solve_mfbsde(&spec, &x, None, kk, None, Some(&x), &b, &BsdeOptions::default()).unwrap();
        let rep = check_bsde_estimate(&spec, &sol, &x, None).unwrap();
        assert!(rep.holds, "{rep:?}");
    }
}

#[test]
fn decay_is_reported_for_a_decaying_driver() {
    let spec = scalar_spec(-1.0, 0.0, 0.2, 12.0, 0.01);
    let b = bank(&spec, 50, 8);
    let x = simulate_mfsde(&spec, ControlInput::Zero, &ForcingTuple::none(), &b, MeanMode::ExactMean).unwrap().states;
    let sol = solve_mfbsde(&spec, &x, None, 0.2, None, Some(&x), &b, &BsdeOptions::default()).unwrap();
    let rep = check_bsde_decay(&sol, &spec, 1e-3);
    assert!(rep.decays, "{rep:?}");
}
