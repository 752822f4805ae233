use super::*;
use crate::error::Error;
use crate::model::{
    CoefficientSet, CostSet, Dims, ForcingTuple, InitialState, MarkComponent, MarkMeasure, MatrixTrack, Process,
    ProblemSpec, TimeGrid,
};

struct Scalar {
    a: f64,
    abar: f64,
    b: f64,
    c: f64,
    /// one-atom jump: intensity, jump coefficient
    jump: Option<(f64, f64)>,
}

fn spec(s: &Scalar, horizon: f64, dt: f64, x0: f64) -> ProblemSpec {
    let l = usize::from(s.jump.is_some());
    let dims = Dims { n: 1, m: 1, d: 1, l };
    let marks = match s.jump {
        Some((w, _)) => MarkMeasure::new(vec![MarkComponent { atoms: vec![vec![1.0]], weights: vec![w] }]).unwrap(),
        None => MarkMeasure::empty(),
    };
    let mut co = CoefficientSet::zeros(dims, l);
    co.drift = MatrixTrack::scalar(s.a);
    co.drift_mean = MatrixTrack::scalar(s.abar);
    co.control_drift = MatrixTrack::scalar(s.b);
    co.diffusion = vec![MatrixTrack::scalar(s.c)];
    if let Some((_, m)) = s.jump {
        co.jump = vec![MatrixTrack::scalar(m)];
    }
    let mut cost = CostSet::zeros(1, 1);
    cost.control_weight = MatrixTrack::scalar(1.0);
    ProblemSpec {
        dims,
        coeffs: co,
        cost,
        marks,
        grid: TimeGrid::new(0.0, horizon, dt).unwrap(),
        initial: InitialState::Deterministic(vec![x0]),
        weight_k: 0.0,
    }
    .validated()
    .unwrap()
}

fn bank(spec: &ProblemSpec, paths: usize, seed: u64) -> NoiseBank {
    NoiseBank::generate(seed, paths, &spec.grid, spec.dims.d, &spec.marks, spec.dims.n).unwrap()
}

fn run(spec: &ProblemSpec, b: &NoiseBank, mode: MeanMode) -> Process {
    simulate_mfsde(spec, ControlInput::Zero, &ForcingTuple::none(), b, mode).unwrap().states
}

#[test]
fn noiseless_path_is_the_euler_recursion() {
    let s = Scalar { a: -0.7, abar: 0.2, b: 0.0, c: 0.0, jump: None };
    let sp = spec(&s, 3.0, 0.01, 2.0);
    let x = run(&sp, &bank(&sp, 3, 1), MeanMode::ExactMean);
    let mut v = 2.0f64;
    for k in 0..sp.grid.points() {
        assert!((x.at(k, 2)[0] - v).abs() < 1e-12 * v.abs().max(1.0));
        v *= 1.0 + (s.a + s.abar) * sp.grid.dt;
    }
}

#[test]
fn open_loop_constant_control() {
    // dx = (a x + b) ds → x = (x0 + b/a) e^{as} − b/a
    let s = Scalar { a: -1.0, abar: 0.0, b: 2.0, c: 0.0, jump: None };
    let sp = spec(&s, 5.0, 1e-3, 1.0);
    let b = bank(&sp, 2, 2);
    let u = Process::deterministic(2, sp.grid.points(), 1, vec![1.0; sp.grid.points()]).unwrap();
    let x = simulate_mfsde(&sp, ControlInput::Open(&u), &ForcingTuple::none(), &b, MeanMode::ExactMean).unwrap().states;
    let t = sp.grid.end();
    let exact = (1.0 + s.b / s.a) * (s.a * t).exp() - s.b / s.a;
    assert!((x.at(sp.grid.num_steps, 1)[0] - exact).abs() < 2e-3);
}

#[test]
fn exact_mean_track_solves_the_mean_ode() {
    let s = Scalar { a: -1.0, abar: 0.5, b: 0.0, c: 0.8, jump: Some((2.0, 0.3)) };
    let sp = spec(&s, 2.0, 0.01, 1.0);
    let x = run(&sp, &bank(&sp, 200, 3), MeanMode::ExactMean);
    let mut v = 1.0;
    for k in 0..sp.grid.points() {
        assert!((x.mean_at(k)[0] - v).abs() < 1e-12);
        v *= 1.0 + (s.a + s.abar) * sp.grid.dt;
    }
}

#[test]
fn empirical_mean_track_is_the_path_average() {
    let s = Scalar { a: -1.0, abar: 0.5, b: 0.0, c: 0.8, jump: Some((2.0, 0.3)) };
    let sp = spec(&s, 2.0, 0.01, 1.0);
    let x = run(&sp, &bank(&sp, 50, 4), MeanMode::Empirical);
    for k in [0, 57, sp.grid.num_steps] {
        let avg: f64 = (0..50).map(|p| x.at(k, p)[0]).sum::<f64>() / 50.0;
        assert!((x.mean_at(k)[0] - avg).abs() < 1e-12);
    }
}

#[test]
fn second_moment_matches_discrete_recursion() {
    // Without mean-field terms, E x_{k+1}² = E x_k² ((1 + a dt)² + c² dt + w m² dt).
    let s = Scalar { a: -0.5, abar: 0.0, b: 0.0, c: 0.6, jump: Some((1.5, 0.4)) };
    let sp = spec(&s, 1.0, 0.01, 1.0);
    let paths = 20_000;
    let x = run(&sp, &bank(&sp, paths, 5), MeanMode::ExactMean);
    let dt = sp.grid.dt;
    let factor = (1.0 + s.a * dt).powi(2) + s.c * s.c * dt + 1.5 * 0.16 * dt;
    let last = sp.grid.num_steps;
    let expect = factor.powi(last as i32);
    let vals: Vec<f64> = (0..paths).map(|p| x.at(last, p)[0].powi(2)).collect();
    let mean = vals.iter().sum::<f64>() / paths as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (paths - 1) as f64).sqrt();
    assert!((mean - expect).abs() < 4.0 * sd / (paths as f64).sqrt(), "{mean} vs {expect}");
}

#[test]
fn same_seed_same_paths() {
    let s = Scalar { a: -0.5, abar: 0.1, b: 0.0, c: 0.6, jump: Some((1.5, 0.4)) };
    let sp = spec(&s, 1.0, 0.01, 1.0);
    let x1 = run(&sp, &bank(&sp, 30, 9), MeanMode::Empirical);
    let x2 = run(&sp, &bank(&sp, 30, 9), MeanMode::Empirical);
    assert_eq!(x1, x2);
}

#[test]
fn forward_estimate_holds_and_window_is_named() {
    let s = Scalar { a: -1.0, abar: 0.3, b: 0.0, c: 0.5, jump: Some((1.0, 0.3)) };
    let sp = spec(&s, 10.0, 0.01, 1.0);
    let paths = 500;
    let b = bank(&sp, paths, 6);
    let drift = Process::from_fn(paths, sp.grid.points(), 1, |k| vec![(-(k as f64) * 0.01).exp()]).unwrap();
    let forcing = ForcingTuple { drift: Some(drift), ..ForcingTuple::none() };
    let x = simulate_mfsde(&sp, ControlInput::Zero, &forcing, &b, MeanMode::ExactMean).unwrap().states;
    for kk in [-0.5, 0.0, 0.3] {
        let rep = check_sde_estimate(&sp, &x, &forcing, kk, None, None).unwrap();
        assert!(rep.holds, "{rep:?}");
    }
    let err = check_sde_estimate(&sp, &x, &forcing, 5.0, None, None).unwrap_err();
    assert!(matches!(err, Error::Window(_)));
    assert!(err.to_string().contains("forward integrability window K < kappa violated"));
}

#[test]
fn decay_check_separates_decay_from_marginal_weight() {
    let s = Scalar { a: -1.0, abar: 0.0, b: 0.0, c: 0.0, jump: None };
    let sp = spec(&s, 20.0, 0.01, 1.0);
    let x = run(&sp, &bank(&sp, 1, 7), MeanMode::ExactMean);
    assert!(check_decay(&x, &sp.grid, 0.5, 1e-3, None).decays);
    assert!(!check_decay(&x, &sp.grid, 1.0, 1e-3, None).decays);
}
