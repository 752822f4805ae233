use super::*;
use crate::control::{example31_spec, ScalarProfile};
use crate::forward::{MeanMode, NoiseBank};
use crate::model::{ForcingTuple, TimeGrid};

fn ex31(rho: f64, horizon: f64, dt: f64, paths: usize) -> (ProblemSpec, NoiseBank) {
    let grid = TimeGrid::new(0.0, horizon, dt).unwrap();
    let spec = example31_spec(rho, &ScalarProfile::Constant(0.0), 1.0, grid, 0.0).unwrap();
    let bank = NoiseBank::generate(7, paths, &spec.grid, 1, &spec.marks, 1).unwrap();
    (spec, bank)
}

#[test]
fn example31_transformed_continuation_recovers_closed_form() {
    let (spec, bank) = ex31(1.0, 10.0, 1e-2, 16);
    let (solved, t) = prepare(&spec, TransformMode::Auto).unwrap();
    assert!(t.is_some());
    let sys = CoupledSystem::new(&solved, 0.0).unwrap();
    let opts = HamiltonianOptions { mode: MeanMode::ExactMean, ..Default::default() };
    let (sol, state) = continuation_solve(&sys, &ForcingTuple::none(), &bank, &opts).unwrap();
    assert!((state.alpha - 1.0).abs() < 1e-12);
    let mut err: f64 = 0.0;
    for k in 0..spec.grid.points() {
        let exact = (-0.5 * spec.grid.s(k)).exp();
        for p in 0..bank.paths() {
            err = err.max((sol.x.at(k, p)[0] - exact).abs());
        }
    }
    // Euler at dt=1e-2: |(1-dt/2)^k - e^{-s/2}| ≤ ~ dt/8·e^{-1}
    assert!(err < 2e-3, "sup error {err}");
    assert!(sol.y.sup_abs() < 1e-10 && sol.z.sup_abs() < 1e-10, "y {} z {}", sol.y.sup_abs(), sol.z.sup_abs());
}

use crate::error::Error;
use crate::model::{random_problem, MatrixTrack, Process, RandomProblem};

#[test]
fn base_case_matches_decoupled_closed_form() {
    // level 0: dy = −(−κ₂ y + c)ds → y = (c/κ₂)(1 − e^{−κ₂(T−s)}); x solves the −κ₁-damped forward
    let (spec, bank) = ex31(1.0, 10.0, 1e-3, 4);
    let (solved, _) = prepare(&spec, TransformMode::Auto).unwrap();
    let sys = CoupledSystem::new(&solved, 0.0).unwrap();
    let kap2 = sys.kappas.kappa2;
    let c = 0.7;
    let phi = Process::deterministic(4, solved.grid.points(), 1, vec![c; solved.grid.points()]).unwrap();
    let forcing = ForcingTuple { backward: Some(phi), ..ForcingTuple::none() };
    let sol = sys.solve_base_case(&forcing, &bank, MeanMode::ExactMean, &Default::default()).unwrap();
    let mut err: f64 = 0.0;
    for k in 0..solved.grid.points() {
        let s = solved.grid.s(k);
        let exact = c / kap2 * (1.0 - (-kap2 * (10.0 - s)).exp());
        err = err.max((sol.y.at(k, 0)[0] - exact).abs());
    }
    assert!(err < 2e-3, "y error {err}");
}

#[test]
fn residual_detects_a_corrupted_state() {
    let (spec, bank) = ex31(1.0, 8.0, 1e-2, 4);
    let (solved, _) = prepare(&spec, TransformMode::Auto).unwrap();
    let sys = CoupledSystem::new(&solved, 0.0).unwrap();
    let opts = HamiltonianOptions::default();
    let none = ForcingTuple::none();
    let (sol, _) = continuation_solve(&sys, &none, &bank, &opts).unwrap();
    let good = fbsde_residual(&sys, &sol, &none, &bank, opts.mode, &opts.bsde).unwrap();
    assert!(good.forward < 1e-6 && good.backward < 1e-6, "{good:?}");
    let mut bad = sol.clone();
    bad.x = sol.x.scaled(1.1);
    let r = fbsde_residual(&sys, &bad, &none, &bank, opts.mode, &opts.bsde).unwrap();
    assert!(r.forward > 0.05, "{r:?}");
}

#[test]
fn stability_ratio_of_example31_is_one_over_rho() {
    // Δθ = (Δx₀e^{−ρs/2}, 0, 0): ratio = ∫₀^T e^{−ρs} ds ≈ 1/ρ
    for rho in [1.0, 2.0] {
        let grid = TimeGrid::new(0.0, 20.0, 1e-2).unwrap();
        let solve = |x0: f64| {
            let spec = example31_spec(rho, &ScalarProfile::Constant(0.0), x0, grid.clone(), 0.0).unwrap();
            let bank = NoiseBank::generate(7, 4, &spec.grid, 1, &spec.marks, 1).unwrap();
            let (solved, _) = prepare(&spec, TransformMode::Auto).unwrap();
            let sys = CoupledSystem::new(&solved, 0.0).unwrap();
            let (sol, _) = continuation_solve(&sys, &ForcingTuple::none(), &bank, &Default::default()).unwrap();
            (sys, sol)
        };
        let (sys, a) = solve(1.0);
        let ratios: Vec<f64> = [0.5, 3.0]
            .iter()
            .map(|&x0| stability_check(&sys, &a, &solve(x0).1).unwrap().ratio.unwrap())
            .collect();
        for r in &ratios {
            assert!((r - 1.0 / rho).abs() < 0.02 / rho, "rho {rho}: ratio {r}");
        }
        assert!((ratios[0] - ratios[1]).abs() < 1e-9);
    }
}

#[test]
fn untransformed_example31_is_refused() {
    let (spec, _) = ex31(1.0, 4.0, 0.1, 2);
    let (same, t) = prepare(&spec, TransformMode::Off).unwrap();
    assert!(t.is_none());
    let err = CoupledSystem::new(&same, 0.5).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
    assert!(err.to_string().contains("cross weights"));
}

#[test]
fn window_checks() {
    use crate::spectral::Kappas;
    let k = Kappas { kappa1: 2.0, kappa2: 1.0, kappa: 1.0 };
    assert!(check_hamiltonian_window(&k, 0.5, false).unwrap().is_none());
    assert!(check_hamiltonian_window(&k, 0.7, false).unwrap().is_some());
    assert!(matches!(check_hamiltonian_window(&k, 0.2, false), Err(Error::Window(_))));
    assert!(check_hamiltonian_window(&k, 0.2, true).unwrap().is_some());
    assert!(matches!(check_hamiltonian_window(&k, 1.0, false), Err(Error::Window(_))));
    let bad = Kappas { kappa1: -2.0, kappa2: 1.0, kappa: -2.0 };
    let err = check_hamiltonian_window(&bad, -3.0, true).unwrap_err();
    assert!(err.is_precondition() && err.to_string().contains("base case"));
}

#[test]
fn unstable_mean_dynamics_are_refused() {
    let (mut spec, bank) = ex31(1.0, 4.0, 0.1, 2);
    let (mut solved, _) = prepare(&spec, TransformMode::Auto).unwrap();
    // mean drift +3 makes κ₁ = −3 < −κ₂
    solved.coeffs.drift_mean = MatrixTrack::scalar(3.0 + 0.5);
    spec = solved;
    let sys = CoupledSystem::new(&spec, -4.0).unwrap();
    let err = continuation_solve(&sys, &ForcingTuple::none(), &bank, &HamiltonianOptions { exploratory: true, ..Default::default() })
        .unwrap_err();
    assert!(err.is_precondition(), "{err}");
}

#[test]
fn random_jump_problem_converges_with_small_residual() {
    let cfg = RandomProblem { n: 2, m: 2, d: 1, jump_atoms: 2, horizon: 4.0, dt: 0.02, ..Default::default() };
    let spec = random_problem(21, &cfg).unwrap();
    let kap = crate::spectral::compute_kappas(&spec).unwrap();
    let kk = 0.5 * (kap.kappa1 - kap.kappa2).max(0.0) + 0.1 * kap.kappa;
    let bank = NoiseBank::generate(3, 200, &spec.grid, spec.dims.d, &spec.marks, spec.dims.n).unwrap();
    let sys = CoupledSystem::new(&spec, kk).unwrap();
    let opts = HamiltonianOptions { exploratory: true, ..Default::default() };
    let none = ForcingTuple::none();
    let (sol, state) = continuation_solve(&sys, &none, &bank, &opts).unwrap();
    assert_eq!(state.alpha, 1.0);
    assert!(state.log.iter().any(|l| l.accepted && l.alpha == 1.0));
    let r = fbsde_residual(&sys, &sol, &none, &bank, opts.mode, &opts.bsde).unwrap();
    assert!(r.forward < 1e-6, "{r:?}");
    assert!(r.backward < 1e-6, "{r:?}");
}

#[test]
fn options_deserialize_with_defaults() {
    let o: HamiltonianOptions = serde_json::from_str(r#"{"damping": 0.8, "mode": "empirical"}"#).unwrap();
    assert_eq!(o.damping, 0.8);
    assert_eq!(o.mode, MeanMode::Empirical);
    assert_eq!(o.alpha_step, HamiltonianOptions::default().alpha_step);
}

#[test]
fn stability_ratio_is_homogeneous_for_scalar_random_problems() {
    // with one state component the regression basis spans the same space for
    // every initial value, so the discrete map is affine in x_t
    for seed in [700u64, 702, 704] {
        let cfg = RandomProblem { n: 1, m: 1, horizon: 2.0, dt: 0.02, gaussian_initial: seed == 700, ..Default::default() };
        let spec = random_problem(seed, &cfg).unwrap();
        let kap = crate::spectral::compute_kappas(&spec).unwrap();
        let kk = 0.5 * (kap.kappa1 - kap.kappa2).max(0.0) + 0.1 * kap.kappa;
        let bank = NoiseBank::generate(3, 64, &spec.grid, spec.dims.d, &spec.marks, 1).unwrap();
        let opts = HamiltonianOptions { exploratory: true, ..Default::default() };
        let solve = |x: f64| {
            let s = spec.with_initial(crate::model::InitialState::Deterministic(vec![x]));
            let sys = CoupledSystem::new(&s, kk).unwrap();
            let (sol, _) = continuation_solve(&sys, &ForcingTuple::none(), &bank, &opts).unwrap();
            (sys, sol)
        };
        let (sys, a) = solve(0.3);
        let r1 = stability_check(&sys, &a, &solve(0.8).1).unwrap().ratio.unwrap();
        let r2 = stability_check(&sys, &a, &solve(1.3).1).unwrap().ratio.unwrap();
        assert!((r1 - r2).abs() < 1e-7 * r1, "seed {seed}: {r1} vs {r2}");
    }
}
