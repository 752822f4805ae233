//! Fixtures shared by the benchmarks: a random problem with jumps and mean
//! field terms, its noise, and the uncontrolled state.

use mflq::forward::{simulate_mfsde, ControlInput, MeanMode, NoiseBank};
use mflq::model::random_problem;
use mflq::spectral::compute_kappas;
use mflq::{ForcingTuple, Process, ProblemSpec, RandomProblem};

pub struct Fixture {
    pub spec: ProblemSpec,
    pub bank: NoiseBank,
    /// uncontrolled state, used as BSDE driver and regression basis
    pub state: Process,
    /// inside the guaranteed Hamiltonian window
    pub weight_k: f64,
}

pub fn fixture(n: usize, paths: usize, horizon: f64, dt: f64) -> Fixture {
    let cfg = RandomProblem { n, m: 1, horizon, dt, ..Default::default() };
    let spec = random_problem(11, &cfg).expect("random problem");
    let bank = NoiseBank::generate(3, paths, &spec.grid, spec.dims.d, &spec.marks, n).expect("noise");
    let state = simulate_mfsde(&spec, ControlInput::Zero, &ForcingTuple::none(), &bank, MeanMode::ExactMean)
        .expect("simulation")
        .states;
    let k = compute_kappas(&spec).expect("kappas");
    let weight_k = 0.5 * (k.kappa1 - k.kappa2).max(0.0) + 0.1 * k.kappa;
    Fixture { spec, bank, state, weight_k }
}
