//! Solver chains shared by the subcommands and the acceptance suite.

use serde::Serialize;

use mflq::backward::AdjointSolution;
use mflq::control::{optimality_report, probe_direction, synthesize_control, OptimalityReport};
use mflq::forward::{simulate_mfsde, ControlInput, NoiseBank};
use mflq::hamiltonian::{
    continuation_solve, fbsde_residual, prepare, ContinuationState, CoupledSystem, HamiltonianOptions,
    QuadrupleSolution, ResidualReport, TransformMode, TransformedSpec,
};
use mflq::spectral::compute_kappas;
use mflq::{ForcingTuple, Process, ProblemSpec, Result};

/// Noise for a problem: Brownian and jump increments plus initial-state normals.
pub fn noise_bank(spec: &ProblemSpec, seed: u64, paths: usize) -> Result<NoiseBank> {
    NoiseBank::generate(seed, paths, &spec.grid, spec.dims.d, &spec.marks, spec.dims.n)
}

/// Probe step sizes of the optimality report.
pub const PROBE_EPSILONS: [f64; 4] = [-1e-1, -1e-2, 1e-2, 1e-1];

pub struct HamiltonianRun {
    /// problem handed to the continuation (cross weights eliminated when transformed)
    pub solved: ProblemSpec,
    pub transform: Option<TransformedSpec>,
    pub system: CoupledSystem,
    pub solution: QuadrupleSolution,
    pub state: ContinuationState,
    pub residual: ResidualReport,
}

pub fn solve_hamiltonian(
    spec: &ProblemSpec,
    transform: TransformMode,
    bank: &NoiseBank,
    opts: &HamiltonianOptions,
) -> Result<HamiltonianRun> {
    let (solved, t) = prepare(spec, transform)?;
    let system = CoupledSystem::new(&solved, spec.weight_k)?;
    let none = ForcingTuple::none();
    let (solution, state) = continuation_solve(&system, &none, bank, opts)?;
    let residual = fbsde_residual(&system, &solution, &none, bank, opts.mode, &opts.bsde)?;
    Ok(HamiltonianRun { solved, transform: t, system, solution, state, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportedProblem {
    Original,
    /// the original K lies outside its backward window; the transformed
    /// problem has the same cost and stationarity condition
    Transformed,
}

pub struct OptimizeRun {
    pub hamiltonian: HamiltonianRun,
    /// u* for the original problem
    pub control: Process,
    /// state of the original problem under u*
    pub states: Process,
    pub report: OptimalityReport,
    pub reported_on: ReportedProblem,
    pub adjoint: AdjointSolution,
}

pub fn optimize(
    spec: &ProblemSpec,
    transform: TransformMode,
    bank: &NoiseBank,
    opts: &HamiltonianOptions,
    probes: usize,
    seed: u64,
) -> Result<OptimizeRun> {
    let ham = solve_hamiltonian(spec, transform, bank, opts)?;
    let control = synthesize_control(spec, &ham.solution)?;
    let none = ForcingTuple::none();
    let states = simulate_mfsde(spec, ControlInput::Open(&control), &none, bank, opts.mode)?.states;
    let original_ok = spec.weight_k < compute_kappas(spec)?.kappa;
    let (target, u, reported_on) = if original_ok {
        (spec, control.clone(), ReportedProblem::Original)
    } else {
        (&ham.solved, ham.solution.control.clone(), ReportedProblem::Transformed)
    };
    let dirs = directions(seed, bank.paths(), spec.grid.points(), spec.dims.m, probes)?;
    let (report, adjoint) = optimality_report(target, &u, &dirs, &PROBE_EPSILONS, bank, opts.mode, &opts.bsde)?;
    Ok(OptimizeRun { hamiltonian: ham, control, states, report, reported_on, adjoint })
}

/// Smooth random probe directions with seeds derived from the run seed.
pub fn directions(seed: u64, paths: usize, points: usize, m: usize, count: usize) -> Result<Vec<Process>> {
    (0..count)
        .map(|i| probe_direction(seed.wrapping_mul(1_000_003).wrapping_add(17 + i as u64), paths, points, m, 0.9, 1.0))
        .collect()
}

/// Mean and second moment per component and grid point.
pub fn moments(p: &Process) -> (Vec<f64>, Vec<f64>) {
    let w = p.width();
    let paths = p.paths() as f64;
    let mut second = vec![0.0; p.points() * w];
    for k in 0..p.points() {
        for chunk in p.step(k).chunks(w.max(1)) {
            for (c, v) in chunk.iter().enumerate() {
                second[k * w + c] += v * v / paths;
            }
        }
    }
    (p.mean_track().to_vec(), second)
}

