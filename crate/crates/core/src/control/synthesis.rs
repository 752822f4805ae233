//! Open-loop control from a Hamiltonian solution, the adjoint equation of
//! a given admissible pair, and the stationarity residual.

use crate::backward::{solve_mfbsde, AdjointSolution, BsdeOptions};
use crate::error::Result;
use crate::forward::{ForwardSystem, NoiseBank};
use crate::hamiltonian::transform::inverse_track;
use crate::hamiltonian::{coupling, QuadrupleSolution};
use crate::model::{split_apply, split_apply_slice, BlockPair, Process, ProblemSpec};

fn neg_inverse(spec: &ProblemSpec) -> Result<BlockPair> {
    let r = spec.cost.control_pair()?;
    Ok(BlockPair { fluct: inverse_track(&r.fluct)?.scaled(-1.0), mean: inverse_track(&r.mean)?.scaled(-1.0) })
}

/// Λ[y, z, k] for the coefficients of `spec`.
pub fn coupling_of(spec: &ProblemSpec, y: &Process, z: &Process, k: &Process) -> Result<Process> {
    coupling(&ForwardSystem::from_spec(spec)?, &spec.marks.flat_weights(), spec.dims.m, y, z, k)
}

/// u* = −(R¹)⁻¹(Λ¹ + S¹x¹) − (R²)⁻¹(Λ² + S²x²), with `spec` the original
/// problem (cross weights included). The coupling Λ is the same for the
/// original and the transformed problem.
pub fn synthesize_control(spec: &ProblemSpec, sol: &QuadrupleSolution) -> Result<Process> {
    let mut inner = coupling_of(spec, &sol.y, &sol.z, &sol.k)?;
    let s = spec.cost.cross_pair()?;
    if !s.is_zero() {
        split_apply_slice(&s, &sol.x, 0, false, &mut inner, 1.0)?;
    }
    split_apply(&neg_inverse(spec)?, &inner, false)
}

/// Qx + Q̄Ex + Sᵀu + S̄ᵀEu.
pub fn adjoint_driver(spec: &ProblemSpec, x: &Process, u: &Process) -> Result<Process> {
    let mut f = split_apply(&spec.cost.state_pair()?, x, false)?;
    let s = spec.cost.cross_pair()?;
    if !s.is_zero() {
        split_apply_slice(&s, u, 0, true, &mut f, 1.0)?;
    }
    Ok(f)
}

/// Adjoint processes of the admissible pair (x, u).
pub fn solve_adjoint(
    spec: &ProblemSpec,
    x: &Process,
    u: &Process,
    weight_k: f64,
    bank: &NoiseBank,
    opts: &BsdeOptions,
) -> Result<AdjointSolution> {
    let driver = adjoint_driver(spec, x, u)?;
    solve_mfbsde(spec, &driver, None, weight_k, None, Some(x), bank, opts)
}

/// Λ + Sx + S̄Ex + Ru + R̄Eu per path and grid point, with its weighted norm.
pub fn stationarity_residual(
    spec: &ProblemSpec,
    x: &Process,
    u: &Process,
    adjoint: &AdjointSolution,
) -> Result<(Process, f64)> {
    let mut res = coupling_of(spec, &adjoint.y, &adjoint.z, &adjoint.k)?;
    let s = spec.cost.cross_pair()?;
    if !s.is_zero() {
        split_apply_slice(&s, x, 0, false, &mut res, 1.0)?;
    }
    split_apply_slice(&spec.cost.control_pair()?, u, 0, false, &mut res, 1.0)?;
    let norm = res.weighted_norm(&spec.grid, adjoint.weight_k, None).sqrt();
    Ok((res, norm))
}
