//! Numerical check of the backward integrability estimate.

use crate::error::{Error, Result};
use crate::forward::{check_decay, DecayReport, InequalityReport};
use crate::model::{Process, ProblemSpec};
use crate::spectral::{compute_kappas, default_eps_bsde, default_eps_sde, estimate_constants};

use super::AdjointSolution;

/// E|y(t0)e^{Kt0}|² + (2κ−2K−ε)‖y‖² + ‖z‖² + ‖k‖²_ρ ≤ (L₂ + L₃ + 1/ε)‖f‖².
/// On a truncated grid a nonzero terminal value enters the right side with
/// weight 1 + ε(L₂ + L₃).
pub fn check_bsde_estimate(
    spec: &ProblemSpec,
    solution: &AdjointSolution,
    driver: &Process,
    epsilon: Option<f64>,
) -> Result<InequalityReport> {
    let weight_k = solution.weight_k;
    let kappas = compute_kappas(spec)?;
    if weight_k >= kappas.kappa {
        return Err(Error::Window(format!(
            "K={weight_k} >= kappa={}: backward solvability window K < kappa violated",
            kappas.kappa
        )));
    }
    let upper = 2.0 * kappas.kappa - 2.0 * weight_k;
    let eps = epsilon.unwrap_or_else(|| default_eps_bsde(&kappas, weight_k));
    if !(eps > 0.0 && eps < upper) {
        return Err(Error::Window(format!("epsilon={eps} outside (0, 2kappa-2K) = (0, {upper})")));
    }
    let consts = estimate_constants(spec, &kappas, weight_k, default_eps_sde(&kappas, weight_k), eps)?;
    let grid = &spec.grid;
    let n = spec.dims.n;
    let q = grid.weighted_quadrature(weight_k);
    let jw = spec.marks.entry_weights(n);
    let paths = solution.y.paths();
    let last = grid.num_steps;
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let pref = upper - eps;
    let fcoef = consts.l2 + consts.l3 + 1.0 / eps;
    let tcoef = 1.0 + eps * (consts.l2 + consts.l3);
    let mut lhs = vec![0.0; paths];
    let mut rhs = vec![0.0; paths];
    for p in 0..paths {
        lhs[p] = sq(solution.y.at(0, p)) * (2.0 * weight_k * grid.t0).exp();
        rhs[p] = tcoef * sq(solution.y.at(last, p)) * (2.0 * weight_k * grid.s(last)).exp();
        for k in 0..grid.points() {
            let kv: f64 = solution.k.at(k, p).iter().zip(&jw).map(|(a, w)| w * a * a).sum();
            lhs[p] += q[k] * (pref * sq(solution.y.at(k, p)) + sq(solution.z.at(k, p)) + kv);
            rhs[p] += q[k] * fcoef * sq(driver.at(k, p));
        }
    }
    Ok(InequalityReport::from_paths(&lhs, &rhs, eps, weight_k))
}

pub fn check_bsde_decay(solution: &AdjointSolution, spec: &ProblemSpec, tolerance: f64) -> DecayReport {
    check_decay(&solution.y, &spec.grid, solution.weight_k, tolerance, None)
}
