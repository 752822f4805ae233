//! α-continuation from the decoupled system to the full Hamiltonian system.
//! Each level is solved by damped Picard alternation (forward given the
//! adjoint, adjoint given the forward state), warm-started from the last
//! accepted level.

use serde::{Deserialize, Serialize};

use crate::backward::BsdeOptions;
use crate::error::{Error, Result};
use crate::forward::{MeanMode, NoiseBank};
use crate::model::ForcingTuple;
use crate::spectral::Kappas;

use super::system::{CoupledSystem, QuadrupleSolution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HamiltonianOptions {
    /// initial and maximal α step δ₀
    pub alpha_step: f64,
    /// weight λ of the new candidate in new = λ·candidate + (1−λ)·old
    pub damping: f64,
    /// Picard tolerance relative to max(1, ‖θ‖)
    pub tol: f64,
    pub max_iter: usize,
    pub min_step: f64,
    /// r̂ at or above which a level is rejected and δ halved
    pub slow_ratio: f64,
    /// r̂ below which a level counts as fast
    pub fast_ratio: f64,
    pub mode: MeanMode,
    /// allow K below the guaranteed window start
    pub exploratory: bool,
    pub bsde: BsdeOptions,
}

impl Default for HamiltonianOptions {
    fn default() -> Self {
        Self {
            alpha_step: 0.1,
            damping: 0.5,
            tol: 1e-8,
            max_iter: 200,
            min_step: 1e-4,
            slow_ratio: 0.9,
            fast_ratio: 0.6,
            mode: MeanMode::ExactMean,
            exploratory: false,
            bsde: BsdeOptions::default(),
        }
    }
}

/// One attempted α level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRecord {
    pub alpha: f64,
    pub step: f64,
    pub iterations: usize,
    /// geometric-mean contraction ratio over the level's iterations
    pub ratio: f64,
    /// last Picard distance relative to max(1, ‖θ‖)
    pub residual: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuationState {
    pub alpha: f64,
    pub step: f64,
    /// Picard distances of the last attempted level
    pub history: Vec<f64>,
    pub ratio: f64,
    pub log: Vec<LevelRecord>,
    pub warnings: Vec<String>,
}

/// Admission of K for the continuation method.
pub fn check_hamiltonian_window(kappas: &Kappas, weight_k: f64, exploratory: bool) -> Result<Option<String>> {
    if kappas.kappa1 <= -kappas.kappa2 {
        return Err(Error::Precondition(format!(
            "kappa1={} <= -kappa2={}: base case of the continuation needs kappa1 > -kappa2",
            kappas.kappa1, -kappas.kappa2
        )));
    }
    if weight_k >= kappas.kappa {
        return Err(Error::Window(format!(
            "K={weight_k} >= kappa={}: solvability window K < kappa violated",
            kappas.kappa
        )));
    }
    let start = 0.5 * (kappas.kappa1 - kappas.kappa2);
    if weight_k < start {
        if !exploratory {
            return Err(Error::Window(format!(
                "K={weight_k} < (kappa1-kappa2)/2={start}: below the guaranteed Hamiltonian window; use exploratory mode"
            )));
        }
        return Ok(Some(format!("K={weight_k} below the guaranteed window start {start}; exploratory run")));
    }
    if weight_k > start {
        return Ok(Some(format!(
            "K={weight_k} above the window start {start}: contraction is monitored empirically"
        )));
    }
    Ok(None)
}

struct LevelOutcome {
    solution: QuadrupleSolution,
    iterations: usize,
    distances: Vec<f64>,
    ratio: f64,
    residual: f64,
    converged: bool,
}

fn geometric_rate(d: &[f64]) -> f64 {
    let pos: Vec<f64> = d.iter().copied().take_while(|v| *v > 0.0).collect();
    if pos.len() < 2 {
        return 0.0;
    }
    let r = (pos[pos.len() - 1] / pos[0]).powf(1.0 / (pos.len() - 1) as f64);
    if pos.len() < d.len() {
        // an exact fixed point was reached
        r.min(1.0)
    } else {
        r
    }
}

fn blend(a: &crate::model::Process, b: &crate::model::Process, lam: f64) -> Result<crate::model::Process> {
    if lam == 1.0 {
        Ok(a.clone())
    } else {
        a.lin_comb(lam, b, 1.0 - lam)
    }
}

/// Damped Picard iteration at level α, warm-started from `start`.
fn level(
    sys: &CoupledSystem,
    alpha: f64,
    start: &QuadrupleSolution,
    forcing: &ForcingTuple,
    bank: &NoiseBank,
    opts: &HamiltonianOptions,
) -> Result<LevelOutcome> {
    let fw = sys.level_forward(alpha);
    let bw = sys.level_backward(alpha);
    let lam = opts.damping;
    let mut theta = start.clone();
    let mut distances = Vec::new();
    for it in 1..=opts.max_iter {
        let x_c = sys.forward_given(&fw, &theta.control, forcing, bank, opts.mode)?;
        let (y_c, z_c, k_c, _) = sys.backward_given(&bw, alpha, &x_c, Some(&x_c), forcing, bank, &opts.bsde)?;
        let next = sys.assemble(
            blend(&x_c, &theta.x, lam)?,
            blend(&y_c, &theta.y, lam)?,
            blend(&z_c, &theta.z, lam)?,
            blend(&k_c, &theta.k, lam)?,
        )?;
        let dist = sys.distances(&next, &theta)?.total().sqrt();
        let scale = sys.norms(&next).total().sqrt().max(1.0);
        distances.push(dist);
        theta = next;
        let rel = dist / scale;
        if !rel.is_finite() {
            return Err(Error::NonFinite { path: 0, step: 0 });
        }
        if rel <= opts.tol {
            return Ok(LevelOutcome {
                solution: theta,
                iterations: it,
                ratio: geometric_rate(&distances),
                distances,
                residual: rel,
                converged: true,
            });
        }
        // give up early when the iteration is visibly not contracting fast enough
        if distances.len() >= 4 {
            let tail = &distances[distances.len() - 4..];
            if geometric_rate(tail) >= opts.slow_ratio {
                return Ok(LevelOutcome {
                    solution: theta,
                    iterations: it,
                    ratio: geometric_rate(tail),
                    distances,
                    residual: rel,
                    converged: false,
                });
            }
        }
    }
    let ratio = geometric_rate(&distances);
    let residual = distances.last().copied().unwrap_or(0.0) / sys.norms(&theta).total().sqrt().max(1.0);
    Ok(LevelOutcome { solution: theta, iterations: opts.max_iter, distances, ratio, residual, converged: false })
}

/// Solve the Hamiltonian system of a spec without cross weights, with the
/// initial state and forcing ζ given. `forcing` = none for the control problem.
pub fn continuation_solve(
    sys: &CoupledSystem,
    forcing: &ForcingTuple,
    bank: &NoiseBank,
    opts: &HamiltonianOptions,
) -> Result<(QuadrupleSolution, ContinuationState)> {
    if !(opts.alpha_step > 0.0 && opts.alpha_step <= 1.0) {
        return Err(Error::Invalid(format!("alpha step {} outside (0, 1]", opts.alpha_step)));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Invalid(format!("damping {} outside (0, 1]", opts.damping)));
    }
    let mut warnings = Vec::new();
    if let Some(w) = check_hamiltonian_window(&sys.kappas, sys.weight_k, opts.exploratory)? {
        log::warn!("{w}");
        warnings.push(w);
    }
    let mut theta = sys.solve_base_case(forcing, bank, opts.mode, &opts.bsde)?;
    let mut state = ContinuationState {
        alpha: 0.0,
        step: opts.alpha_step,
        history: Vec::new(),
        ratio: 0.0,
        log: vec![LevelRecord { alpha: 0.0, step: 0.0, iterations: 0, ratio: 0.0, residual: 0.0, accepted: true }],
        warnings,
    };
    let mut fast = 0usize;
    let mut last_cap: Option<f64> = None;
    while state.alpha < 1.0 {
        let target = (state.alpha + state.step).min(1.0);
        let out = level(sys, target, &theta, forcing, bank, opts)?;
        let accepted = out.converged && out.ratio < opts.slow_ratio;
        state.log.push(LevelRecord {
            alpha: target,
            step: state.step,
            iterations: out.iterations,
            ratio: out.ratio,
            residual: out.residual,
            accepted,
        });
        state.history = out.distances;
        if accepted {
            state.alpha = target;
            state.ratio = out.ratio;
            theta = out.solution;
            if out.ratio < opts.fast_ratio {
                fast += 1;
                if fast >= 2 {
                    state.step = (state.step * 2.0).min(opts.alpha_step);
                    fast = 0;
                }
            } else {
                fast = 0;
            }
        } else {
            if out.iterations >= opts.max_iter {
                last_cap = Some(out.residual);
            }
            fast = 0;
            state.step *= 0.5;
            if state.step < opts.min_step {
                if let Some(last) = last_cap {
                    return Err(Error::IterationCap { cap: opts.max_iter, alpha: state.alpha, last });
                }
                return Err(Error::NoContraction { alpha: state.alpha, min_step: opts.min_step });
            }
        }
    }
    Ok((theta, state))
}
