//! Numerical checks of the forward integrability estimate and of the
//! decay of E|x(s)e^{Ks}|².

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ForcingTuple, Process, ProblemSpec, TimeGrid};
use crate::spectral::{compute_kappas, default_eps_sde, noise_norms_at};

/// One side-by-side evaluation of an integral inequality LHS ≤ RHS.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs
    pub slack: f64,
    /// Monte Carlo standard error of lhs − rhs
    pub std_error: f64,
    /// lhs ≤ rhs + 3·std_error (plus rounding allowance)
    pub holds: bool,
    pub epsilon: f64,
    pub weight_k: f64,
}

impl InequalityReport {
    /// Build from per-path contributions of both sides.
    pub fn from_paths(lhs: &[f64], rhs: &[f64], epsilon: f64, weight_k: f64) -> Self {
        let m = lhs.len() as f64;
        let l = lhs.iter().sum::<f64>() / m;
        let r = rhs.iter().sum::<f64>() / m;
        let diffs: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
        let mean = l - r;
        let var = if lhs.len() > 1 {
            diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        let std_error = (var / m).sqrt();
        let holds = l - r <= 3.0 * std_error + 1e-12 * (l.abs() + r.abs());
        Self { lhs: l, rhs: r, slack: r - l, std_error, holds, epsilon, weight_k }
    }
}

/// Evaluate the forward estimate
/// (−2K + 2κ − 3ε)‖x‖² ≤ L₁E|x_t e^{Kt}|² + ∫[(L₁/ε)|b|² + (2 + ‖C¹‖²/ε)|σ|² + (2 + ‖M¹‖²_ρ/ε)‖γ‖²_ρ]e^{2Kr}dr.
/// `forcing_weight` is the K₁ for which the forcing is known to be integrable.
pub fn check_sde_estimate(
    spec: &ProblemSpec,
    states: &Process,
    forcing: &ForcingTuple,
    weight_k: f64,
    epsilon: Option<f64>,
    forcing_weight: Option<f64>,
) -> Result<InequalityReport> {
    let kappas = compute_kappas(spec)?;
    if weight_k >= kappas.kappa {
        return Err(Error::Window(format!(
            "K={weight_k} >= kappa={}: forward integrability window K < kappa violated",
            kappas.kappa
        )));
    }
    if let Some(k1) = forcing_weight {
        if weight_k > k1 {
            return Err(Error::Window(format!("K={weight_k} > K1={k1}: forcing weight window K <= K1 violated")));
        }
    }
    let upper = (-2.0 * weight_k + 2.0 * kappas.kappa) / 3.0;
    let eps = epsilon.unwrap_or_else(|| default_eps_sde(&kappas, weight_k));
    if !(eps > 0.0 && eps < upper) {
        return Err(Error::Window(format!("epsilon={eps} outside (0, (-2K+2kappa)/3) = (0, {upper})")));
    }
    let c = &spec.coeffs;
    let diffusion = c.diffusion_pairs()?;
    let jump = c.jump_pairs()?;
    let weights = spec.marks.flat_weights();
    let grid = &spec.grid;
    let n = spec.dims.n;
    let points = grid.points();
    let norms: Vec<[f64; 4]> = (0..points).map(|k| noise_norms_at(&diffusion, &jump, &weights, k)).collect();
    let sup_mean = norms.iter().map(|v| v[1] + v[3]).fold(0.0f64, f64::max);
    let l1 = 1.0 + 2.0 * sup_mean / (-2.0 * weight_k + 2.0 * kappas.kappa1 - eps);
    let pref = -2.0 * weight_k + 2.0 * kappas.kappa - 3.0 * eps;
    let q = grid.weighted_quadrature(weight_k);
    let jw = spec.marks.entry_weights(n);
    let paths = states.paths();
    let mut lhs = vec![0.0; paths];
    let mut rhs = vec![0.0; paths];
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let e0 = (2.0 * weight_k * grid.t0).exp();
    for p in 0..paths {
        rhs[p] = l1 * sq(states.at(0, p)) * e0;
    }
    for k in 0..points {
        let [c1, _, m1, _] = norms[k];
        for p in 0..paths {
            lhs[p] += pref * q[k] * sq(states.at(k, p));
            let mut r = 0.0;
            if let Some(b) = &forcing.drift {
                r += l1 / eps * sq(b.at(k, p));
            }
            if let Some(s) = &forcing.diffusion {
                r += (2.0 + c1 / eps) * sq(s.at(k, p));
            }
            if let Some(g) = &forcing.jump {
                let v: f64 = g.at(k, p).iter().zip(&jw).map(|(a, w)| w * a * a).sum();
                r += (2.0 + m1 / eps) * v;
            }
            rhs[p] += q[k] * r;
        }
    }
    Ok(InequalityReport::from_paths(&lhs, &rhs, eps, weight_k))
}

/// Tail behaviour of m(s) = E|p(s)e^{Ks}|².
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub profile: Vec<f64>,
    pub initial: f64,
    pub terminal: f64,
    /// mean of m over the last 10% of grid points
    pub tail_average: f64,
    /// m(T)/m(t0)
    pub tail_ratio: f64,
    /// tail_average / m(t0)
    pub tail_average_ratio: f64,
    pub tolerance: f64,
    /// tail_average ≤ tolerance · m(t0)
    pub decays: bool,
}

pub fn check_decay(process: &Process, grid: &TimeGrid, weight_k: f64, tolerance: f64, entry_weights: Option<&[f64]>) -> DecayReport {
    let raw = process.second_moment_profile(entry_weights);
    let profile: Vec<f64> = raw.iter().enumerate().map(|(k, v)| v * (2.0 * weight_k * grid.s(k)).exp()).collect();
    let points = profile.len();
    let tail_len = (points / 10).max(1);
    let tail_average = profile[points - tail_len..].iter().sum::<f64>() / tail_len as f64;
    let initial = profile[0];
    let terminal = profile[points - 1];
    let ratio = |v: f64| {
        if initial > 0.0 {
            v / initial
        } else if v == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    DecayReport {
        initial,
        terminal,
        tail_average,
        tail_ratio: ratio(terminal),
        tail_average_ratio: ratio(tail_average),
        tolerance,
        decays: tail_average <= tolerance * initial || tail_average == 0.0,
        profile,
    }
}
