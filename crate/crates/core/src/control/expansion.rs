//! Exact second-order expansion of the cost around a control, probe
//! directions, and the optimality report built from them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::backward::{AdjointSolution, BsdeOptions};
use crate::error::{Error, Result};
use crate::forward::{simulate_mfsde, ControlInput, MeanMode, NoiseBank};
use crate::model::{ForcingTuple, InitialState, Process, ProblemSpec};

use super::cost::{cost_form, evaluate_cost};
use super::synthesis::{solve_adjoint, stationarity_residual};

/// Smooth random direction: per-path white noise through the one-pole
/// filter v_{k+1} = pole·v_k + √(1 − pole²)·ξ_k, scaled by `scale`.
pub fn probe_direction(seed: u64, paths: usize, points: usize, width: usize, pole: f64, scale: f64) -> Result<Process> {
    if !(0.0..1.0).contains(&pole) {
        return Err(Error::Invalid(format!("filter pole {pole} outside [0, 1)")));
    }
    let gain = (1.0 - pole * pole).sqrt();
    let mut samples = vec![0.0; paths * points * width];
    for p in 0..paths {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64);
        let mut v: Vec<f64> = (0..width).map(|_| StandardNormal.sample(&mut rng)).collect();
        for k in 0..points {
            let base = (k * paths + p) * width;
            for c in 0..width {
                samples[base + c] = scale * v[c];
                let xi: f64 = StandardNormal.sample(&mut rng);
                v[c] = pole * v[c] + gain * xi;
            }
        }
    }
    Process::from_samples(paths, points, width, samples)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub epsilon: f64,
    pub direction: usize,
    /// J(u + εv) − J(u)
    pub delta_j: f64,
    /// E Σ w e^{2Ks}(⟨Qx + Sᵀu, x⁰⟩ + ⟨Sx + Ru, v⟩), mean terms included
    pub first_order: f64,
    /// E Σ w e^{2Ks} g(x⁰, v)
    pub second_order: f64,
    /// ⟨stationarity residual, v⟩ in the same weighted inner product, when an adjoint is given
    pub adjoint_first_order: Option<f64>,
    /// |ΔJ − (ε·first + ε²/2·second)| / (|ΔJ| + |ε·first + ε²/2·second| + 1e-300)
    pub identity_error: f64,
}

/// ΔJ against ε·(first-order term) + ε²/2·(g-functional of the variational
/// state) for each ε; all simulations share `bank`.
#[allow(clippy::too_many_arguments)]
pub fn quadratic_expansion_check(
    spec: &ProblemSpec,
    u_star: &Process,
    direction: &Process,
    direction_id: usize,
    epsilons: &[f64],
    bank: &NoiseBank,
    mode: MeanMode,
    residual: Option<&Process>,
) -> Result<Vec<ProbeRow>> {
    let kk = spec.weight_k;
    let none = ForcingTuple::none();
    let x_star = simulate_mfsde(spec, ControlInput::Open(u_star), &none, bank, mode)?.states;
    let zero_init = spec.with_initial(InitialState::zero(spec.dims.n));
    let x0 = simulate_mfsde(&zero_init, ControlInput::Open(direction), &none, bank, mode)?.states;
    let j_star = evaluate_cost(spec, &x_star, u_star, kk)?;
    let first = cost_form(spec, (&x_star, u_star), (&x0, direction), kk)?;
    let second = cost_form(spec, (&x0, direction), (&x0, direction), kk)?;
    let adjoint_first = match residual {
        Some(r) => Some(inner_product(spec, r, direction)?),
        None => None,
    };
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let u_eps = u_star.lin_comb(1.0, direction, eps)?;
        let x_eps = simulate_mfsde(spec, ControlInput::Open(&u_eps), &none, bank, mode)?.states;
        let delta_j = evaluate_cost(spec, &x_eps, &u_eps, kk)? - j_star;
        let rhs = eps * first + 0.5 * eps * eps * second;
        rows.push(ProbeRow {
            epsilon: eps,
            direction: direction_id,
            delta_j,
            first_order: first,
            second_order: second,
            adjoint_first_order: adjoint_first,
            identity_error: (delta_j - rhs).abs() / (delta_j.abs() + rhs.abs() + 1e-300),
        });
    }
    Ok(rows)
}

/// E Σ_k w_k e^{2Ks_k} ⟨a, b⟩.
pub fn inner_product(spec: &ProblemSpec, a: &Process, b: &Process) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Shape("inner product of differently shaped processes".into()));
    }
    let q = spec.grid.weighted_quadrature(spec.weight_k);
    let paths = a.paths() as f64;
    Ok(q.iter()
        .enumerate()
        .map(|(k, w)| w * a.step(k).iter().zip(b.step(k)).map(|(x, y)| x * y).sum::<f64>() / paths)
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub cost: f64,
    pub stationarity_norm: f64,
    /// E|residual(s_k)|² per grid point
    pub stationarity_profile: Vec<f64>,
    pub probes: Vec<ProbeRow>,
    pub max_identity_error: f64,
    /// min over probes of ΔJ − ε·first_order (nonnegative under the definiteness condition)
    pub min_convexity_gap: f64,
    /// every probe has ΔJ ≥ −tolerance
    pub no_descent: bool,
}

/// Cost, stationarity and probe table of a candidate optimal control.
#[allow(clippy::too_many_arguments)]
pub fn optimality_report(
    spec: &ProblemSpec,
    u_star: &Process,
    directions: &[Process],
    epsilons: &[f64],
    bank: &NoiseBank,
    mode: MeanMode,
    bsde: &BsdeOptions,
) -> Result<(OptimalityReport, AdjointSolution)> {
    let kk = spec.weight_k;
    let x_star = simulate_mfsde(spec, ControlInput::Open(u_star), &ForcingTuple::none(), bank, mode)?.states;
    let cost = evaluate_cost(spec, &x_star, u_star, kk)?;
    let adjoint = solve_adjoint(spec, &x_star, u_star, kk, bank, bsde)?;
    let (res, stationarity_norm) = stationarity_residual(spec, &x_star, u_star, &adjoint)?;
    let mut probes = Vec::new();
    for (i, v) in directions.iter().enumerate() {
        probes.extend(quadratic_expansion_check(spec, u_star, v, i, epsilons, bank, mode, Some(&res))?);
    }
    let max_identity_error = probes.iter().map(|p| p.identity_error).fold(0.0, f64::max);
    let min_convexity_gap = probes
        .iter()
        .map(|p| p.delta_j - p.epsilon * p.first_order)
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * cost.abs().max(1e-12);
    let no_descent = probes.iter().all(|p| p.delta_j >= -tol - p.epsilon.abs() * p.first_order.abs());
    Ok((
        OptimalityReport {
            cost,
            stationarity_norm,
            stationarity_profile: res.second_moment_profile(None),
            probes,
            max_identity_error,
            min_convexity_gap,
            no_descent,
        },
        adjoint,
    ))
}
