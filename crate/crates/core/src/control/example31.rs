//! The scalar worked example: a problem with cross weights whose untransformed
//! Hamiltonian window is empty but whose transformed problem is solvable in
//! closed form, x(s) = x₀e^{−ρs/2}, y = z = 0, u* = −x.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{eliminate_cross_terms, TransformedSpec};
use crate::model::{
    CoefficientSet, CostSet, Dims, InitialState, MarkMeasure, MatrixTrack, ProblemSpec, TimeGrid,
};

/// The time-dependent parameter a(·): constant or one value per grid point.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarProfile {
    Constant(f64),
    Sampled(Vec<f64>),
}

impl ScalarProfile {
    fn at(&self, k: usize) -> f64 {
        match self {
            ScalarProfile::Constant(v) => *v,
            ScalarProfile::Sampled(v) => v[k.min(v.len() - 1)],
        }
    }

    fn track(&self, f: impl Fn(f64) -> f64) -> MatrixTrack {
        match self {
            ScalarProfile::Constant(v) => MatrixTrack::scalar(f(*v)),
            ScalarProfile::Sampled(v) => MatrixTrack::Sampled(
                v.iter().map(|&a| nalgebra::DMatrix::from_element(1, 1, f(a))).collect(),
            ),
        }
    }
}

fn check_params(rho: f64, a: &ScalarProfile, grid: &TimeGrid) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Invalid(format!("example parameter rho={rho} must be positive")));
    }
    if let ScalarProfile::Sampled(v) = a {
        if v.len() != grid.points() {
            return Err(Error::Shape(format!("a(.) has {} samples, grid has {} points", v.len(), grid.points())));
        }
    }
    for k in 0..grid.points() {
        let ak = a.at(k);
        if !(ak + rho > 0.0) {
            return Err(Error::Invalid(format!("example parameter a+rho={} at s={} must be positive", ak + rho, grid.s(k))));
        }
    }
    Ok(())
}

/// A = −(a+2ρ), Ā = a, B = −(a+3ρ/2), B̄ = a, C = C̄ = D = D̄ = √(2(a+ρ)),
/// no jumps, Q = Q̄ = S = S̄ = R = R̄ = 1.
pub fn example31_spec(rho: f64, a: &ScalarProfile, x0: f64, grid: TimeGrid, weight_k: f64) -> Result<ProblemSpec> {
    check_params(rho, a, &grid)?;
    let dims = Dims { n: 1, m: 1, d: 1, l: 0 };
    let mut c = CoefficientSet::zeros(dims, 0);
    let sigma = a.track(|v| (2.0 * (v + rho)).sqrt());
    c.drift = a.track(|v| -(v + 2.0 * rho));
    c.drift_mean = a.track(|v| v);
    c.control_drift = a.track(|v| -(v + 1.5 * rho));
    c.control_drift_mean = a.track(|v| v);
    c.diffusion = vec![sigma.clone()];
    c.diffusion_mean = vec![sigma.clone()];
    c.control_diffusion = vec![sigma.clone()];
    c.control_diffusion_mean = vec![sigma];
    let one = MatrixTrack::scalar(1.0);
    let cost = CostSet {
        state_weight: one.clone(),
        state_weight_mean: one.clone(),
        cross_weight: one.clone(),
        cross_weight_mean: one.clone(),
        control_weight: one.clone(),
        control_weight_mean: one,
    };
    ProblemSpec {
        dims,
        coeffs: c,
        cost,
        marks: MarkMeasure::empty(),
        grid,
        initial: InitialState::Deterministic(vec![x0]),
        weight_k,
    }
    .validated()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Example31Oracle {
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

/// Closed-form solution on the grid. The solution does not depend on a(·).
pub fn example31_oracle(rho: f64, a: &ScalarProfile, x0: f64, grid: &TimeGrid) -> Result<Example31Oracle> {
    check_params(rho, a, grid)?;
    let s: Vec<f64> = (0..grid.points()).map(|k| grid.s(k)).collect();
    let x: Vec<f64> = s.iter().map(|&t| x0 * (-0.5 * rho * (t - grid.s(0))).exp()).collect();
    let zero = vec![0.0; s.len()];
    Ok(Example31Oracle { u: x.iter().map(|v| -v).collect(), y: zero.clone(), z: zero, x, s })
}

/// The problem together with its cross-term-free form.
pub fn example31_problem(
    rho: f64,
    a: &ScalarProfile,
    x0: f64,
    grid: TimeGrid,
    weight_k: f64,
) -> Result<(ProblemSpec, TransformedSpec)> {
    let spec = example31_spec(rho, a, x0, grid, weight_k)?;
    let t = eliminate_cross_terms(&spec)?;
    Ok((spec, t))
}
