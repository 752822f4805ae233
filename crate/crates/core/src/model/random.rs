//! Seeded random problems for randomized test suites and benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    CoefficientSet, CostSet, Dims, InitialState, MarkComponent, MarkMeasure, MatrixTrack, ProblemSpec, TimeGrid,
};
use crate::spectral::{check_pd, compute_kappas, DELTA_PD};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomProblem {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    /// atoms of a single jump component; 0 disables jumps
    pub jump_atoms: usize,
    pub cross_terms: bool,
    pub mean_field: bool,
    /// lower bound enforced on both κ₁ and κ₂
    pub dissipation: f64,
    pub horizon: f64,
    pub dt: f64,
    pub gaussian_initial: bool,
}

impl Default for RandomProblem {
    fn default() -> Self {
        Self {
            n: 2,
            m: 1,
            d: 1,
            jump_atoms: 2,
            cross_terms: false,
            mean_field: true,
            dissipation: 0.5,
            horizon: 4.0,
            dt: 0.01,
            gaussian_initial: false,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-half_width..half_width))
}

fn gram(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let g = uniform(rng, n, n, 1.0);
    &g * g.transpose() * (scale / n as f64)
}

/// Draw a problem whose κ₁, κ₂ are at least `cfg.dissipation`, with κ₁ < 3κ₂
/// so the Hamiltonian window is nonempty, and whose cost satisfies the
/// definiteness condition.
pub fn random_problem(seed: u64, cfg: &RandomProblem) -> Result<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m, d) = (cfg.n, cfg.m, cfg.d);
    let mf = if cfg.mean_field { 1.0 } else { 0.0 };
    let marks = if cfg.jump_atoms > 0 {
        MarkMeasure::new(vec![MarkComponent {
            atoms: (0..cfg.jump_atoms).map(|a| vec![0.5 + a as f64]).collect(),
            weights: (0..cfg.jump_atoms).map(|_| rng.random_range(0.2..1.0)).collect(),
        }])?
    } else {
        MarkMeasure::empty()
    };
    let l = marks.len();
    let atoms = marks.atoms_total();
    let dims = Dims { n, m, d, l };
    let mut c = CoefficientSet::zeros(dims, atoms);
    let k = |mat: DMatrix<f64>| MatrixTrack::Constant(mat);
    c.drift = k(uniform(&mut rng, n, n, 0.5));
    c.drift_mean = k(uniform(&mut rng, n, n, 0.3) * mf);
    c.control_drift = k(uniform(&mut rng, n, m, 1.0));
    c.control_drift_mean = k(uniform(&mut rng, n, m, 0.5) * mf);
    for i in 0..d {
        c.diffusion[i] = k(uniform(&mut rng, n, n, 0.4));
        c.diffusion_mean[i] = k(uniform(&mut rng, n, n, 0.3) * mf);
        c.control_diffusion[i] = k(uniform(&mut rng, n, m, 0.3));
        c.control_diffusion_mean[i] = k(uniform(&mut rng, n, m, 0.2) * mf);
    }
    for a in 0..atoms {
        c.jump[a] = k(uniform(&mut rng, n, n, 0.3));
        c.jump_mean[a] = k(uniform(&mut rng, n, n, 0.2) * mf);
        c.control_jump[a] = k(uniform(&mut rng, n, m, 0.2));
        c.control_jump_mean[a] = k(uniform(&mut rng, n, m, 0.1) * mf);
    }
    let mut r = gram(&mut rng, m, 0.2);
    for i in 0..m {
        r[(i, i)] += rng.random_range(0.5..1.5);
    }
    let mut cost = CostSet {
        state_weight: k(gram(&mut rng, n, 1.0)),
        state_weight_mean: k(gram(&mut rng, n, 0.5) * mf),
        cross_weight: MatrixTrack::zeros(m, n),
        cross_weight_mean: MatrixTrack::zeros(m, n),
        control_weight: k(r),
        control_weight_mean: k(gram(&mut rng, m, 0.3) * mf),
    };
    if cfg.cross_terms {
        let s = uniform(&mut rng, m, n, 0.6);
        let sbar = uniform(&mut rng, m, n, 0.4) * mf;
        let mut scale = 1.0;
        loop {
            cost.cross_weight = k(&s * scale);
            cost.cross_weight_mean = k(&sbar * scale);
            if check_pd(&cost, DELTA_PD)?.pass {
                break;
            }
            scale *= 0.5;
        }
    }
    let initial = if cfg.gaussian_initial {
        InitialState::Gaussian {
            mean: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            std: (0..n).map(|_| rng.random_range(0.1..0.5)).collect(),
        }
    } else {
        InitialState::Deterministic((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    };
    let mut spec = ProblemSpec {
        dims,
        coeffs: c,
        cost,
        marks,
        grid: TimeGrid::new(0.0, cfg.horizon, cfg.dt)?,
        initial,
        weight_k: 0.0,
    }
    .validated()?;
    // shifting A by −cI raises κ₁ and κ₂ by c; shifting Ā by +cI lowers κ₁ alone
    let kap = compute_kappas(&spec)?;
    let lift = (cfg.dissipation - kap.kappa).max(0.0);
    spec.coeffs.drift = spec.coeffs.drift.shifted(-lift);
    let kap = compute_kappas(&spec)?;
    if kap.kappa1 > 2.0 * kap.kappa2 {
        let excess = kap.kappa1 - 2.0 * kap.kappa2;
        spec.coeffs.drift_mean = spec.coeffs.drift_mean.shifted(excess);
        let kap = compute_kappas(&spec)?;
        if kap.kappa < cfg.dissipation {
            let lift = cfg.dissipation - kap.kappa;
            spec.coeffs.drift = spec.coeffs.drift.shifted(-lift);
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_meet_their_constraints() {
        for seed in 0..40 {
            let cfg = RandomProblem { cross_terms: seed % 2 == 0, n: 1 + (seed as usize % 3), ..Default::default() };
            let spec = random_problem(seed, &cfg).unwrap();
            let k = compute_kappas(&spec).unwrap();
            assert!(k.kappa >= cfg.dissipation - 1e-9, "{k:?}");
            assert!(k.kappa1 < 3.0 * k.kappa2, "{k:?}");
            assert!(check_pd(&spec.cost, DELTA_PD).unwrap().pass);
            assert_eq!(spec.has_cross_terms(), cfg.cross_terms);
        }
    }

    #[test]
    fn same_seed_same_problem() {
        let cfg = RandomProblem::default();
        assert_eq!(random_problem(3, &cfg).unwrap(), random_problem(3, &cfg).unwrap());
    }
}
