//! Common random numbers. Each path owns a ChaCha stream selected by its
//! index, so results do not depend on thread count, and a bank for a longer
//! horizon extends a shorter one with identical prefixes.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MarkMeasure, TimeGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseBank {
    seed: u64,
    paths: usize,
    steps: usize,
    dt: f64,
    d: usize,
    atoms: usize,
    init_dim: usize,
    /// Brownian increments, `[(k·paths + p)·d + i]`
    dw: Vec<f64>,
    /// Jump counts per atom, `[(k·paths + p)·atoms + a]`
    jumps: Vec<u16>,
    /// w_a·dt per atom
    compensator: Vec<f64>,
    /// Standard normals for the initial state, `[p·init_dim + c]`
    init: Vec<f64>,
}

struct PathDraws {
    dw: Vec<f64>,
    jumps: Vec<u16>,
    init: Vec<f64>,
}

impl NoiseBank {
    pub fn generate(seed: u64, paths: usize, grid: &TimeGrid, d: usize, marks: &MarkMeasure, init_dim: usize) -> Result<Self> {
        if paths == 0 {
            return Err(Error::NoPaths);
        }
        let steps = grid.num_steps;
        let dt = grid.dt;
        let atoms = marks.atoms_total();
        let offsets = marks.offsets();
        let sqdt = dt.sqrt();
        let mut samplers = Vec::new();
        for (j, comp) in marks.components().iter().enumerate() {
            let lam = comp.intensity() * dt;
            if lam > 0.0 {
                let pois = Poisson::new(lam).map_err(|e| Error::Invalid(format!("jump intensity: {e}")))?;
                let pick = WeightedIndex::new(&comp.weights).map_err(|e| Error::Invalid(format!("mark weights: {e}")))?;
                samplers.push((offsets[j], pois, pick));
            }
        }
        let draws: Vec<PathDraws> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(p as u64);
                let init: Vec<f64> = (0..init_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut dw = Vec::with_capacity(steps * d);
                let mut jumps = vec![0u16; steps * atoms];
                for k in 0..steps {
                    for _ in 0..d {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        dw.push(z * sqdt);
                    }
                    for (off, pois, pick) in &samplers {
                        let count = pois.sample(&mut rng) as usize;
                        for _ in 0..count {
                            let a = off + pick.sample(&mut rng);
                            let slot = &mut jumps[k * atoms + a];
                            *slot = slot.saturating_add(1);
                        }
                    }
                }
                PathDraws { dw, jumps, init }
            })
            .collect();
        let mut dw = vec![0.0; steps * paths * d];
        let mut jumps = vec![0u16; steps * paths * atoms];
        let mut init = Vec::with_capacity(paths * init_dim);
        for (p, pd) in draws.iter().enumerate() {
            for k in 0..steps {
                dw[(k * paths + p) * d..(k * paths + p + 1) * d].copy_from_slice(&pd.dw[k * d..(k + 1) * d]);
                jumps[(k * paths + p) * atoms..(k * paths + p + 1) * atoms]
                    .copy_from_slice(&pd.jumps[k * atoms..(k + 1) * atoms]);
            }
            init.extend_from_slice(&pd.init);
        }
        let compensator = marks.flat_weights().iter().map(|w| w * dt).collect();
        Ok(Self { seed, paths, steps, dt, d, atoms, init_dim, dw, jumps, compensator, init })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn paths(&self) -> usize {
        self.paths
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn brownian_dim(&self) -> usize {
        self.d
    }
    pub fn atoms(&self) -> usize {
        self.atoms
    }

    #[inline]
    pub fn dw(&self, k: usize, p: usize) -> &[f64] {
        let b = (k * self.paths + p) * self.d;
        &self.dw[b..b + self.d]
    }

    #[inline]
    pub fn jump_counts(&self, k: usize, p: usize) -> &[u16] {
        let b = (k * self.paths + p) * self.atoms;
        &self.jumps[b..b + self.atoms]
    }

    /// Compensated increment ΔÑ_a = count − w_a·dt.
    #[inline]
    pub fn compensated(&self, k: usize, p: usize, a: usize) -> f64 {
        self.jumps[(k * self.paths + p) * self.atoms + a] as f64 - self.compensator[a]
    }

    pub fn init_normals(&self, p: usize) -> &[f64] {
        &self.init[p * self.init_dim..(p + 1) * self.init_dim]
    }

    /// Check that the bank covers a grid and system of the given shape.
    pub fn check_covers(&self, grid: &TimeGrid, d: usize, atoms: usize, init_dim: usize) -> Result<()> {
        if (grid.dt - self.dt).abs() > 1e-15 * self.dt.max(1.0) {
            return Err(Error::Shape(format!("noise bank dt={} but grid dt={}", self.dt, grid.dt)));
        }
        if grid.num_steps > self.steps {
            return Err(Error::Shape(format!("noise bank has {} steps, grid needs {}", self.steps, grid.num_steps)));
        }
        if d != self.d || atoms != self.atoms {
            return Err(Error::Shape(format!(
                "noise bank has d={}, atoms={}; problem needs d={d}, atoms={atoms}",
                self.d, self.atoms
            )));
        }
        if init_dim > self.init_dim {
            return Err(Error::Shape("noise bank lacks initial-state draws".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarkComponent;

    fn marks() -> MarkMeasure {
        MarkMeasure::new(vec![MarkComponent { atoms: vec![vec![1.0], vec![-2.0]], weights: vec![2.0, 1.0] }]).unwrap()
    }

    #[test]
    fn same_seed_same_bank() {
        let g = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
        let a = NoiseBank::generate(42, 16, &g, 2, &marks(), 1).unwrap();
        let b = NoiseBank::generate(42, 16, &g, 2, &marks(), 1).unwrap();
        assert_eq!(a, b);
        let c = NoiseBank::generate(43, 16, &g, 2, &marks(), 1).unwrap();
        assert_ne!(a.dw, c.dw);
    }

    #[test]
    fn longer_horizon_extends_prefix() {
        let g1 = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
        let g2 = TimeGrid::new(0.0, 2.0, 0.01).unwrap();
        let a = NoiseBank::generate(5, 8, &g1, 1, &marks(), 1).unwrap();
        let b = NoiseBank::generate(5, 8, &g2, 1, &marks(), 1).unwrap();
        for k in 0..g1.num_steps {
            for p in 0..8 {
                assert_eq!(a.dw(k, p), b.dw(k, p));
                assert_eq!(a.jump_counts(k, p), b.jump_counts(k, p));
            }
        }
    }

    #[test]
    fn increment_statistics() {
        let g = TimeGrid::new(0.0, 1.0, 0.01).unwrap();
        let bank = NoiseBank::generate(9, 2000, &g, 1, &marks(), 0).unwrap();
        let n = (bank.paths * bank.steps) as f64;
        let mean: f64 = bank.dw.iter().sum::<f64>() / n;
        let var: f64 = bank.dw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        // sample variance of n normals has relative sd sqrt(2/n) ≈ 0.003
        assert!((var / g.dt - 1.0).abs() < 0.015, "var/dt = {}", var / g.dt);
        assert!(mean.abs() < 4.0 * (g.dt / n).sqrt());
        // compensated jump increments have mean zero and variance w·dt
        for a in 0..2 {
            let w = [2.0, 1.0][a];
            let mut s = 0.0;
            let mut s2 = 0.0;
            for k in 0..bank.steps {
                for p in 0..bank.paths {
                    let v = bank.compensated(k, p, a);
                    s += v;
                    s2 += v * v;
                }
            }
            let m = s / n;
            let v = s2 / n - m * m;
            assert!(m.abs() < 4.0 * (w * g.dt / n).sqrt(), "atom {a} mean {m}");
            assert!((v / (w * g.dt) - 1.0).abs() < 0.05, "atom {a} var ratio {}", v / (w * g.dt));
        }
    }
}
