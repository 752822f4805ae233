//! Sampled processes on the grid: per-path values plus a mean track.
//! Storage is step-major, `samples[(k·paths + p)·width + c]`, so that the
//! cross-path reductions the backward regression needs are contiguous.

use crate::error::{Error, Result};
use crate::model::grid::TimeGrid;

#[derive(Clone, Debug, PartialEq)]
pub struct Process {
    paths: usize,
    points: usize,
    width: usize,
    samples: Vec<f64>,
    mean: Vec<f64>,
}

/// Output of [`split_mean`]: fluctuation per sample plus the empirical mean track.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanSplit {
    pub fluctuation: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Empirical mean per grid point, summed in path order.
pub fn empirical_mean(samples: &[f64], paths: usize, points: usize, width: usize) -> Result<Vec<f64>> {
    if paths == 0 {
        return Err(Error::NoPaths);
    }
    if samples.len() != paths * points * width {
        return Err(Error::Shape(format!(
            "{} samples for {paths} paths × {points} points × width {width}",
            samples.len()
        )));
    }
    let mut mean = vec![0.0; points * width];
    for k in 0..points {
        let m = &mut mean[k * width..(k + 1) * width];
        for p in 0..paths {
            let base = (k * paths + p) * width;
            for (mc, v) in m.iter_mut().zip(&samples[base..base + width]) {
                *mc += v;
            }
        }
        for mc in m.iter_mut() {
            *mc /= paths as f64;
        }
    }
    Ok(mean)
}

/// ζ ↦ (ζ − E ζ, E ζ) with the empirical mean.
pub fn split_mean(samples: &[f64], paths: usize, points: usize, width: usize) -> Result<MeanSplit> {
    let mean = empirical_mean(samples, paths, points, width)?;
    let mut fluctuation = samples.to_vec();
    for k in 0..points {
        let m = &mean[k * width..(k + 1) * width];
        for p in 0..paths {
            let base = (k * paths + p) * width;
            for (f, mc) in fluctuation[base..base + width].iter_mut().zip(m) {
                *f -= mc;
            }
        }
    }
    Ok(MeanSplit { fluctuation, mean })
}

impl MeanSplit {
    pub fn recombine(&self, paths: usize, points: usize, width: usize) -> Vec<f64> {
        let mut out = self.fluctuation.clone();
        for k in 0..points {
            let m = &self.mean[k * width..(k + 1) * width];
            for p in 0..paths {
                let base = (k * paths + p) * width;
                for (o, mc) in out[base..base + width].iter_mut().zip(m) {
                    *o += mc;
                }
            }
        }
        out
    }
}

impl Process {
    pub fn zeros(paths: usize, points: usize, width: usize) -> Self {
        Self {
            paths,
            points,
            width,
            samples: vec![0.0; paths * points * width],
            mean: vec![0.0; points * width],
        }
    }

    /// Samples with the empirical mean as the mean track.
    pub fn from_samples(paths: usize, points: usize, width: usize, samples: Vec<f64>) -> Result<Self> {
        let mean = empirical_mean(&samples, paths, points, width)?;
        Ok(Self { paths, points, width, samples, mean })
    }

    /// Samples with an externally supplied (e.g. exact) mean track.
    pub fn with_mean(paths: usize, points: usize, width: usize, samples: Vec<f64>, mean: Vec<f64>) -> Result<Self> {
        if paths == 0 {
            return Err(Error::NoPaths);
        }
        if samples.len() != paths * points * width || mean.len() != points * width {
            return Err(Error::Shape("process sample or mean length".into()));
        }
        Ok(Self { paths, points, width, samples, mean })
    }

    /// Deterministic process: every path equals the mean track.
    pub fn deterministic(paths: usize, points: usize, width: usize, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != points * width {
            return Err(Error::Shape(format!("mean track length {} != {}", mean.len(), points * width)));
        }
        let mut samples = Vec::with_capacity(paths * points * width);
        for k in 0..points {
            for _ in 0..paths {
                samples.extend_from_slice(&mean[k * width..(k + 1) * width]);
            }
        }
        Ok(Self { paths, points, width, samples, mean })
    }

    /// Deterministic process from a function of the grid point.
    pub fn from_fn(paths: usize, points: usize, width: usize, f: impl Fn(usize) -> Vec<f64>) -> Result<Self> {
        let mut mean = Vec::with_capacity(points * width);
        for k in 0..points {
            let v = f(k);
            if v.len() != width {
                return Err(Error::Shape(format!("value of width {} at point {k}, expected {width}", v.len())));
            }
            mean.extend(v);
        }
        Self::deterministic(paths, points, width, mean)
    }

    pub fn paths(&self) -> usize {
        self.paths
    }
    pub fn points(&self) -> usize {
        self.points
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
    pub fn mean_track(&self) -> &[f64] {
        &self.mean
    }

    #[inline]
    pub fn at(&self, k: usize, p: usize) -> &[f64] {
        let b = (k * self.paths + p) * self.width;
        &self.samples[b..b + self.width]
    }

    #[inline]
    pub fn at_mut(&mut self, k: usize, p: usize) -> &mut [f64] {
        let b = (k * self.paths + p) * self.width;
        &mut self.samples[b..b + self.width]
    }

    /// All paths at grid point k.
    #[inline]
    pub fn step(&self, k: usize) -> &[f64] {
        let b = k * self.paths * self.width;
        &self.samples[b..b + self.paths * self.width]
    }

    #[inline]
    pub fn step_mut(&mut self, k: usize) -> &mut [f64] {
        let b = k * self.paths * self.width;
        &mut self.samples[b..b + self.paths * self.width]
    }

    /// Grid point k (read) and k+1 (write), all paths.
    pub fn step_pair_mut(&mut self, k: usize) -> (&[f64], &mut [f64]) {
        let len = self.paths * self.width;
        let (head, tail) = self.samples.split_at_mut((k + 1) * len);
        (&head[k * len..], &mut tail[..len])
    }

    #[inline]
    pub fn mean_at(&self, k: usize) -> &[f64] {
        &self.mean[k * self.width..(k + 1) * self.width]
    }

    #[inline]
    pub fn mean_at_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.mean[k * self.width..(k + 1) * self.width]
    }

    /// Overwrite the mean track with the empirical mean.
    pub fn refresh_mean(&mut self) {
        self.mean = empirical_mean(&self.samples, self.paths, self.points, self.width)
            .expect("process shape is valid by construction");
    }

    /// Empirical mean of the samples, independent of the stored mean track.
    pub fn empirical_mean(&self) -> Vec<f64> {
        empirical_mean(&self.samples, self.paths, self.points, self.width)
            .expect("process shape is valid by construction")
    }

    pub fn same_shape(&self, other: &Process) -> bool {
        self.paths == other.paths && self.points == other.points && self.width == other.width
    }

    fn check_shape(&self, other: &Process) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "process ({}, {}, {}) vs ({}, {}, {})",
                self.paths, self.points, self.width, other.paths, other.points, other.width
            )));
        }
        Ok(())
    }

    /// a·self + b·other, samples and mean tracks alike.
    pub fn lin_comb(&self, a: f64, other: &Process, b: f64) -> Result<Process> {
        self.check_shape(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(x, y)| a * x + b * y).collect();
        let mean = self.mean.iter().zip(&other.mean).map(|(x, y)| a * x + b * y).collect();
        Ok(Process { samples, mean, ..*self })
    }

    pub fn scaled(&self, c: f64) -> Process {
        Process {
            samples: self.samples.iter().map(|v| c * v).collect(),
            mean: self.mean.iter().map(|v| c * v).collect(),
            ..*self
        }
    }

    /// Same samples restricted to the first `points` grid points.
    pub fn truncated(&self, points: usize) -> Process {
        let points = points.min(self.points);
        Process {
            paths: self.paths,
            points,
            width: self.width,
            samples: self.samples[..points * self.paths * self.width].to_vec(),
            mean: self.mean[..points * self.width].to_vec(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite()) && self.mean.iter().all(|v| v.is_finite())
    }

    /// Max absolute entry over all samples.
    pub fn sup_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// E|p(s_k)|² per grid point, with optional per-entry fibre weights.
    pub fn second_moment_profile(&self, entry_weights: Option<&[f64]>) -> Vec<f64> {
        (0..self.points)
            .map(|k| {
                let mut acc = 0.0;
                for p in 0..self.paths {
                    acc += weighted_sq(self.at(k, p), entry_weights);
                }
                acc / self.paths as f64
            })
            .collect()
    }

    /// Trapezoidal E∫|p e^{Ks}|² ds (fibre-weighted if `entry_weights` is given).
    pub fn weighted_norm(&self, grid: &TimeGrid, weight_k: f64, entry_weights: Option<&[f64]>) -> f64 {
        let q = grid.weighted_quadrature(weight_k);
        self.second_moment_profile(entry_weights)
            .iter()
            .zip(&q)
            .map(|(m, w)| m * w)
            .sum()
    }

    /// Per-path contributions to [`Process::weighted_norm`]; their average is the norm.
    pub fn per_path_weighted(&self, grid: &TimeGrid, weight_k: f64, entry_weights: Option<&[f64]>) -> Vec<f64> {
        let q = grid.weighted_quadrature(weight_k);
        let mut out = vec![0.0; self.paths];
        for (k, w) in q.iter().enumerate().take(self.points) {
            for (p, o) in out.iter_mut().enumerate() {
                *o += w * weighted_sq(self.at(k, p), entry_weights);
            }
        }
        out
    }

    /// Weighted norm of self − other without allocating the difference.
    pub fn weighted_distance(&self, other: &Process, grid: &TimeGrid, weight_k: f64, entry_weights: Option<&[f64]>) -> Result<f64> {
        self.check_shape(other)?;
        let q = grid.weighted_quadrature(weight_k);
        let mut total = 0.0;
        for (k, w) in q.iter().enumerate().take(self.points) {
            let a = self.step(k);
            let b = other.step(k);
            let mut acc = 0.0;
            for (ca, cb) in a.chunks(self.width.max(1)).zip(b.chunks(self.width.max(1))) {
                for (c, (x, y)) in ca.iter().zip(cb).enumerate() {
                    let d = x - y;
                    acc += entry_weights.map_or(1.0, |ew| ew[c]) * d * d;
                }
            }
            total += w * acc / self.paths as f64;
        }
        Ok(total)
    }
}

#[inline]
fn weighted_sq(v: &[f64], entry_weights: Option<&[f64]>) -> f64 {
    match entry_weights {
        None => v.iter().map(|x| x * x).sum(),
        Some(w) => v.iter().zip(w).map(|(x, wc)| wc * x * x).sum(),
    }
}

/// E∫|p e^{Ks}|² ds for a process.
pub fn weighted_norm(process: &Process, weight_k: f64, grid: &TimeGrid, entry_weights: Option<&[f64]>) -> f64 {
    process.weighted_norm(grid, weight_k, entry_weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_ensemble_has_zero_fluctuation() {
        let s = vec![2.5; 4 * 3];
        let split = split_mean(&s, 4, 3, 1).unwrap();
        assert!(split.fluctuation.iter().all(|&v| v == 0.0));
        assert!(split.mean.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn symmetric_pair() {
        let split = split_mean(&[1.0, -1.0], 2, 1, 1).unwrap();
        assert_eq!(split.mean, vec![0.0]);
        assert_eq!(split.fluctuation, vec![1.0, -1.0]);
    }

    #[test]
    fn empty_ensemble_errors() {
        assert!(matches!(split_mean(&[], 0, 1, 1), Err(Error::NoPaths)));
    }

    #[test]
    fn pythagoras_on_sampled_paths() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (paths, points, width) = (100, 5, 2);
        let s: Vec<f64> = (0..paths * points * width).map(|_| rng.random_range(-3.0..3.0) + 1.0).collect();
        let split = split_mean(&s, paths, points, width).unwrap();
        for k in 0..points {
            let mut total = 0.0;
            let mut fluct = 0.0;
            for p in 0..paths {
                for c in 0..width {
                    let i = (k * paths + p) * width + c;
                    total += s[i] * s[i];
                    fluct += split.fluctuation[i] * split.fluctuation[i];
                }
            }
            total /= paths as f64;
            fluct /= paths as f64;
            let mean_sq: f64 = split.mean[k * width..(k + 1) * width].iter().map(|v| v * v).sum();
            assert!((total - fluct - mean_sq).abs() < 1e-13 * total);
        }
    }

    #[test]
    fn weighted_norm_of_exponential() {
        let g = TimeGrid::new(0.0, 20.0, 1e-3).unwrap();
        let p = Process::from_fn(1, g.points(), 1, |k| vec![(-g.s(k)).exp()]).unwrap();
        assert!((p.weighted_norm(&g, 0.0, None) - 0.5).abs() < 1e-4);
        assert_eq!(Process::zeros(3, g.points(), 2).weighted_norm(&g, 0.3, None), 0.0);
    }

    #[test]
    fn marginal_weight_diverges_linearly() {
        // x = e^{−s/2} with K = 1/2: E∫|x e^{Ks}|² = T
        let norms: Vec<f64> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&t| {
                let g = TimeGrid::new(0.0, t, 1e-2).unwrap();
                let p = Process::from_fn(1, g.points(), 1, |k| vec![(-0.5 * g.s(k)).exp()]).unwrap();
                p.weighted_norm(&g, 0.5, None)
            })
            .collect();
        assert!(norms[1] / norms[0] > 1.99 && norms[2] / norms[1] > 1.99);
    }

    proptest! {
        #[test]
        fn recombination_restores_input(vals in proptest::collection::vec(-1e3f64..1e3, 24)) {
            let split = split_mean(&vals, 4, 3, 2).unwrap();
            let back = split.recombine(4, 3, 2);
            for (a, b) in vals.iter().zip(&back) {
                // exact except for one rounding in each of the subtraction and addition
                let scale = a.abs().max(split.mean.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                prop_assert!((a - b).abs() <= 2.0 * f64::EPSILON * scale);
            }
        }

        #[test]
        fn norm_is_two_homogeneous(vals in proptest::collection::vec(-5.0f64..5.0, 30), c in -4.0f64..4.0) {
            let g = TimeGrid::new(0.0, 1.0, 0.2).unwrap();
            let p = Process::from_samples(5, g.points(), 1, vals).unwrap();
            let n1 = p.weighted_norm(&g, 0.4, None);
            let n2 = p.scaled(c).weighted_norm(&g, 0.4, None);
            prop_assert!((n2 - c * c * n1).abs() <= 1e-12 * (1.0 + n2.abs()));
            prop_assert!(n1 >= 0.0);
        }

        #[test]
        fn per_path_contributions_average_to_norm(vals in proptest::collection::vec(-5.0f64..5.0, 36)) {
            let g = TimeGrid::new(0.0, 1.0, 0.2).unwrap();
            let p = Process::from_samples(3, g.points(), 2, vals).unwrap();
            let per = p.per_path_weighted(&g, -0.2, None);
            let avg = per.iter().sum::<f64>() / 3.0;
            prop_assert!((avg - p.weighted_norm(&g, -0.2, None)).abs() <= 1e-12 * (1.0 + avg));
        }
    }
}
