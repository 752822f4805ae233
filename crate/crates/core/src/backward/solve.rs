//! Least-squares Monte Carlo for the linear mean-field BSDE on a truncated
//! grid. The fluctuation part is regressed on an affine basis in the
//! attached forward state; the mean part follows its deterministic ODE.
//! The scheme is explicit in y_{k+1}, so the mean and fluctuation parts
//! decouple step by step and no cross-feeding sweeps are needed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::NoiseBank;
use crate::linalg::gemv_acc;
use crate::model::{BlockPair, MarkMeasure, MatrixTrack, Process, ProblemSpec, TimeGrid};

/// Generator of dy = −(P y + Σ H_i z_i + Σ w_a L_a k_a + f)ds + z dW + k dÑ,
/// each coefficient split into fluctuation/mean blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardSystem {
    pub linear: BlockPair,
    pub z_coeff: Vec<BlockPair>,
    pub k_coeff: Vec<BlockPair>,
}

impl BackwardSystem {
    /// Adjoint generator: P = (A + 2K I)ᵀ, H_i = C_iᵀ, L_a = M_aᵀ.
    pub fn adjoint(spec: &ProblemSpec, weight_k: f64) -> Result<Self> {
        let c = &spec.coeffs;
        let t = |p: &BlockPair| p.map(|m| m.transpose());
        Ok(Self {
            linear: t(&c.drift_pair()?.map(|m| m + DMatrix::identity(m.nrows(), m.ncols()) * (2.0 * weight_k))),
            z_coeff: c.diffusion_pairs()?.iter().map(t).collect(),
            k_coeff: c.jump_pairs()?.iter().map(t).collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BsdeOptions {
    /// Kept for interface compatibility: the explicit scheme converges in one sweep.
    pub tol_bsde: f64,
    pub max_sweeps: usize,
    /// Relative eigenvalue floor of the basis covariance before falling back to constants.
    pub rank_tol: f64,
}

impl Default for BsdeOptions {
    fn default() -> Self {
        Self { tol_bsde: 1e-8, max_sweeps: 50, rank_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdjointSolution {
    /// width n
    pub y: Process,
    /// width n·d, block i is z_i
    pub z: Process,
    /// width n·atoms, block a is k at atom a
    pub k: Process,
    /// A + 2K I
    pub shifted_drift: MatrixTrack,
    pub weight_k: f64,
    /// backward steps at which the basis degenerated to constants
    pub fallback_steps: usize,
}

/// Centered affine basis at one step: features φ_p = x_p − x̄ and the
/// inverse covariance, or `None` for the constant basis.
struct Basis {
    phi: Vec<f64>,
    q: usize,
    cov_inv: DMatrix<f64>,
}

fn build_basis(x: &Process, k: usize, rank_tol: f64) -> Option<Basis> {
    let q = x.width();
    let m = x.paths();
    if q == 0 || m <= q + 1 {
        return None;
    }
    let step = x.step(k);
    let mut mean = vec![0.0; q];
    for chunk in step.chunks(q) {
        for (a, v) in mean.iter_mut().zip(chunk) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);
    let mut phi = Vec::with_capacity(m * q);
    for chunk in step.chunks(q) {
        phi.extend(chunk.iter().zip(&mean).map(|(a, b)| a - b));
    }
    let mut cov = DMatrix::zeros(q, q);
    for f in phi.chunks(q) {
        for i in 0..q {
            for j in 0..q {
                cov[(i, j)] += f[i] * f[j];
            }
        }
    }
    cov /= m as f64;
    let scale = step.iter().fold(0.0f64, |a, v| a.max(v.abs())).powi(2).max(f64::MIN_POSITIVE);
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > rank_tol * hi.max(0.0)) || hi <= 1e-24 * scale {
        return None;
    }
    let cov_inv = cov.cholesky()?.inverse();
    Some(Basis { phi, q, cov_inv })
}

/// Regress each column of `targets` (paths × cols, row-major) on the basis;
/// returns the fitted values in place and the column means.
fn regress(targets: &mut [f64], cols: usize, paths: usize, basis: Option<&Basis>) -> Vec<f64> {
    let mut mean = vec![0.0; cols];
    for row in targets.chunks(cols) {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= paths as f64);
    match basis {
        None => {
            for row in targets.chunks_mut(cols) {
                row.copy_from_slice(&mean);
            }
        }
        Some(b) => {
            let q = b.q;
            // cross moments (1/M) Σ φ_p Y_p
            let mut cross = DMatrix::zeros(q, cols);
            for (f, row) in b.phi.chunks(q).zip(targets.chunks(cols)) {
                for c in 0..cols {
                    let y = row[c];
                    if y == 0.0 {
                        continue;
                    }
                    for i in 0..q {
                        cross[(i, c)] += f[i] * y;
                    }
                }
            }
            cross /= paths as f64;
            let beta = &b.cov_inv * cross;
            for (f, row) in b.phi.chunks(q).zip(targets.chunks_mut(cols)) {
                let fv = DVector::from_column_slice(f);
                for c in 0..cols {
                    row[c] = mean[c] + beta.column(c).dot(&fv);
                }
            }
        }
    }
    mean
}

/// Solve the backward equation with generator `sys`, driver `driver`
/// (width n; its mean track is used as E f) and terminal value (default 0).
#[allow(clippy::too_many_arguments)]
pub fn solve_system(
    sys: &BackwardSystem,
    grid: &TimeGrid,
    marks: &MarkMeasure,
    driver: &Process,
    terminal: Option<&Process>,
    basis_state: Option<&Process>,
    bank: &NoiseBank,
    opts: &BsdeOptions,
) -> Result<(Process, Process, Process, usize)> {
    let n = sys.linear.fluct.shape().0;
    let d = sys.z_coeff.len();
    let atoms = sys.k_coeff.len();
    let paths = bank.paths();
    let points = grid.points();
    let steps = grid.num_steps;
    bank.check_covers(grid, d, atoms, 0)?;
    if driver.width() != n || driver.paths() != paths || driver.points() < points {
        return Err(Error::Shape(format!(
            "driver ({}, {}, {}) does not fit ({paths}, {points}, {n})",
            driver.paths(),
            driver.points(),
            driver.width()
        )));
    }
    if let Some(x) = basis_state {
        if x.paths() != paths || x.points() < points {
            return Err(Error::Shape("basis state does not match the noise bank".into()));
        }
    }
    let weights = marks.flat_weights();
    let dt = grid.dt;
    let mut y = Process::zeros(paths, points, n);
    let mut z = Process::zeros(paths, points, n * d);
    let mut kk = Process::zeros(paths, points, n * atoms);
    if let Some(t) = terminal {
        if t.width() != n || t.paths() != paths {
            return Err(Error::Shape("terminal condition shape".into()));
        }
        let tk = t.points() - 1;
        for p in 0..paths {
            y.at_mut(steps, p).copy_from_slice(t.at(tk, p));
        }
        y.mean_at_mut(steps).copy_from_slice(t.mean_at(tk));
    }
    let active: Vec<usize> = (0..atoms).filter(|&a| weights[a] > 0.0).collect();
    let cols = n * (d + active.len() + 1);
    let mut targets = vec![0.0; paths * cols];
    let mut fallback = 0usize;
    let mut y1_next = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut innovation = vec![0.0; paths * n];
    let mut res = vec![0.0; n];
    for k in (0..steps).rev() {
        let ybar_next = y.mean_at(k + 1).to_vec();
        let p1 = sys.linear.fluct.at(k);
        let fbar = driver.mean_at(k).to_vec();
        let basis = basis_state.and_then(|x| build_basis(x, k, opts.rank_tol));
        if basis_state.is_some_and(|x| x.width() > 0) && basis.is_none() {
            fallback += 1;
        }
        // y¹_{k+1} minus its projection on the basis: same conditional
        // covariance with the increments, far smaller variance
        for p in 0..paths {
            for ((a, b), c) in innovation[p * n..(p + 1) * n].iter_mut().zip(y.at(k + 1, p)).zip(&ybar_next) {
                *a = b - c;
            }
        }
        regress(&mut innovation, n, paths, basis.as_ref());
        for p in 0..paths {
            let row = &mut targets[p * cols..(p + 1) * cols];
            for ((a, b), c) in y1_next.iter_mut().zip(y.at(k + 1, p)).zip(&ybar_next) {
                *a = b - c;
            }
            for ((r, a), b) in res.iter_mut().zip(&y1_next).zip(&innovation[p * n..(p + 1) * n]) {
                *r = a - b;
            }
            let dw = bank.dw(k, p);
            for i in 0..d {
                for c in 0..n {
                    row[i * n + c] = res[c] * dw[i] / dt;
                }
            }
            for (j, &a) in active.iter().enumerate() {
                let jump = bank.compensated(k, p, a) / (weights[a] * dt);
                for c in 0..n {
                    row[(d + j) * n + c] = res[c] * jump;
                }
            }
            tmp.copy_from_slice(&y1_next);
            gemv_acc(&mut tmp, p1, &y1_next, dt);
            let f = driver.at(k, p);
            let yrow = &mut row[(d + active.len()) * n..];
            for c in 0..n {
                yrow[c] = tmp[c] + dt * (f[c] - fbar[c]);
            }
        }
        let means = regress(&mut targets, cols, paths, basis.as_ref());
        let zbar = &means[..n * d];
        let kbar_active = &means[n * d..n * (d + active.len())];
        let mut kbar = vec![0.0; n * atoms];
        for (j, &a) in active.iter().enumerate() {
            kbar[a * n..(a + 1) * n].copy_from_slice(&kbar_active[j * n..(j + 1) * n]);
        }
        // mean part: explicit step of the deterministic ODE
        let mut ybar = ybar_next.clone();
        let mut drift = fbar.clone();
        gemv_acc(&mut drift, sys.linear.mean.at(k), &ybar_next, 1.0);
        for i in 0..d {
            gemv_acc(&mut drift, sys.z_coeff[i].mean.at(k), &zbar[i * n..(i + 1) * n], 1.0);
        }
        for &a in &active {
            gemv_acc(&mut drift, sys.k_coeff[a].mean.at(k), &kbar[a * n..(a + 1) * n], weights[a]);
        }
        for (v, g) in ybar.iter_mut().zip(&drift) {
            *v += dt * g;
        }
        // fluctuation part
        let mut y1 = vec![0.0; paths * n];
        let mut zf = vec![0.0; n];
        for p in 0..paths {
            let row = &targets[p * cols..(p + 1) * cols];
            z.at_mut(k, p).copy_from_slice(&row[..n * d]);
            {
                let kp = kk.at_mut(k, p);
                for (j, &a) in active.iter().enumerate() {
                    kp[a * n..(a + 1) * n].copy_from_slice(&row[(d + j) * n..(d + j + 1) * n]);
                }
            }
            let out = &mut y1[p * n..(p + 1) * n];
            out.copy_from_slice(&row[(d + active.len()) * n..]);
            for i in 0..d {
                for c in 0..n {
                    zf[c] = row[i * n + c] - zbar[i * n + c];
                }
                gemv_acc(out, sys.z_coeff[i].fluct.at(k), &zf, dt);
            }
            for (j, &a) in active.iter().enumerate() {
                for c in 0..n {
                    zf[c] = row[(d + j) * n + c] - kbar_active[j * n + c];
                }
                gemv_acc(out, sys.k_coeff[a].fluct.at(k), &zf, dt * weights[a]);
            }
        }
        // re-centre so the fluctuation part has exactly zero empirical mean
        let mut c1 = vec![0.0; n];
        for row in y1.chunks(n) {
            for (a, v) in c1.iter_mut().zip(row) {
                *a += v;
            }
        }
        c1.iter_mut().for_each(|v| *v /= paths as f64);
        for p in 0..paths {
            let out = y.at_mut(k, p);
            for c in 0..n {
                out[c] = y1[p * n + c] - c1[c] + ybar[c];
            }
        }
        if y.at(k, 0).iter().any(|v| !v.is_finite()) || ybar.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { path: 0, step: k });
        }
        y.mean_at_mut(k).copy_from_slice(&ybar);
        z.mean_at_mut(k).copy_from_slice(zbar);
        kk.mean_at_mut(k).copy_from_slice(&kbar);
    }
    // z and k live on steps; carry the last step's value to the end point
    for p in 0..paths {
        let v = z.at(steps - 1, p).to_vec();
        z.at_mut(steps, p).copy_from_slice(&v);
        let v = kk.at(steps - 1, p).to_vec();
        kk.at_mut(steps, p).copy_from_slice(&v);
    }
    let v = z.mean_at(steps - 1).to_vec();
    z.mean_at_mut(steps).copy_from_slice(&v);
    let v = kk.mean_at(steps - 1).to_vec();
    kk.mean_at_mut(steps).copy_from_slice(&v);
    if fallback > 0 {
        log::warn!("regression basis degenerate at {fallback} of {steps} steps; used the constant basis there");
    }
    Ok((y, z, kk, fallback))
}

/// Solve the adjoint-type equation of `spec` with driver f and weight K.
/// `forcing_weight` is the K₁ for which f is known to be integrable.
#[allow(clippy::too_many_arguments)]
pub fn solve_mfbsde(
    spec: &ProblemSpec,
    driver: &Process,
    terminal: Option<&Process>,
    weight_k: f64,
    forcing_weight: Option<f64>,
    basis_state: Option<&Process>,
    bank: &NoiseBank,
    opts: &BsdeOptions,
) -> Result<AdjointSolution> {
    let kappas = crate::spectral::compute_kappas(spec)?;
    if weight_k >= kappas.kappa {
        return Err(Error::Window(format!(
            "K={weight_k} >= kappa={}: backward solvability window K < kappa violated",
            kappas.kappa
        )));
    }
    if let Some(k1) = forcing_weight {
        if weight_k > k1 {
            return Err(Error::Window(format!("K={weight_k} > K1={k1}: driver weight window K <= K1 violated")));
        }
    }
    let sys = BackwardSystem::adjoint(spec, weight_k)?;
    let (y, z, k, fallback_steps) = solve_system(&sys, &spec.grid, &spec.marks, driver, terminal, basis_state, bank, opts)?;
    Ok(AdjointSolution {
        y,
        z,
        k,
        shifted_drift: spec.coeffs.drift.shifted(2.0 * weight_k),
        weight_k,
        fallback_steps,
    })
}
