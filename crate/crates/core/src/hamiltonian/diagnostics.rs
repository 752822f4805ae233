//! Residuals of a computed quadruple and the empirical stability ratio.

use serde::Serialize;

use crate::backward::BsdeOptions;
use crate::error::Result;
use crate::forward::{MeanMode, NoiseBank};
use crate::linalg::gemv_acc;
use crate::model::{ForcingTuple, Process};

use super::system::{CoupledSystem, QuadrupleSolution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    /// max |x_restepped − x| / max(sup|x|, 1e-300)
    pub forward: f64,
    /// max over y, z, k of the relative weighted distance to the re-solved adjoint
    pub backward: f64,
    pub backward_y: f64,
    pub backward_z: f64,
    pub backward_k: f64,
    /// relative weighted deviation of y(s_k) from y(T) + Σ generator·dt − Σ martingale increments
    pub integral_identity: f64,
}

fn relative(dist_sq: f64, reference_sq: f64, fallback_sq: f64) -> f64 {
    let d = dist_sq.sqrt();
    if d == 0.0 {
        return 0.0;
    }
    let r = if reference_sq > 0.0 { reference_sq } else { fallback_sq };
    if r > 0.0 {
        d / r.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Re-step the forward recursion with the solution's control and re-solve
/// the adjoint from the solution's state; both compared with the stored fields.
pub fn fbsde_residual(
    sys: &CoupledSystem,
    sol: &QuadrupleSolution,
    forcing: &ForcingTuple,
    bank: &NoiseBank,
    mode: MeanMode,
    bsde: &BsdeOptions,
) -> Result<ResidualReport> {
    let lambda = sys.lambda(&sol.y, &sol.z, &sol.k)?;
    let control = sys.control(&lambda)?;
    let x_re = sys.forward_given(&sys.forward, &control, forcing, bank, mode)?;
    let fdev = x_re.samples().iter().zip(sol.x.samples()).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
    let fscale = sol.x.sup_abs();
    let forward = if fdev == 0.0 { 0.0 } else { fdev / fscale.max(1e-300) };

    let (y_re, z_re, k_re, _) = sys.backward_given(&sys.adjoint, 1.0, &sol.x, Some(&sol.x), forcing, bank, bsde)?;
    let g = &sys.spec.grid;
    let kk = sys.weight_k;
    let jw = sys.spec.marks.entry_weights(sys.spec.dims.n);
    let by = relative(y_re.weighted_distance(&sol.y, g, kk, None)?, y_re.weighted_norm(g, kk, None), sol.y.weighted_norm(g, kk, None));
    let bz = relative(z_re.weighted_distance(&sol.z, g, kk, None)?, z_re.weighted_norm(g, kk, None), sol.z.weighted_norm(g, kk, None));
    let bk = relative(
        k_re.weighted_distance(&sol.k, g, kk, Some(&jw))?,
        k_re.weighted_norm(g, kk, Some(&jw)),
        sol.k.weighted_norm(g, kk, Some(&jw)),
    );
    let integral_identity = integral_identity(sys, sol, forcing, bank)?;
    Ok(ResidualReport {
        forward,
        backward: by.max(bz).max(bk),
        backward_y: by,
        backward_z: bz,
        backward_k: bk,
        integral_identity,
    })
}

/// Discrete integral form of the adjoint equation, path by path.
fn integral_identity(sys: &CoupledSystem, sol: &QuadrupleSolution, forcing: &ForcingTuple, bank: &NoiseBank) -> Result<f64> {
    let spec = &sys.spec;
    let grid = &spec.grid;
    let n = spec.dims.n;
    let d = spec.dims.d;
    let atoms = spec.atoms();
    let weights = spec.marks.flat_weights();
    let driver = sys.driver(1.0, &sol.x, forcing)?;
    let b = &sys.adjoint;
    let steps = grid.num_steps;
    let paths = sol.y.paths();
    let mut dev = Process::zeros(paths, grid.points(), n);
    let mut acc = vec![vec![0.0; n]; paths];
    for (p, a) in acc.iter_mut().enumerate() {
        a.copy_from_slice(sol.y.at(steps, p));
    }
    let mut g = vec![0.0; n];
    let mut fl = vec![0.0; n];
    for k in (0..steps).rev() {
        let ym = sol.y.mean_at(k + 1);
        let zm = sol.z.mean_at(k);
        let km = sol.k.mean_at(k);
        for p in 0..paths {
            g.copy_from_slice(driver.at(k, p));
            let yp = sol.y.at(k + 1, p);
            for c in 0..n {
                fl[c] = yp[c] - ym[c];
            }
            gemv_acc(&mut g, b.linear.fluct.at(k), &fl, 1.0);
            gemv_acc(&mut g, b.linear.mean.at(k), ym, 1.0);
            let zp = sol.z.at(k, p);
            for i in 0..d {
                for c in 0..n {
                    fl[c] = zp[i * n + c] - zm[i * n + c];
                }
                gemv_acc(&mut g, b.z_coeff[i].fluct.at(k), &fl, 1.0);
                gemv_acc(&mut g, b.z_coeff[i].mean.at(k), &zm[i * n..(i + 1) * n], 1.0);
            }
            let kp = sol.k.at(k, p);
            for a in 0..atoms {
                if weights[a] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    fl[c] = kp[a * n + c] - km[a * n + c];
                }
                gemv_acc(&mut g, b.k_coeff[a].fluct.at(k), &fl, weights[a]);
                gemv_acc(&mut g, b.k_coeff[a].mean.at(k), &km[a * n..(a + 1) * n], weights[a]);
            }
            let dw = bank.dw(k, p);
            let ap = &mut acc[p];
            for c in 0..n {
                let mut mart = 0.0;
                for i in 0..d {
                    mart += zp[i * n + c] * dw[i];
                }
                for a in 0..atoms {
                    mart += kp[a * n + c] * bank.compensated(k, p, a);
                }
                ap[c] += grid.dt * g[c] - mart;
            }
            let out = dev.at_mut(k, p);
            for c in 0..n {
                out[c] = sol.y.at(k, p)[c] - ap[c];
            }
        }
    }
    let num = dev.weighted_norm(grid, sys.weight_k, None);
    let den = sol.y.weighted_norm(grid, sys.weight_k, None);
    Ok(relative(num, den, 0.0).min(f64::MAX))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// E|Δy(t0)e^{Kt0}|² + ‖Δx‖² + ‖Δy‖² + ‖Δz‖² + ‖Δk‖²_ρ
    pub numerator: f64,
    /// E|Δx(t0)e^{Kt0}|²
    pub denominator: f64,
    /// `None` when both initial states coincide
    pub ratio: Option<f64>,
}

/// Ratio of solution distance to initial-state distance for two solutions
/// computed with the same noise.
pub fn stability_check(sys: &CoupledSystem, a: &QuadrupleSolution, b: &QuadrupleSolution) -> Result<StabilityReport> {
    let grid = &sys.spec.grid;
    let w0 = (2.0 * sys.weight_k * grid.t0).exp();
    let paths = a.x.paths() as f64;
    let sq_diff = |p: &Process, q: &Process| -> f64 {
        p.step(0).iter().zip(q.step(0)).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / paths * w0
    };
    let denominator = sq_diff(&a.x, &b.x);
    let numerator = sq_diff(&a.y, &b.y) + sys.distances(a, b)?.total();
    let ratio = if denominator > 0.0 { Some(numerator / denominator) } else { None };
    Ok(StabilityReport { numerator, denominator, ratio })
}
