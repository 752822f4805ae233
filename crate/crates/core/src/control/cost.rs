//! The quadratic cost on the mean/fluctuation split. With E taken as the
//! path average, E g(x, Ex, u, Eu) = E g¹(x − Ex, u − Eu) + g²(Ex, Eu)
//! holds exactly, so the split form equals the direct one.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::bilinear;
use crate::model::{BlockPair, Process, ProblemSpec};

struct Weights {
    q: BlockPair,
    s: BlockPair,
    r: BlockPair,
}

fn weights(spec: &ProblemSpec) -> Result<Weights> {
    Ok(Weights { q: spec.cost.state_pair()?, s: spec.cost.cross_pair()?, r: spec.cost.control_pair()? })
}

/// ⟨Q a_x, b_x⟩ + ⟨S a_x, b_u⟩ + ⟨S b_x, a_u⟩ + ⟨R a_u, b_u⟩ for one block.
fn g_block(w: &Weights, mean: bool, k: usize, ax: &[f64], au: &[f64], bx: &[f64], bu: &[f64]) -> f64 {
    fn pick(p: &BlockPair, mean: bool, k: usize) -> &DMatrix<f64> {
        if mean { p.mean.at(k) } else { p.fluct.at(k) }
    }
    let s = pick(&w.s, mean, k);
    bilinear(ax, pick(&w.q, mean, k), bx) + bilinear(bu, s, ax) + bilinear(au, s, bx) + bilinear(au, pick(&w.r, mean, k), bu)
}

fn check(spec: &ProblemSpec, x: &Process, u: &Process) -> Result<()> {
    let points = spec.grid.points();
    if x.width() != spec.dims.n || u.width() != spec.dims.m || x.paths() != u.paths() || x.points() < points || u.points() < points {
        return Err(Error::Shape(format!(
            "state ({}, {}, {}) and control ({}, {}, {}) do not fit n={}, m={}, {points} points",
            x.paths(),
            x.points(),
            x.width(),
            u.paths(),
            u.points(),
            u.width(),
            spec.dims.n,
            spec.dims.m
        )));
    }
    Ok(())
}

/// Per-path values of Σ_k w_k e^{2Ks_k} [g¹(a¹, b¹) + g²(ā, b̄)], the
/// symmetric bilinear form behind the cost; their average is the form.
pub fn cost_form_per_path(spec: &ProblemSpec, a: (&Process, &Process), b: (&Process, &Process), weight_k: f64) -> Result<Vec<f64>> {
    check(spec, a.0, a.1)?;
    check(spec, b.0, b.1)?;
    if a.0.paths() != b.0.paths() {
        return Err(Error::Shape("cost form arguments have different path counts".into()));
    }
    let w = weights(spec)?;
    let q = spec.grid.weighted_quadrature(weight_k);
    let (n, m) = (spec.dims.n, spec.dims.m);
    let paths = a.0.paths();
    let means: Vec<[Vec<f64>; 4]> = (0..q.len())
        .map(|k| {
            let em = |p: &Process, wd: usize| {
                let mut v = vec![0.0; wd];
                for c in p.step(k).chunks(wd) {
                    for (o, x) in v.iter_mut().zip(c) {
                        *o += x;
                    }
                }
                v.iter_mut().for_each(|o| *o /= paths as f64);
                v
            };
            [em(a.0, n), em(a.1, m), em(b.0, n), em(b.1, m)]
        })
        .collect();
    let mean_part: f64 = (0..q.len())
        .map(|k| {
            let [ax, au, bx, bu] = &means[k];
            q[k] * g_block(&w, true, k, ax, au, bx, bu)
        })
        .sum();
    let per_path = |p: usize| -> f64 {
        let mut f = [vec![0.0; n], vec![0.0; m], vec![0.0; n], vec![0.0; m]];
        let mut total = 0.0;
        for k in 0..q.len() {
            let src = [a.0.at(k, p), a.1.at(k, p), b.0.at(k, p), b.1.at(k, p)];
            for ((dst, s), mu) in f.iter_mut().zip(src).zip(&means[k]) {
                for ((o, v), c) in dst.iter_mut().zip(s).zip(mu) {
                    *o = v - c;
                }
            }
            total += q[k] * g_block(&w, false, k, &f[0], &f[1], &f[2], &f[3]);
        }
        total + mean_part
    };
    Ok(if paths * q.len() >= 4096 {
        (0..paths).into_par_iter().map(per_path).collect()
    } else {
        (0..paths).map(per_path).collect()
    })
}

fn average(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// The symmetric bilinear form B((x, u), (x', u')) with J = B/2 on the diagonal.
pub fn cost_form(spec: &ProblemSpec, a: (&Process, &Process), b: (&Process, &Process), weight_k: f64) -> Result<f64> {
    Ok(average(&cost_form_per_path(spec, a, b, weight_k)?))
}

/// J = ½ E Σ_k w_k e^{2Ks_k} g(s_k, x, Ex, u, Eu) with trapezoidal weights.
pub fn evaluate_cost(spec: &ProblemSpec, x: &Process, u: &Process, weight_k: f64) -> Result<f64> {
    Ok(0.5 * cost_form(spec, (x, u), (x, u), weight_k)?)
}
