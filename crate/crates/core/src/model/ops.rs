use crate::error::{Error, Result};
use crate::linalg::{gemv_acc, gemv_t_acc};
use crate::model::process::Process;
use crate::model::track::BlockPair;

/// Γ¹ζ¹ + Γ²ζ² for every path, with mean track Γ²ζ² (or the transposed
/// coefficients when `transpose`). `block` selects a column slice of ζ:
/// entries `offset..offset+len` of each sample.
pub fn split_apply_slice(
    pair: &BlockPair,
    x: &Process,
    offset: usize,
    transpose: bool,
    out: &mut Process,
    scale: f64,
) -> Result<()> {
    let (r, c) = pair.fluct.shape();
    let (in_w, out_w) = if transpose { (r, c) } else { (c, r) };
    if offset + in_w > x.width() || out.width() != out_w || out.paths() != x.paths() || out.points() != x.points() {
        return Err(Error::Shape(format!(
            "cannot apply {r}×{c} coefficient (transpose={transpose}) to width {} at offset {offset} into width {}",
            x.width(),
            out.width()
        )));
    }
    let acc = |o: &mut [f64], m: &nalgebra::DMatrix<f64>, v: &[f64], s: f64| {
        if transpose {
            gemv_t_acc(o, m, v, s)
        } else {
            gemv_acc(o, m, v, s)
        }
    };
    let mut fl = vec![0.0; in_w];
    for k in 0..x.points() {
        let g1 = pair.fluct.at(k);
        let g2 = pair.mean.at(k);
        let xm: Vec<f64> = x.mean_at(k)[offset..offset + in_w].to_vec();
        let mut mean_out = vec![0.0; out_w];
        acc(&mut mean_out, g2, &xm, scale);
        for (o, v) in out.mean_at_mut(k).iter_mut().zip(&mean_out) {
            *o += v;
        }
        for p in 0..x.paths() {
            let xs = &x.at(k, p)[offset..offset + in_w];
            for ((f, a), b) in fl.iter_mut().zip(xs).zip(&xm) {
                *f = a - b;
            }
            let o = out.at_mut(k, p);
            acc(o, g1, &fl, scale);
            for (oc, v) in o.iter_mut().zip(&mean_out) {
                *oc += v;
            }
        }
    }
    Ok(())
}

/// New process Γ¹ζ¹ + Γ²ζ².
pub fn split_apply(pair: &BlockPair, x: &Process, transpose: bool) -> Result<Process> {
    let (r, c) = pair.fluct.shape();
    let out_w = if transpose { c } else { r };
    let mut out = Process::zeros(x.paths(), x.points(), out_w);
    split_apply_slice(pair, x, 0, transpose, &mut out, 1.0)?;
    Ok(out)
}
