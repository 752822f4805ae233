//! Elimination of the state-control cross terms by the affine control
//! substitution 𝐮 = u + (R¹)⁻¹S¹x¹ + (R²)⁻¹S²x².

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{split_apply, BlockPair, MatrixTrack, Process, ProblemSpec};

/// The transformed problem (cross weights zero) and the feedback gains
/// (R^ι)⁻¹S^ι that relate the two control variables.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedSpec {
    pub spec: ProblemSpec,
    pub gain: BlockPair,
}

/// Pointwise inverse with the conditioning guard; errors name the grid point.
pub fn inverse_track(r: &MatrixTrack) -> Result<MatrixTrack> {
    let inv = |k: usize, m: &DMatrix<f64>| {
        linalg::spd_inverse(m).map_err(|detail| Error::SingularWeight { point: k, detail })
    };
    match r {
        MatrixTrack::Constant(rm) => Ok(MatrixTrack::Constant(inv(0, rm)?)),
        MatrixTrack::Sampled(v) => Ok(MatrixTrack::Sampled(
            v.iter().enumerate().map(|(k, m)| inv(k, m)).collect::<Result<Vec<_>>>()?,
        )),
    }
}

/// Pointwise (R)⁻¹S.
fn gain_track(r: &MatrixTrack, s: &MatrixTrack) -> Result<MatrixTrack> {
    inverse_track(r)?.mul(s)
}

fn minus_product(a: &BlockPair, b: &BlockPair, g: &BlockPair) -> Result<BlockPair> {
    Ok(BlockPair {
        fluct: a.fluct.sub(&b.fluct.mul(&g.fluct)?)?,
        mean: a.mean.sub(&b.mean.mul(&g.mean)?)?,
    })
}

pub fn eliminate_cross_terms(spec: &ProblemSpec) -> Result<TransformedSpec> {
    let r = spec.cost.control_pair()?;
    let s = spec.cost.cross_pair()?;
    let gain = BlockPair { fluct: gain_track(&r.fluct, &s.fluct)?, mean: gain_track(&r.mean, &s.mean)? };
    let c = &spec.coeffs;
    let drift = minus_product(&c.drift_pair()?, &c.control_drift_pair()?, &gain)?;
    let diffusion = c
        .diffusion_pairs()?
        .iter()
        .zip(&c.control_diffusion_pairs()?)
        .map(|(cc, dd)| minus_product(cc, dd, &gain))
        .collect::<Result<Vec<_>>>()?;
    let jump = c
        .jump_pairs()?
        .iter()
        .zip(&c.control_jump_pairs()?)
        .map(|(mm, nn)| minus_product(mm, nn, &gain))
        .collect::<Result<Vec<_>>>()?;
    let q = spec.cost.state_pair()?;
    let state = BlockPair {
        fluct: q.fluct.sub(&s.fluct.transpose().mul(&gain.fluct)?)?.map(|m| (m + m.transpose()) * 0.5),
        mean: q.mean.sub(&s.mean.transpose().mul(&gain.mean)?)?.map(|m| (m + m.transpose()) * 0.5),
    };

    let mut out = spec.clone();
    let unpair = |p: &BlockPair| p.to_pair();
    (out.coeffs.drift, out.coeffs.drift_mean) = unpair(&drift)?;
    let (dc, dcm): (Vec<_>, Vec<_>) = diffusion.iter().map(unpair).collect::<Result<Vec<_>>>()?.into_iter().unzip();
    out.coeffs.diffusion = dc;
    out.coeffs.diffusion_mean = dcm;
    let (jm, jmm): (Vec<_>, Vec<_>) = jump.iter().map(unpair).collect::<Result<Vec<_>>>()?.into_iter().unzip();
    out.coeffs.jump = jm;
    out.coeffs.jump_mean = jmm;
    (out.cost.state_weight, out.cost.state_weight_mean) = unpair(&state)?;
    let (m, n) = (spec.dims.m, spec.dims.n);
    out.cost.cross_weight = MatrixTrack::zeros(m, n);
    out.cost.cross_weight_mean = MatrixTrack::zeros(m, n);
    Ok(TransformedSpec { spec: out, gain })
}

impl TransformedSpec {
    /// u ↦ 𝐮 = u + G¹x¹ + G²x².
    pub fn to_transformed_control(&self, u: &Process, x: &Process) -> Result<Process> {
        let fb = split_apply(&self.gain, x, false)?;
        u.lin_comb(1.0, &fb, 1.0)
    }

    /// 𝐮 ↦ u = 𝐮 − G¹x¹ − G²x².
    pub fn to_original_control(&self, uu: &Process, x: &Process) -> Result<Process> {
        let fb = split_apply(&self.gain, x, false)?;
        uu.lin_comb(1.0, &fb, -1.0)
    }
}
