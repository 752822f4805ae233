//! The coupled forward-backward system of the control problem (cross
//! weights already eliminated) and its homotopy levels.

use serde::Serialize;

use crate::backward::{solve_system, BackwardSystem, BsdeOptions};
use crate::error::{Error, Result};
use crate::forward::{simulate_system, ControlInput, ForwardSystem, MeanMode, NoiseBank};
use crate::hamiltonian::transform::inverse_track;
use crate::model::{split_apply, split_apply_slice, BlockPair, ForcingTuple, Process, ProblemSpec};
use crate::spectral::{compute_kappas, Kappas};

/// θ = (x, y, z, k) on the grid together with the coupling Λ and the
/// control −R⁻¹Λ it induces.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadrupleSolution {
    pub x: Process,
    pub y: Process,
    pub z: Process,
    pub k: Process,
    /// Λ¹ on the fluctuations, Λ² in the mean track
    pub lambda: Process,
    pub control: Process,
    pub weight_k: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaNorms {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub k: f64,
}

impl ThetaNorms {
    pub fn total(&self) -> f64 {
        self.x + self.y + self.z + self.k
    }
}

/// Λ = Bᵀy + Σ D_iᵀz_i + Σ w_a N_aᵀk_a in split form: Λ¹ acts on the
/// fluctuations, Λ² on the mean tracks.
pub fn coupling(fw: &ForwardSystem, weights: &[f64], m: usize, y: &Process, z: &Process, k: &Process) -> Result<Process> {
    let n = fw.state_dim();
    let mut out = Process::zeros(y.paths(), y.points(), m);
    if !fw.control_drift.is_zero() {
        split_apply_slice(&fw.control_drift, y, 0, true, &mut out, 1.0)?;
    }
    for (i, d) in fw.control_diffusion.iter().enumerate() {
        if !d.is_zero() {
            split_apply_slice(d, z, i * n, true, &mut out, 1.0)?;
        }
    }
    for ((a, nn), w) in fw.control_jump.iter().enumerate().zip(weights) {
        if !nn.is_zero() && *w > 0.0 {
            split_apply_slice(nn, k, a * n, true, &mut out, *w)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CoupledSystem {
    pub spec: ProblemSpec,
    pub forward: ForwardSystem,
    pub adjoint: BackwardSystem,
    pub state_weight: BlockPair,
    /// −(R^ι)⁻¹
    pub neg_control_inverse: BlockPair,
    pub kappas: Kappas,
    pub weight_k: f64,
}

impl CoupledSystem {
    /// Requires S = S̄ = 0; general problems go through the transform first.
    pub fn new(spec: &ProblemSpec, weight_k: f64) -> Result<Self> {
        if spec.has_cross_terms() {
            return Err(Error::Precondition(
                "cross weights S, S_bar are nonzero: the continuation method needs them eliminated first".into(),
            ));
        }
        let r = spec.cost.control_pair()?;
        let neg_control_inverse = BlockPair { fluct: inverse_track(&r.fluct)?.scaled(-1.0), mean: inverse_track(&r.mean)?.scaled(-1.0) };
        Ok(Self {
            spec: spec.clone(),
            forward: ForwardSystem::from_spec(spec)?,
            adjoint: BackwardSystem::adjoint(spec, weight_k)?,
            state_weight: spec.cost.state_pair()?,
            neg_control_inverse,
            kappas: compute_kappas(spec)?,
            weight_k,
        })
    }

    /// Forward coefficients at homotopy level α: αA − (1−α)κ₁I, αC, αM; control terms unscaled.
    pub fn level_forward(&self, alpha: f64) -> ForwardSystem {
        let damp = -(1.0 - alpha) * self.kappas.kappa1;
        let f = &self.forward;
        let scale = |p: &BlockPair| BlockPair { fluct: p.fluct.scaled(alpha), mean: p.mean.scaled(alpha) };
        ForwardSystem {
            drift: BlockPair { fluct: f.drift.fluct.scaled(alpha).shifted(damp), mean: f.drift.mean.scaled(alpha).shifted(damp) },
            control_drift: f.control_drift.clone(),
            diffusion: f.diffusion.iter().map(scale).collect(),
            control_diffusion: f.control_diffusion.clone(),
            jump: f.jump.iter().map(scale).collect(),
            control_jump: f.control_jump.clone(),
        }
    }

    /// Backward generator at level α: α(A + 2K)ᵀ − (1−α)κ₂I, αCᵀ, αMᵀ.
    pub fn level_backward(&self, alpha: f64) -> BackwardSystem {
        let damp = -(1.0 - alpha) * self.kappas.kappa2;
        let b = &self.adjoint;
        let scale = |p: &BlockPair| BlockPair { fluct: p.fluct.scaled(alpha), mean: p.mean.scaled(alpha) };
        BackwardSystem {
            linear: BlockPair { fluct: b.linear.fluct.scaled(alpha).shifted(damp), mean: b.linear.mean.scaled(alpha).shifted(damp) },
            z_coeff: b.z_coeff.iter().map(scale).collect(),
            k_coeff: b.k_coeff.iter().map(scale).collect(),
        }
    }

    pub fn lambda(&self, y: &Process, z: &Process, k: &Process) -> Result<Process> {
        coupling(&self.forward, &self.spec.marks.flat_weights(), self.spec.dims.m, y, z, k)
    }

    /// −(R¹)⁻¹Λ¹ − (R²)⁻¹Λ².
    pub fn control(&self, lambda: &Process) -> Result<Process> {
        split_apply(&self.neg_control_inverse, lambda, false)
    }

    /// α(Q¹x¹ + Q²x²) + ϕ.
    pub fn driver(&self, alpha: f64, x: &Process, forcing: &ForcingTuple) -> Result<Process> {
        let mut f = if self.state_weight.is_zero() || alpha == 0.0 {
            Process::zeros(x.paths(), x.points(), x.width())
        } else {
            split_apply(&self.state_weight, x, false)?.scaled(alpha)
        };
        if let Some(phi) = &forcing.backward {
            f = f.lin_comb(1.0, phi, 1.0)?;
        }
        Ok(f)
    }

    pub fn forward_given(
        &self,
        fw: &ForwardSystem,
        control: &Process,
        forcing: &ForcingTuple,
        bank: &NoiseBank,
        mode: MeanMode,
    ) -> Result<Process> {
        let s = &self.spec;
        Ok(simulate_system(fw, &s.grid, &s.marks, &s.initial, ControlInput::Open(control), forcing, bank, mode)?.states)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn backward_given(
        &self,
        bw: &BackwardSystem,
        alpha: f64,
        x: &Process,
        basis: Option<&Process>,
        forcing: &ForcingTuple,
        bank: &NoiseBank,
        opts: &BsdeOptions,
    ) -> Result<(Process, Process, Process, usize)> {
        let driver = self.driver(alpha, x, forcing)?;
        let s = &self.spec;
        solve_system(bw, &s.grid, &s.marks, &driver, None, basis, bank, opts)
    }

    /// Assemble a quadruple, recomputing Λ and the control from (y, z, k).
    pub fn assemble(&self, x: Process, y: Process, z: Process, k: Process) -> Result<QuadrupleSolution> {
        let lambda = self.lambda(&y, &z, &k)?;
        let control = self.control(&lambda)?;
        Ok(QuadrupleSolution { x, y, z, k, lambda, control, weight_k: self.weight_k })
    }

    pub fn norms(&self, sol: &QuadrupleSolution) -> ThetaNorms {
        let g = &self.spec.grid;
        let kk = self.weight_k;
        let jw = self.spec.marks.entry_weights(self.spec.dims.n);
        ThetaNorms {
            x: sol.x.weighted_norm(g, kk, None),
            y: sol.y.weighted_norm(g, kk, None),
            z: sol.z.weighted_norm(g, kk, None),
            k: sol.k.weighted_norm(g, kk, Some(&jw)),
        }
    }

    /// Componentwise squared weighted distances.
    pub fn distances(&self, a: &QuadrupleSolution, b: &QuadrupleSolution) -> Result<ThetaNorms> {
        let g = &self.spec.grid;
        let kk = self.weight_k;
        let jw = self.spec.marks.entry_weights(self.spec.dims.n);
        Ok(ThetaNorms {
            x: a.x.weighted_distance(&b.x, g, kk, None)?,
            y: a.y.weighted_distance(&b.y, g, kk, None)?,
            z: a.z.weighted_distance(&b.z, g, kk, None)?,
            k: a.k.weighted_distance(&b.k, g, kk, Some(&jw))?,
        })
    }

    /// Decoupled level-0 system: backward with −κ₂I and driver ϕ, then
    /// forward with −κ₁I under the control it induces.
    pub fn solve_base_case(
        &self,
        forcing: &ForcingTuple,
        bank: &NoiseBank,
        mode: MeanMode,
        opts: &BsdeOptions,
    ) -> Result<QuadrupleSolution> {
        let k = &self.kappas;
        if k.kappa1 <= -k.kappa2 {
            return Err(Error::Precondition(format!(
                "kappa1={} <= -kappa2={}: base case of the continuation needs kappa1 > -kappa2",
                k.kappa1, -k.kappa2
            )));
        }
        let fw = self.level_forward(0.0);
        let bw = self.level_backward(0.0);
        let m = self.spec.dims.m;
        let paths = bank.paths();
        let points = self.spec.grid.points();
        // the level-0 forward state without control spans the same noise and serves as regression basis
        let free = self.forward_given(&fw, &Process::zeros(paths, points, m), forcing, bank, mode)?;
        let (y, z, kk, _) = self.backward_given(&bw, 0.0, &free, Some(&free), forcing, bank, opts)?;
        let lambda = self.lambda(&y, &z, &kk)?;
        let control = self.control(&lambda)?;
        let x = self.forward_given(&fw, &control, forcing, bank, mode)?;
        Ok(QuadrupleSolution { x, y, z, k: kk, lambda, control, weight_k: self.weight_k })
    }
}
