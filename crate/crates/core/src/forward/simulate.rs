//! Euler–Maruyama for the linear mean-field jump SDE, written on the
//! mean/fluctuation split: every coefficient acts as Γ¹ on x − E x and as
//! Γ² on E x.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::noise::NoiseBank;
use crate::linalg::gemv_acc;
use crate::model::{BlockPair, ForcingTuple, InitialState, MarkMeasure, Process, ProblemSpec, TimeGrid};

/// How E x(s) is obtained while stepping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanMode {
    /// Deterministic mean ODE on the same grid.
    #[default]
    ExactMean,
    /// Synchronous empirical mean across paths (interacting particles).
    Empirical,
}

/// Linear coefficients of a forward equation in split form.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardSystem {
    pub drift: BlockPair,
    pub control_drift: BlockPair,
    pub diffusion: Vec<BlockPair>,
    pub control_diffusion: Vec<BlockPair>,
    pub jump: Vec<BlockPair>,
    pub control_jump: Vec<BlockPair>,
}

impl ForwardSystem {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        let c = &spec.coeffs;
        Ok(Self {
            drift: c.drift_pair()?,
            control_drift: c.control_drift_pair()?,
            diffusion: c.diffusion_pairs()?,
            control_diffusion: c.control_diffusion_pairs()?,
            jump: c.jump_pairs()?,
            control_jump: c.control_jump_pairs()?,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.drift.fluct.shape().0
    }

    pub fn control_dim(&self) -> usize {
        self.control_drift.fluct.shape().1
    }
}

/// Control fed to the forward solver.
#[derive(Clone, Copy, Debug)]
pub enum ControlInput<'a> {
    Zero,
    /// Open-loop process; its mean track is used for the E u terms.
    Open(&'a Process),
    /// u = G¹(x − E x) + G²E x + v.
    Feedback { gain: &'a BlockPair, offset: Option<&'a Process> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub states: Process,
    pub mean_mode: MeanMode,
    pub seed: u64,
}

struct Flags {
    fluct: bool,
    mean: bool,
}

fn flags(p: &BlockPair) -> Flags {
    Flags { fluct: !p.fluct.is_zero(), mean: !p.mean.is_zero() }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_system(
    sys: &ForwardSystem,
    grid: &TimeGrid,
    marks: &MarkMeasure,
    initial: &InitialState,
    control: ControlInput<'_>,
    forcing: &ForcingTuple,
    bank: &NoiseBank,
    mode: MeanMode,
) -> Result<PathEnsemble> {
    let n = sys.state_dim();
    let mdim = sys.control_dim();
    let d = sys.diffusion.len();
    let atoms = sys.jump.len();
    let paths = bank.paths();
    let points = grid.points();
    bank.check_covers(grid, d, atoms, if initial.is_deterministic() { 0 } else { n })?;
    if initial.dim() != n {
        return Err(Error::Shape(format!("initial state dimension {} != {n}", initial.dim())));
    }
    if marks.atoms_total() != atoms {
        return Err(Error::Shape("mark atoms do not match jump coefficients".into()));
    }
    forcing.check(n, d, atoms, paths, points)?;
    match control {
        ControlInput::Open(u) => {
            if u.width() != mdim || u.paths() != paths || u.points() < points {
                return Err(Error::Shape(format!(
                    "control ({}, {}, {}) does not fit ({paths}, {points}, {mdim})",
                    u.paths(),
                    u.points(),
                    u.width()
                )));
            }
        }
        ControlInput::Feedback { gain, offset } => {
            if gain.fluct.shape() != (mdim, n) {
                return Err(Error::Shape("feedback gain shape".into()));
            }
            if let Some(v) = offset {
                if v.width() != mdim || v.paths() != paths || v.points() < points {
                    return Err(Error::Shape("feedback offset shape".into()));
                }
            }
        }
        ControlInput::Zero => {}
    }

    let fd = flags(&sys.drift);
    let fb = flags(&sys.control_drift);
    let fdiff: Vec<(Flags, Flags)> =
        sys.diffusion.iter().zip(&sys.control_diffusion).map(|(c, dd)| (flags(c), flags(dd))).collect();
    let fjump: Vec<(Flags, Flags)> = sys.jump.iter().zip(&sys.control_jump).map(|(m, nn)| (flags(m), flags(nn))).collect();
    let has_control = !matches!(control, ControlInput::Zero);

    let mut x = Process::zeros(paths, points, n);
    for p in 0..paths {
        let v = initial.realize(if initial.is_deterministic() { &[] } else { bank.init_normals(p) });
        x.at_mut(0, p).copy_from_slice(&v);
    }
    let m0 = match mode {
        MeanMode::ExactMean => initial.mean().to_vec(),
        MeanMode::Empirical => x.empirical_mean()[..n].to_vec(),
    };
    x.mean_at_mut(0).copy_from_slice(&m0);

    let dt = grid.dt;
    let parallel = paths * n >= 4096;
    for k in 0..grid.num_steps {
        let m = x.mean_at(k).to_vec();
        let ubar: Vec<f64> = match control {
            ControlInput::Zero => vec![0.0; mdim],
            ControlInput::Open(u) => u.mean_at(k).to_vec(),
            ControlInput::Feedback { gain, offset } => {
                let mut v = offset.map_or(vec![0.0; mdim], |o| o.mean_at(k).to_vec());
                gemv_acc(&mut v, gain.mean.at(k), &m, 1.0);
                v
            }
        };
        // mean parts shared by all paths
        let mut drift_mean = vec![0.0; n];
        if fd.mean {
            gemv_acc(&mut drift_mean, sys.drift.mean.at(k), &m, 1.0);
        }
        if fb.mean && has_control {
            gemv_acc(&mut drift_mean, sys.control_drift.mean.at(k), &ubar, 1.0);
        }
        let diff_mean: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut v = vec![0.0; n];
                if fdiff[i].0.mean {
                    gemv_acc(&mut v, sys.diffusion[i].mean.at(k), &m, 1.0);
                }
                if fdiff[i].1.mean && has_control {
                    gemv_acc(&mut v, sys.control_diffusion[i].mean.at(k), &ubar, 1.0);
                }
                v
            })
            .collect();
        let jump_mean: Vec<Vec<f64>> = (0..atoms)
            .map(|a| {
                let mut v = vec![0.0; n];
                if fjump[a].0.mean {
                    gemv_acc(&mut v, sys.jump[a].mean.at(k), &m, 1.0);
                }
                if fjump[a].1.mean && has_control {
                    gemv_acc(&mut v, sys.control_jump[a].mean.at(k), &ubar, 1.0);
                }
                v
            })
            .collect();

        let step_path = |p: usize, xp: &[f64], xn: &mut [f64], scratch: &mut (Vec<f64>, Vec<f64>, Vec<f64>)| {
            let (xf, uf, tmp) = scratch;
            for ((f, a), b) in xf.iter_mut().zip(xp).zip(&m) {
                *f = a - b;
            }
            match control {
                ControlInput::Zero => {}
                ControlInput::Open(u) => {
                    for ((f, a), b) in uf.iter_mut().zip(u.at(k, p)).zip(&ubar) {
                        *f = a - b;
                    }
                }
                ControlInput::Feedback { gain, offset } => {
                    match offset {
                        Some(o) => {
                            for ((f, a), b) in uf.iter_mut().zip(o.at(k, p)).zip(o.mean_at(k)) {
                                *f = a - b;
                            }
                        }
                        None => uf.iter_mut().for_each(|v| *v = 0.0),
                    }
                    gemv_acc(uf, gain.fluct.at(k), xf, 1.0);
                }
            }
            xn.copy_from_slice(xp);
            // drift
            tmp.copy_from_slice(&drift_mean);
            if fd.fluct {
                gemv_acc(tmp, sys.drift.fluct.at(k), xf, 1.0);
            }
            if fb.fluct && has_control {
                gemv_acc(tmp, sys.control_drift.fluct.at(k), uf, 1.0);
            }
            if let Some(b) = &forcing.drift {
                for (t, v) in tmp.iter_mut().zip(b.at(k, p)) {
                    *t += v;
                }
            }
            for (o, t) in xn.iter_mut().zip(tmp.iter()) {
                *o += dt * t;
            }
            // diffusion
            let dw = bank.dw(k, p);
            for i in 0..d {
                let w = dw[i];
                tmp.copy_from_slice(&diff_mean[i]);
                if fdiff[i].0.fluct {
                    gemv_acc(tmp, sys.diffusion[i].fluct.at(k), xf, 1.0);
                }
                if fdiff[i].1.fluct && has_control {
                    gemv_acc(tmp, sys.control_diffusion[i].fluct.at(k), uf, 1.0);
                }
                if let Some(s) = &forcing.diffusion {
                    for (t, v) in tmp.iter_mut().zip(&s.at(k, p)[i * n..(i + 1) * n]) {
                        *t += v;
                    }
                }
                for (o, t) in xn.iter_mut().zip(tmp.iter()) {
                    *o += w * t;
                }
            }
            // compensated jumps, integrand at the pre-update state
            for a in 0..atoms {
                let c = bank.compensated(k, p, a);
                if c == 0.0 {
                    continue;
                }
                tmp.copy_from_slice(&jump_mean[a]);
                if fjump[a].0.fluct {
                    gemv_acc(tmp, sys.jump[a].fluct.at(k), xf, 1.0);
                }
                if fjump[a].1.fluct && has_control {
                    gemv_acc(tmp, sys.control_jump[a].fluct.at(k), uf, 1.0);
                }
                if let Some(g) = &forcing.jump {
                    for (t, v) in tmp.iter_mut().zip(&g.at(k, p)[a * n..(a + 1) * n]) {
                        *t += v;
                    }
                }
                for (o, t) in xn.iter_mut().zip(tmp.iter()) {
                    *o += c * t;
                }
            }
        };

        let (prev, next) = x.step_pair_mut(k);
        let new_scratch = || (vec![0.0; n], vec![0.0; mdim], vec![0.0; n]);
        if parallel {
            next.par_chunks_mut(n)
                .zip(prev.par_chunks(n))
                .enumerate()
                .for_each_init(new_scratch, |s, (p, (xn, xp))| step_path(p, xp, xn, s));
        } else {
            let mut s = new_scratch();
            for (p, (xn, xp)) in next.chunks_mut(n).zip(prev.chunks(n)).enumerate() {
                step_path(p, xp, xn, &mut s);
            }
        }
        if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { path: bad / n, step: k + 1 });
        }
        let next_mean: Vec<f64> = match mode {
            MeanMode::ExactMean => {
                let bbar = forcing.drift.as_ref().map(|b| b.mean_at(k).to_vec());
                m.iter()
                    .enumerate()
                    .map(|(c, mc)| mc + dt * (drift_mean[c] + bbar.as_ref().map_or(0.0, |b| b[c])))
                    .collect()
            }
            MeanMode::Empirical => {
                let mut acc = vec![0.0; n];
                for chunk in next.chunks(n) {
                    for (a, v) in acc.iter_mut().zip(chunk) {
                        *a += v;
                    }
                }
                acc.iter().map(|v| v / paths as f64).collect()
            }
        };
        if next_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { path: 0, step: k + 1 });
        }
        x.mean_at_mut(k + 1).copy_from_slice(&next_mean);
    }
    Ok(PathEnsemble { states: x, mean_mode: mode, seed: bank.seed() })
}

/// Simulate the state equation of `spec` under `control` and forcing.
pub fn simulate_mfsde(
    spec: &ProblemSpec,
    control: ControlInput<'_>,
    forcing: &ForcingTuple,
    bank: &NoiseBank,
    mode: MeanMode,
) -> Result<PathEnsemble> {
    let sys = ForwardSystem::from_spec(spec)?;
    simulate_system(&sys, &spec.grid, &spec.marks, &spec.initial, control, forcing, bank, mode)
}

/// The control process realized by a feedback law along an ensemble.
pub fn realized_feedback(gain: &BlockPair, offset: Option<&Process>, states: &Process) -> Result<Process> {
    let mut u = crate::model::split_apply(gain, states, false)?;
    if let Some(o) = offset {
        u = u.lin_comb(1.0, o, 1.0)?;
    }
    Ok(u)
}
