//! Dissipation constants, the definiteness condition on the cost, and the
//! admissible windows for the weight exponent K.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::transform::eliminate_cross_terms;
use crate::linalg;
use crate::model::{BlockPair, CostSet, MarkMeasure, ProblemSpec};

/// Default uniform-positivity threshold for the control weights.
pub const DELTA_PD: f64 = 1e-9;
/// Relative tolerance of the semidefiniteness tests.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Kappas {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa: f64,
}

/// Grid indices at which any of the tracks changes; constant problems need one.
fn scan_points(tracks: &[&crate::model::MatrixTrack]) -> usize {
    tracks.iter().filter_map(|t| t.sample_count()).max().unwrap_or(1)
}

/// κ₁, κ₂ from already-combined coefficients.
pub fn kappas_from_blocks(
    drift: &BlockPair,
    diffusion: &[BlockPair],
    jump: &[BlockPair],
    marks: &MarkMeasure,
) -> Result<Kappas> {
    let weights = marks.flat_weights();
    let mut tracks = vec![&drift.fluct, &drift.mean];
    tracks.extend(diffusion.iter().map(|c| &c.fluct));
    tracks.extend(jump.iter().map(|m| &m.fluct));
    let points = scan_points(&tracks);
    let mut sup1 = f64::NEG_INFINITY;
    let mut sup2 = f64::NEG_INFINITY;
    for k in 0..points {
        let a2 = drift.mean.at(k);
        let l1 = linalg::lambda_max(&(a2 + a2.transpose()));
        let a1 = drift.fluct.at(k);
        let mut g = a1 + a1.transpose();
        for c in diffusion {
            let c1 = c.fluct.at(k);
            g += c1.transpose() * c1;
        }
        for (m, w) in jump.iter().zip(&weights) {
            let m1 = m.fluct.at(k);
            g += m1.transpose() * m1 * *w;
        }
        let l2 = linalg::lambda_max(&g);
        if !l1.is_finite() || !l2.is_finite() {
            return Err(Error::Numerical(format!("non-finite eigenvalue at grid point {k}")));
        }
        sup1 = sup1.max(l1);
        sup2 = sup2.max(l2);
    }
    let kappa1 = -0.5 * sup1;
    let kappa2 = -0.5 * sup2;
    Ok(Kappas { kappa1, kappa2, kappa: kappa1.min(kappa2) })
}

pub fn compute_kappas(spec: &ProblemSpec) -> Result<Kappas> {
    let c = &spec.coeffs;
    kappas_from_blocks(&c.drift_pair()?, &c.diffusion_pairs()?, &c.jump_pairs()?, &spec.marks)
}

/// κ's of the problem after the cross-term elimination.
pub fn compute_kappas_transformed(spec: &ProblemSpec) -> Result<Kappas> {
    compute_kappas(&eliminate_cross_terms(spec)?.spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PdMargins {
    /// min over the grid of λ_min(R^ι)
    pub control_weight_min: f64,
    /// min over the grid of λ_min of the block matrix [[Q, Sᵀ], [S, R]]
    pub block_min: f64,
    /// min over the grid of λ_min(Q − Sᵀ R⁻¹ S); NaN where R is not invertible
    pub schur_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdVerdict {
    pub pass: bool,
    pub delta: f64,
    pub control_weight_ok: bool,
    pub block_ok: bool,
    pub schur_ok: bool,
    /// block verdict == Schur verdict (both conditioned on R ≫ 0)
    pub agree: bool,
    pub fluctuation: PdMargins,
    pub mean: PdMargins,
    pub failures: Vec<String>,
}

fn psd_ok(min_eig: f64, m: &DMatrix<f64>) -> bool {
    min_eig >= -PSD_TOL * m.amax().max(1.0)
}

/// Verify R¹, R² ≫ 0 and semidefiniteness of both cost blocks, in block and Schur form.
pub fn check_pd(cost: &CostSet, delta: f64) -> Result<PdVerdict> {
    let q = cost.state_pair()?;
    let s = cost.cross_pair()?;
    let r = cost.control_pair()?;
    let points = scan_points(&[&q.fluct, &q.mean, &s.fluct, &s.mean, &r.fluct, &r.mean]);
    let mut out = PdVerdict {
        pass: true,
        delta,
        control_weight_ok: true,
        block_ok: true,
        schur_ok: true,
        agree: true,
        fluctuation: PdMargins { control_weight_min: f64::INFINITY, block_min: f64::INFINITY, schur_min: f64::INFINITY },
        mean: PdMargins { control_weight_min: f64::INFINITY, block_min: f64::INFINITY, schur_min: f64::INFINITY },
        failures: Vec::new(),
    };
    for k in 0..points {
        for (label, qb, sb, rb) in [
            ("fluctuation", q.fluct.at(k), s.fluct.at(k), r.fluct.at(k)),
            ("mean", q.mean.at(k), s.mean.at(k), r.mean.at(k)),
        ] {
            let n = qb.nrows();
            let m = rb.nrows();
            let r_min = linalg::lambda_min(rb);
            let r_ok = m == 0 || r_min >= delta;
            let mut block = DMatrix::zeros(n + m, n + m);
            block.view_mut((0, 0), (n, n)).copy_from(qb);
            block.view_mut((0, n), (n, m)).copy_from(&sb.transpose());
            block.view_mut((n, 0), (m, n)).copy_from(sb);
            block.view_mut((n, n), (m, m)).copy_from(rb);
            let block_min = linalg::lambda_min(&block);
            let block_psd = psd_ok(block_min, &block);
            let (schur_min, schur_psd) = match linalg::spd_inverse(rb) {
                Ok(rinv) if r_ok => {
                    let schur = qb - sb.transpose() * rinv * sb;
                    let e = linalg::lambda_min(&schur);
                    (e, psd_ok(e, &schur))
                }
                _ => (f64::NAN, false),
            };
            let margins = if label == "mean" { &mut out.mean } else { &mut out.fluctuation };
            margins.control_weight_min = margins.control_weight_min.min(r_min);
            margins.block_min = margins.block_min.min(block_min);
            if schur_min.is_nan() || margins.schur_min.is_nan() {
                margins.schur_min = f64::NAN;
            } else {
                margins.schur_min = margins.schur_min.min(schur_min);
            }
            let block_verdict = r_ok && block_psd;
            let schur_verdict = r_ok && schur_psd;
            if !r_ok {
                out.control_weight_ok = false;
                out.failures.push(format!("grid point {k}: {label} control weight λ_min={r_min:e} < δ={delta:e}"));
            }
            if !block_psd {
                out.block_ok = false;
                out.failures.push(format!("grid point {k}: {label} cost block λ_min={block_min:e} < 0"));
            }
            if r_ok && !schur_psd {
                out.schur_ok = false;
                out.failures.push(format!("grid point {k}: {label} Schur complement λ_min={schur_min:e} < 0"));
            }
            if !r_ok {
                out.schur_ok = false;
            }
            if block_verdict != schur_verdict {
                out.agree = false;
            }
        }
    }
    out.pass = out.control_weight_ok && out.block_ok && out.schur_ok;
    Ok(out)
}

/// sup over the grid of ‖C^ι‖² (stacked operator norm) and ‖M^ι‖²_ρ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseNorms {
    /// sup ‖C¹‖²
    pub diffusion_fluct: f64,
    /// sup ‖M¹‖²_ρ
    pub jump_fluct: f64,
    /// sup (‖C²‖² + ‖M²‖²_ρ)
    pub mean_total: f64,
    /// sup (1 + 2‖C¹‖² + 2‖M¹‖²_ρ)
    pub fluct_total: f64,
}

/// (‖C¹‖², ‖C²‖², ‖M¹‖²_ρ, ‖M²‖²_ρ) at grid point k; the stacked diffusion
/// norm is the operator norm of [C_1; …; C_d] and the jump norm is
/// Σ_a w_a ‖M_a‖²_op.
pub fn noise_norms_at(diffusion: &[BlockPair], jump: &[BlockPair], weights: &[f64], k: usize) -> [f64; 4] {
    let stacked = |mean: bool| -> f64 {
        let mut g: Option<DMatrix<f64>> = None;
        for c in diffusion {
            let m = if mean { c.mean.at(k) } else { c.fluct.at(k) };
            let p = m.transpose() * m;
            g = Some(match g {
                Some(acc) => acc + p,
                None => p,
            });
        }
        g.map_or(0.0, |g| linalg::lambda_max(&g).max(0.0))
    };
    let jumps = |mean: bool| -> f64 {
        jump.iter()
            .zip(weights)
            .map(|(m, w)| w * linalg::op_norm(if mean { m.mean.at(k) } else { m.fluct.at(k) }).powi(2))
            .sum()
    };
    [stacked(false), stacked(true), jumps(false), jumps(true)]
}

pub fn noise_norms(diffusion: &[BlockPair], jump: &[BlockPair], marks: &MarkMeasure) -> NoiseNorms {
    let weights = marks.flat_weights();
    let mut tracks: Vec<&crate::model::MatrixTrack> = diffusion.iter().flat_map(|c| [&c.fluct, &c.mean]).collect();
    tracks.extend(jump.iter().flat_map(|m| [&m.fluct, &m.mean]));
    let points = scan_points(&tracks);
    let mut out = NoiseNorms { diffusion_fluct: 0.0, jump_fluct: 0.0, mean_total: 0.0, fluct_total: 1.0 };
    for k in 0..points {
        let [c1, c2, m1, m2] = noise_norms_at(diffusion, jump, &weights, k);
        out.diffusion_fluct = out.diffusion_fluct.max(c1);
        out.jump_fluct = out.jump_fluct.max(m1);
        out.mean_total = out.mean_total.max(c2 + m2);
        out.fluct_total = out.fluct_total.max(1.0 + 2.0 * c1 + 2.0 * m1);
    }
    out
}

/// Constants of the integrability estimates at a given K and ε pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateConstants {
    pub weight_k: f64,
    pub eps_sde: f64,
    pub eps_bsde: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    /// Not given in closed form; always `None`.
    pub l4: Option<f64>,
    /// 1 / min_s min(λ_min((R¹)⁻¹), λ_min((R²)⁻¹)) = sup_s max(λ_max(R¹), λ_max(R²))
    pub l_r: f64,
    pub norms: NoiseNorms,
}

/// Default ε for the forward estimate: half of its admissible range.
pub fn default_eps_sde(kappas: &Kappas, weight_k: f64) -> f64 {
    0.5 * (-2.0 * weight_k + 2.0 * kappas.kappa) / 3.0
}

/// Default ε for the backward estimate: half of (0, 2κ − 2K).
pub fn default_eps_bsde(kappas: &Kappas, weight_k: f64) -> f64 {
    0.5 * (2.0 * kappas.kappa - 2.0 * weight_k)
}

pub fn estimate_constants(
    spec: &ProblemSpec,
    kappas: &Kappas,
    weight_k: f64,
    eps_sde: f64,
    eps_bsde: f64,
) -> Result<EstimateConstants> {
    let c = &spec.coeffs;
    let norms = noise_norms(&c.diffusion_pairs()?, &c.jump_pairs()?, &spec.marks);
    let l1 = 1.0 + 2.0 * norms.mean_total / (-2.0 * weight_k + 2.0 * kappas.kappa1 - eps_sde);
    let l2 = (1.0 + norms.mean_total / eps_bsde) / eps_bsde;
    let l3 = 2.0 * norms.fluct_total / (eps_bsde * (2.0 * kappas.kappa - 2.0 * weight_k - eps_bsde)) + 2.0;
    let r = spec.cost.control_pair()?;
    let points = scan_points(&[&r.fluct, &r.mean]);
    let mut l_r = 0.0f64;
    for k in 0..points {
        l_r = l_r.max(linalg::lambda_max(r.fluct.at(k))).max(linalg::lambda_max(r.mean.at(k)));
    }
    Ok(EstimateConstants { weight_k, eps_sde, eps_bsde, l1, l2, l3, l4: None, l_r, norms })
}

/// Half-open interval [lower, upper); `lower = -inf` when unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub lower: f64,
    pub upper: f64,
}

impl Window {
    pub fn contains(&self, k: f64) -> bool {
        k >= self.lower && k < self.upper
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonianWindow {
    /// (κ₁ − κ₂)/2
    pub start: f64,
    /// start + k̂, clipped to κ
    pub end: f64,
    /// empirical contraction margin k̂ (0 until estimated)
    pub margin: f64,
    /// κ₁ > −κ₂
    pub base_case_ok: bool,
    pub status: String,
}

fn hamiltonian_window(k: &Kappas, margin: f64, status: String) -> HamiltonianWindow {
    let start = 0.5 * (k.kappa1 - k.kappa2);
    HamiltonianWindow {
        start,
        end: (start + margin).min(k.kappa),
        margin,
        base_case_ok: k.kappa1 > -k.kappa2,
        status,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DissipationReport {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa: f64,
    pub kappa1_t: f64,
    pub kappa2_t: f64,
    pub kappa_t: f64,
    pub pd_ok: bool,
    pub pd: PdVerdict,
    pub cross_terms: bool,
    pub sde_window: Window,
    pub bsde_window: Window,
    pub hamiltonian_window: HamiltonianWindow,
    pub transformed_hamiltonian_window: Option<HamiltonianWindow>,
    pub weight_k: f64,
    pub constants: Option<EstimateConstants>,
    pub notes: Vec<String>,
}

/// Assemble the report for the problem's own weight K. The contraction margin
/// starts at 0 and is raised by the continuation solver's estimate.
pub fn admissible_windows(spec: &ProblemSpec, margin: f64) -> Result<DissipationReport> {
    let kappas = compute_kappas(spec)?;
    let pd = check_pd(&spec.cost, DELTA_PD)?;
    let cross = spec.has_cross_terms();
    let transformed = if pd.control_weight_ok { Some(compute_kappas_transformed(spec)?) } else { None };
    let kt = transformed.unwrap_or(Kappas { kappa1: f64::NAN, kappa2: f64::NAN, kappa: f64::NAN });
    let mut notes = vec![
        "backward estimate uses kappa = min(kappa1, kappa2) in its epsilon range, prefactor and L3; \
         the stated range uses kappa2 alone"
            .to_string(),
        "L4 has no closed form and is not evaluated".to_string(),
    ];
    let status = if cross {
        "not guaranteed (S != 0): solve the transformed problem".to_string()
    } else if kappas.kappa1 > -kappas.kappa2 {
        "guaranteed from start; upper end is the empirical margin".to_string()
    } else {
        "refused: kappa1 <= -kappa2, base case of the continuation fails".to_string()
    };
    let ham = hamiltonian_window(&kappas, margin, status);
    let ham_t = transformed.map(|t| {
        let status = if t.kappa1 > -t.kappa2 {
            "guaranteed from start for the transformed problem".to_string()
        } else {
            "refused: transformed kappa1 <= -kappa2".to_string()
        };
        hamiltonian_window(&t, margin, status)
    });
    let weight_k = spec.weight_k;
    let constants = if weight_k < kappas.kappa && pd.control_weight_ok {
        Some(estimate_constants(
            spec,
            &kappas,
            weight_k,
            default_eps_sde(&kappas, weight_k),
            default_eps_bsde(&kappas, weight_k),
        )?)
    } else {
        notes.push(format!("K={weight_k} is not below kappa={}; estimate constants not evaluated", kappas.kappa));
        None
    };
    Ok(DissipationReport {
        kappa1: kappas.kappa1,
        kappa2: kappas.kappa2,
        kappa: kappas.kappa,
        kappa1_t: kt.kappa1,
        kappa2_t: kt.kappa2,
        kappa_t: kt.kappa,
        pd_ok: pd.pass,
        pd,
        cross_terms: cross,
        sde_window: Window { lower: f64::NEG_INFINITY, upper: kappas.kappa },
        bsde_window: Window { lower: f64::NEG_INFINITY, upper: kappas.kappa },
        hamiltonian_window: ham,
        transformed_hamiltonian_window: ham_t,
        weight_k,
        constants,
        notes,
    })
}

impl std::fmt::Display for DissipationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "dissipation constants")?;
        writeln!(f, "  kappa1   = {:.12}", self.kappa1)?;
        writeln!(f, "  kappa2   = {:.12}", self.kappa2)?;
        writeln!(f, "  kappa    = {:.12}", self.kappa)?;
        writeln!(f, "  kappa1_t = {:.12}", self.kappa1_t)?;
        writeln!(f, "  kappa2_t = {:.12}", self.kappa2_t)?;
        writeln!(f, "  kappa_t  = {:.12}", self.kappa_t)?;
        writeln!(f, "definiteness: {}", if self.pd_ok { "pass" } else { "FAIL" })?;
        for (label, m) in [("fluctuation", &self.pd.fluctuation), ("mean", &self.pd.mean)] {
            writeln!(
                f,
                "  {label}: R min eig {:.6e}, block min eig {:.6e}, Schur min eig {:.6e}",
                m.control_weight_min, m.block_min, m.schur_min
            )?;
        }
        for msg in &self.pd.failures {
            writeln!(f, "  {msg}")?;
        }
        writeln!(f, "cross terms present: {}", self.cross_terms)?;
        writeln!(f, "forward window: K < {:.12}", self.sde_window.upper)?;
        writeln!(f, "backward window: K < {:.12}", self.bsde_window.upper)?;
        let windows = std::iter::once(("hamiltonian window", &self.hamiltonian_window))
            .chain(self.transformed_hamiltonian_window.iter().map(|h| ("transformed hamiltonian window", h)));
        for (label, h) in windows {
            if h.margin > 0.0 {
                writeln!(f, "{label}: [{:.12}, {:.12}) margin {:.6} ({})", h.start, h.end, h.margin, h.status)?;
            } else {
                writeln!(f, "{label}: K >= {:.12}, upper end not estimated ({})", h.start, h.status)?;
            }
        }
        writeln!(f, "weight K = {}", self.weight_k)?;
        if let Some(c) = &self.constants {
            writeln!(f, "estimate constants (eps_sde={:.6}, eps_bsde={:.6})", c.eps_sde, c.eps_bsde)?;
            writeln!(f, "  L1 = {:.6e}  L2 = {:.6e}  L3 = {:.6e}  L_R = {:.6e}", c.l1, c.l2, c.l3, c.l_r)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{example31_spec, ScalarProfile};
    use crate::model::{MatrixTrack, TimeGrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ex31(rho: f64, a: f64) -> ProblemSpec {
        example31_spec(rho, &ScalarProfile::Constant(a), 1.0, TimeGrid::new(0.0, 1.0, 0.1).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn example31_constants() {
        for rho in [0.5, 1.0, 2.0] {
            for a in [0.0, 0.7] {
                let k = compute_kappas(&ex31(rho, a)).unwrap();
                assert!((k.kappa1 - 2.0 * rho).abs() < 1e-12, "{k:?}");
                assert!((k.kappa2 - rho).abs() < 1e-12, "{k:?}");
                assert!((k.kappa - rho).abs() < 1e-12);
                let t = compute_kappas_transformed(&ex31(rho, a)).unwrap();
                for v in [t.kappa1, t.kappa2, t.kappa] {
                    assert!((v - 0.5 * rho).abs() < 1e-12, "{t:?}");
                }
            }
        }
    }

    #[test]
    fn example31_windows_flag_cross_terms() {
        let r = admissible_windows(&ex31(1.0, 0.0), 0.0).unwrap();
        assert!(r.cross_terms);
        assert!(r.pd_ok, "{:?}", r.pd.failures);
        assert!((r.hamiltonian_window.start - 0.5).abs() < 1e-12);
        assert!(r.hamiltonian_window.status.contains("not guaranteed"));
        let t = r.transformed_hamiltonian_window.as_ref().unwrap();
        assert!(t.start.abs() < 1e-12 && t.base_case_ok);
        let text = r.to_string();
        assert!(text.contains("kappa1   = 2.000000000000"));
        assert!(text.contains("kappa2   = 1.000000000000"));
    }

    // λ_max of a symmetric 2×2 matrix in closed form.
    fn eig2_max(a: f64, b: f64, d: f64) -> f64 {
        0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt()
    }

    proptest! {
        #[test]
        fn scalar_kappa2_matches_closed_form(a in -3.0f64..1.0, abar in -2.0f64..2.0, c in -2.0f64..2.0, cbar in -2.0f64..2.0) {
            let mut spec = ex31(1.0, 0.0);
            spec.coeffs.drift = MatrixTrack::scalar(a);
            spec.coeffs.drift_mean = MatrixTrack::scalar(abar);
            spec.coeffs.diffusion = vec![MatrixTrack::scalar(c)];
            spec.coeffs.diffusion_mean = vec![MatrixTrack::scalar(cbar)];
            let k = compute_kappas(&spec).unwrap();
            prop_assert!((k.kappa1 + (a + abar)).abs() < 1e-12);
            prop_assert!((k.kappa2 + 0.5 * (2.0 * a + c * c)).abs() < 1e-12);
        }

        #[test]
        fn two_by_two_drift_matches_eigen_formula(v in proptest::collection::vec(-3.0f64..3.0, 4)) {
            let a = DMatrix::from_row_slice(2, 2, &v);
            let sym = &a + a.transpose();
            let expect = -0.5 * eig2_max(sym[(0, 0)], sym[(0, 1)], sym[(1, 1)]);
            let fw = BlockPair::uniform(MatrixTrack::Constant(a));
            let k = kappas_from_blocks(&fw, &[], &[], &MarkMeasure::empty()).unwrap();
            prop_assert!((k.kappa1 - expect).abs() < 1e-10);
            prop_assert!((k.kappa2 - expect).abs() < 1e-10);
        }
    }

    // Sylvester: a symmetric matrix is PSD iff every principal minor is ≥ 0.
    fn psd_by_minors(m: &DMatrix<f64>, tol: f64) -> bool {
        let n = m.nrows();
        (1u32..(1 << n)).all(|mask| {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
            sub.determinant() >= -tol
        })
    }

    fn random_cost(rng: &mut ChaCha8Rng) -> (CostSet, DMatrix<f64>, DMatrix<f64>) {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let g = DMatrix::from_fn(n + m, n + m, |_, _| rng.random_range(-1.0..1.0));
        // full-rank PSD block plus a shift that is clearly positive or clearly negative
        let shift: f64 = if rng.random_bool(0.5) { 0.3 } else { -0.3 - rng.random_range(0.0..1.0) };
        let mut block = &g * g.transpose() + DMatrix::identity(n + m, n + m) * shift.max(0.0);
        // a negative shift lands on the state block only, so R stays positive
        if shift < 0.0 {
            for i in 0..n {
                block[(i, i)] += shift * 4.0;
            }
        }
        let mut r = block.view((n, n), (m, m)).into_owned();
        for i in 0..m {
            r[(i, i)] += 0.5;
        }
        block.view_mut((n, n), (m, m)).copy_from(&r);
        let q = block.view((0, 0), (n, n)).into_owned();
        let s = block.view((n, 0), (m, n)).into_owned();
        let cost = CostSet {
            state_weight: MatrixTrack::Constant(q.clone()),
            state_weight_mean: MatrixTrack::zeros(n, n),
            cross_weight: MatrixTrack::Constant(s),
            cross_weight_mean: MatrixTrack::zeros(m, n),
            control_weight: MatrixTrack::Constant(r),
            control_weight_mean: MatrixTrack::zeros(m, m),
        };
        (cost, block, q)
    }

    #[test]
    fn definiteness_agrees_with_principal_minors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut pass, mut fail) = (0, 0);
        for _ in 0..400 {
            let (cost, block, _) = random_cost(&mut rng);
            let v = check_pd(&cost, DELTA_PD).unwrap();
            let oracle = psd_by_minors(&block, 1e-9);
            assert_eq!(v.pass, oracle, "{block}");
            assert!(v.agree);
            if oracle { pass += 1 } else { fail += 1 }
        }
        assert!(pass > 50 && fail > 50, "pass {pass} fail {fail}");
    }

    #[test]
    fn singular_control_weight_fails() {
        let mut cost = CostSet::zeros(1, 1);
        cost.state_weight = MatrixTrack::scalar(1.0);
        cost.control_weight = MatrixTrack::scalar(1.0);
        cost.control_weight_mean = MatrixTrack::scalar(-1.0);
        let v = check_pd(&cost, DELTA_PD).unwrap();
        assert!(!v.pass && !v.control_weight_ok);
        assert!(v.failures.iter().any(|f| f.contains("mean control weight")));
    }
}
