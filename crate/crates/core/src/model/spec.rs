use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::grid::TimeGrid;
use crate::model::marks::MarkMeasure;
use crate::model::track::{BlockPair, MatrixTrack};

/// State, control, Brownian and jump-component dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub l: usize,
}

/// State-equation coefficients. Jump coefficients are stored per mark atom
/// in the flat atom order of the [`MarkMeasure`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub drift: MatrixTrack,
    pub drift_mean: MatrixTrack,
    pub control_drift: MatrixTrack,
    pub control_drift_mean: MatrixTrack,
    pub diffusion: Vec<MatrixTrack>,
    pub diffusion_mean: Vec<MatrixTrack>,
    pub control_diffusion: Vec<MatrixTrack>,
    pub control_diffusion_mean: Vec<MatrixTrack>,
    pub jump: Vec<MatrixTrack>,
    pub jump_mean: Vec<MatrixTrack>,
    pub control_jump: Vec<MatrixTrack>,
    pub control_jump_mean: Vec<MatrixTrack>,
}

impl CoefficientSet {
    pub fn zeros(dims: Dims, atoms: usize) -> Self {
        let (n, m) = (dims.n, dims.m);
        Self {
            drift: MatrixTrack::zeros(n, n),
            drift_mean: MatrixTrack::zeros(n, n),
            control_drift: MatrixTrack::zeros(n, m),
            control_drift_mean: MatrixTrack::zeros(n, m),
            diffusion: vec![MatrixTrack::zeros(n, n); dims.d],
            diffusion_mean: vec![MatrixTrack::zeros(n, n); dims.d],
            control_diffusion: vec![MatrixTrack::zeros(n, m); dims.d],
            control_diffusion_mean: vec![MatrixTrack::zeros(n, m); dims.d],
            jump: vec![MatrixTrack::zeros(n, n); atoms],
            jump_mean: vec![MatrixTrack::zeros(n, n); atoms],
            control_jump: vec![MatrixTrack::zeros(n, m); atoms],
            control_jump_mean: vec![MatrixTrack::zeros(n, m); atoms],
        }
    }

    pub fn drift_pair(&self) -> Result<BlockPair> {
        BlockPair::from_pair(&self.drift, &self.drift_mean)
    }
    pub fn control_drift_pair(&self) -> Result<BlockPair> {
        BlockPair::from_pair(&self.control_drift, &self.control_drift_mean)
    }
    pub fn diffusion_pairs(&self) -> Result<Vec<BlockPair>> {
        pairs(&self.diffusion, &self.diffusion_mean)
    }
    pub fn control_diffusion_pairs(&self) -> Result<Vec<BlockPair>> {
        pairs(&self.control_diffusion, &self.control_diffusion_mean)
    }
    pub fn jump_pairs(&self) -> Result<Vec<BlockPair>> {
        pairs(&self.jump, &self.jump_mean)
    }
    pub fn control_jump_pairs(&self) -> Result<Vec<BlockPair>> {
        pairs(&self.control_jump, &self.control_jump_mean)
    }

    fn all_tracks(&self) -> Vec<(&'static str, &MatrixTrack)> {
        let mut v = vec![
            ("A", &self.drift),
            ("A_bar", &self.drift_mean),
            ("B", &self.control_drift),
            ("B_bar", &self.control_drift_mean),
        ];
        for (name, list) in [
            ("C", &self.diffusion),
            ("C_bar", &self.diffusion_mean),
            ("D", &self.control_diffusion),
            ("D_bar", &self.control_diffusion_mean),
            ("M", &self.jump),
            ("M_bar", &self.jump_mean),
            ("N", &self.control_jump),
            ("N_bar", &self.control_jump_mean),
        ] {
            v.extend(list.iter().map(|t| (name, t)));
        }
        v
    }
}

fn pairs(a: &[MatrixTrack], b: &[MatrixTrack]) -> Result<Vec<BlockPair>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} coefficients but {} mean-field partners", a.len(), b.len())));
    }
    a.iter().zip(b).map(|(x, y)| BlockPair::from_pair(x, y)).collect()
}

/// Quadratic running-cost weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSet {
    pub state_weight: MatrixTrack,
    pub state_weight_mean: MatrixTrack,
    pub cross_weight: MatrixTrack,
    pub cross_weight_mean: MatrixTrack,
    pub control_weight: MatrixTrack,
    pub control_weight_mean: MatrixTrack,
}

impl CostSet {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            state_weight: MatrixTrack::zeros(n, n),
            state_weight_mean: MatrixTrack::zeros(n, n),
            cross_weight: MatrixTrack::zeros(m, n),
            cross_weight_mean: MatrixTrack::zeros(m, n),
            control_weight: MatrixTrack::zeros(m, m),
            control_weight_mean: MatrixTrack::zeros(m, m),
        }
    }

    pub fn state_pair(&self) -> Result<BlockPair> {
        BlockPair::from_pair(&self.state_weight, &self.state_weight_mean)
    }
    pub fn cross_pair(&self) -> Result<BlockPair> {
        BlockPair::from_pair(&self.cross_weight, &self.cross_weight_mean)
    }
    pub fn control_pair(&self) -> Result<BlockPair> {
        BlockPair::from_pair(&self.control_weight, &self.control_weight_mean)
    }

    pub fn has_cross_terms(&self) -> bool {
        !(self.cross_weight.is_zero() && self.cross_weight_mean.is_zero())
    }

    /// Every weight multiplied by c.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            state_weight: self.state_weight.scaled(c),
            state_weight_mean: self.state_weight_mean.scaled(c),
            cross_weight: self.cross_weight.scaled(c),
            cross_weight_mean: self.cross_weight_mean.scaled(c),
            control_weight: self.control_weight.scaled(c),
            control_weight_mean: self.control_weight_mean.scaled(c),
        }
    }

    /// Reject asymmetry above 1e−10 relative, then symmetrize exactly.
    pub fn symmetrized(&self) -> Result<Self> {
        let sym = |name: &str, t: &MatrixTrack| -> Result<MatrixTrack> {
            for (k, m) in t.samples().iter().enumerate() {
                if linalg::asymmetry(m) > 1e-10 {
                    return Err(Error::Invalid(format!("{name} is not symmetric at sample {k}")));
                }
            }
            Ok(t.map(|m| (m + m.transpose()) * 0.5))
        };
        Ok(Self {
            state_weight: sym("Q", &self.state_weight)?,
            state_weight_mean: sym("Q_bar", &self.state_weight_mean)?,
            cross_weight: self.cross_weight.clone(),
            cross_weight_mean: self.cross_weight_mean.clone(),
            control_weight: sym("R", &self.control_weight)?,
            control_weight_mean: sym("R_bar", &self.control_weight_mean)?,
        })
    }
}

/// Law of the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Deterministic(Vec<f64>),
    /// Independent normal components.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Deterministic(v) => v.len(),
            InitialState::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn mean(&self) -> &[f64] {
        match self {
            InitialState::Deterministic(v) => v,
            InitialState::Gaussian { mean, .. } => mean,
        }
    }

    pub fn zero(n: usize) -> Self {
        InitialState::Deterministic(vec![0.0; n])
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            InitialState::Deterministic(_) => true,
            InitialState::Gaussian { std, .. } => std.iter().all(|&s| s == 0.0),
        }
    }

    /// Initial value of one path given its standard-normal draws.
    pub fn realize(&self, normals: &[f64]) -> Vec<f64> {
        match self {
            InitialState::Deterministic(v) => v.clone(),
            InitialState::Gaussian { mean, std } => {
                mean.iter().zip(std).zip(normals).map(|((m, s), z)| m + s * z).collect()
            }
        }
    }
}

/// A complete control problem on a truncated grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub dims: Dims,
    pub coeffs: CoefficientSet,
    pub cost: CostSet,
    pub marks: MarkMeasure,
    pub grid: TimeGrid,
    pub initial: InitialState,
    pub weight_k: f64,
}

impl ProblemSpec {
    /// Check every dimension against `dims`, finiteness of all entries,
    /// sample counts of tabulated coefficients and symmetry of the cost.
    pub fn validated(mut self) -> Result<Self> {
        let Dims { n, m, d, l } = self.dims;
        if n == 0 {
            return Err(Error::Invalid("state dimension n must be positive".into()));
        }
        if self.marks.len() != l {
            return Err(Error::Shape(format!("dims.l={l} but {} mark components", self.marks.len())));
        }
        let atoms = self.marks.atoms_total();
        let c = &self.coeffs;
        let expect_len = |name: &str, v: &[MatrixTrack], want: usize| -> Result<()> {
            if v.len() != want {
                return Err(Error::Shape(format!("{name} has {} entries, expected {want}", v.len())));
            }
            Ok(())
        };
        expect_len("C", &c.diffusion, d)?;
        expect_len("C_bar", &c.diffusion_mean, d)?;
        expect_len("D", &c.control_diffusion, d)?;
        expect_len("D_bar", &c.control_diffusion_mean, d)?;
        expect_len("M", &c.jump, atoms)?;
        expect_len("M_bar", &c.jump_mean, atoms)?;
        expect_len("N", &c.control_jump, atoms)?;
        expect_len("N_bar", &c.control_jump_mean, atoms)?;
        let points = self.grid.points();
        for (name, t) in c.all_tracks() {
            let want = match name {
                "B" | "B_bar" | "D" | "D_bar" | "N" | "N_bar" => (n, m),
                _ => (n, n),
            };
            check_track(name, t, want, points)?;
        }
        let cost = &self.cost;
        for (name, t, want) in [
            ("Q", &cost.state_weight, (n, n)),
            ("Q_bar", &cost.state_weight_mean, (n, n)),
            ("S", &cost.cross_weight, (m, n)),
            ("S_bar", &cost.cross_weight_mean, (m, n)),
            ("R", &cost.control_weight, (m, m)),
            ("R_bar", &cost.control_weight_mean, (m, m)),
        ] {
            check_track(name, t, want, points)?;
        }
        self.cost = self.cost.symmetrized()?;
        if self.initial.dim() != n {
            return Err(Error::Shape(format!("initial state has dimension {}, expected {n}", self.initial.dim())));
        }
        if let InitialState::Gaussian { mean, std } = &self.initial {
            if mean.len() != std.len() || std.iter().any(|s| !(*s >= 0.0)) {
                return Err(Error::Invalid("gaussian initial state needs one nonnegative std per component".into()));
            }
        }
        if !self.initial.mean().iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid("initial state must be finite".into()));
        }
        if !self.weight_k.is_finite() {
            return Err(Error::Invalid("weight_K must be finite".into()));
        }
        Ok(self)
    }

    pub fn atoms(&self) -> usize {
        self.marks.atoms_total()
    }

    pub fn has_cross_terms(&self) -> bool {
        self.cost.has_cross_terms()
    }

    /// Same problem on another grid; tabulated coefficients must match its size.
    pub fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        let mut s = self.clone();
        s.grid = grid;
        s.validated()
    }

    pub fn with_weight(&self, weight_k: f64) -> Self {
        Self { weight_k, ..self.clone() }
    }

    pub fn with_initial(&self, initial: InitialState) -> Self {
        Self { initial, ..self.clone() }
    }
}

fn check_track(name: &str, t: &MatrixTrack, want: (usize, usize), points: usize) -> Result<()> {
    if t.shape() != want {
        return Err(Error::Shape(format!("{name} has shape {:?}, expected {:?}", t.shape(), want)));
    }
    if let Some(len) = t.sample_count() {
        if len != points {
            return Err(Error::Shape(format!("{name} table has {len} samples, grid has {points} points")));
        }
        if t.samples().iter().any(|m| m.shape() != want) {
            return Err(Error::Shape(format!("{name} table has inconsistent sample shapes")));
        }
    }
    if !t.is_finite() {
        return Err(Error::Invalid(format!("{name} has non-finite entries")));
    }
    Ok(())
}

/// Convenience: constant 1×1 track.
pub fn scalar_track(v: f64) -> MatrixTrack {
    MatrixTrack::Constant(DMatrix::from_element(1, 1, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_spec() -> ProblemSpec {
        let dims = Dims { n: 1, m: 1, d: 1, l: 0 };
        let mut coeffs = CoefficientSet::zeros(dims, 0);
        coeffs.drift = scalar_track(-1.0);
        let mut cost = CostSet::zeros(1, 1);
        cost.control_weight = scalar_track(1.0);
        ProblemSpec {
            dims,
            coeffs,
            cost,
            marks: MarkMeasure::empty(),
            grid: TimeGrid::new(0.0, 1.0, 0.1).unwrap(),
            initial: InitialState::Deterministic(vec![1.0]),
            weight_k: 0.0,
        }
    }

    #[test]
    fn valid_spec_passes() {
        assert!(scalar_spec().validated().is_ok());
    }

    #[test]
    fn dimension_errors_are_reported() {
        let mut s = scalar_spec();
        s.coeffs.control_drift = MatrixTrack::zeros(2, 1);
        assert!(matches!(s.validated(), Err(Error::Shape(_))));
        let mut s = scalar_spec();
        s.coeffs.diffusion.clear();
        assert!(s.validated().is_err());
        let mut s = scalar_spec();
        s.initial = InitialState::Deterministic(vec![1.0, 2.0]);
        assert!(s.validated().is_err());
    }

    #[test]
    fn asymmetric_cost_rejected() {
        let dims = Dims { n: 2, m: 1, d: 0, l: 0 };
        let mut s = scalar_spec();
        s.dims = dims;
        s.coeffs = CoefficientSet::zeros(dims, 0);
        s.cost = CostSet::zeros(2, 1);
        s.initial = InitialState::zero(2);
        s.cost.state_weight = MatrixTrack::Constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]));
        assert!(s.validated().is_err());
    }

    #[test]
    fn table_length_must_match_grid() {
        let mut s = scalar_spec();
        s.coeffs.drift = MatrixTrack::Sampled(vec![DMatrix::from_element(1, 1, -1.0); 5]);
        assert!(s.validated().is_err());
        let mut s = scalar_spec();
        s.coeffs.drift = MatrixTrack::Sampled(vec![DMatrix::from_element(1, 1, -1.0); 11]);
        assert!(s.validated().is_ok());
    }
}
