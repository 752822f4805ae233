use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A matrix-valued coefficient on the grid: either constant or one sample
/// per grid point (piecewise constant in between).
#[derive(Clone, Debug, PartialEq)]
pub enum MatrixTrack {
    Constant(DMatrix<f64>),
    Sampled(Vec<DMatrix<f64>>),
}

/// Which half of the mean/fluctuation split a combined coefficient acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    /// Γ¹ = Γ, acting on ζ − E ζ.
    Fluctuation,
    /// Γ² = Γ + Γ̄, acting on E ζ.
    Mean,
}

impl MatrixTrack {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatrixTrack::Constant(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        MatrixTrack::Constant(DMatrix::identity(n, n))
    }

    pub fn scalar(v: f64) -> Self {
        MatrixTrack::Constant(DMatrix::from_element(1, 1, v))
    }

    pub fn shape(&self) -> (usize, usize) {
        let m = self.first();
        (m.nrows(), m.ncols())
    }

    fn first(&self) -> &DMatrix<f64> {
        match self {
            MatrixTrack::Constant(m) => m,
            MatrixTrack::Sampled(v) => &v[0],
        }
    }

    /// Sample at grid point k; indices past the table reuse the last sample.
    #[inline]
    pub fn at(&self, k: usize) -> &DMatrix<f64> {
        match self {
            MatrixTrack::Constant(m) => m,
            MatrixTrack::Sampled(v) => &v[k.min(v.len() - 1)],
        }
    }

    pub fn sample_count(&self) -> Option<usize> {
        match self {
            MatrixTrack::Constant(_) => None,
            MatrixTrack::Sampled(v) => Some(v.len()),
        }
    }

    /// Distinct matrices to scan when taking a sup over the grid.
    pub fn samples(&self) -> Vec<&DMatrix<f64>> {
        match self {
            MatrixTrack::Constant(m) => vec![m],
            MatrixTrack::Sampled(v) => v.iter().collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.samples().iter().all(|m| m.iter().all(|&v| v == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.samples().iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> MatrixTrack {
        match self {
            MatrixTrack::Constant(m) => MatrixTrack::Constant(f(m)),
            MatrixTrack::Sampled(v) => MatrixTrack::Sampled(v.iter().map(f).collect()),
        }
    }

    /// Pointwise binary operation; constant only if both inputs are.
    pub fn zip_with(
        &self,
        other: &MatrixTrack,
        f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    ) -> Result<MatrixTrack> {
        match (self, other) {
            (MatrixTrack::Constant(a), MatrixTrack::Constant(b)) => Ok(MatrixTrack::Constant(f(a, b))),
            _ => {
                let n = match (self.sample_count(), other.sample_count()) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::Shape(format!("tracks with {a} and {b} samples")))
                    }
                    (Some(a), _) | (_, Some(a)) => a,
                    (None, None) => unreachable!(),
                };
                Ok(MatrixTrack::Sampled((0..n).map(|k| f(self.at(k), other.at(k))).collect()))
            }
        }
    }

    pub fn add(&self, other: &MatrixTrack) -> Result<MatrixTrack> {
        self.same_shape(other)?;
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &MatrixTrack) -> Result<MatrixTrack> {
        self.same_shape(other)?;
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise matrix product self·other.
    pub fn mul(&self, other: &MatrixTrack) -> Result<MatrixTrack> {
        if self.shape().1 != other.shape().0 {
            return Err(Error::Shape(format!("cannot multiply {:?} by {:?}", self.shape(), other.shape())));
        }
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scaled(&self, c: f64) -> MatrixTrack {
        self.map(|m| m * c)
    }

    pub fn transpose(&self) -> MatrixTrack {
        self.map(|m| m.transpose())
    }

    /// self + c·I
    pub fn shifted(&self, c: f64) -> MatrixTrack {
        self.map(|m| m + DMatrix::identity(m.nrows(), m.ncols()) * c)
    }

    fn same_shape(&self, other: &MatrixTrack) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }
}

/// Γ¹ = Γ or Γ² = Γ + Γ̄.
pub fn combine_coefficient(gamma: &MatrixTrack, gamma_bar: &MatrixTrack, block: Block) -> Result<MatrixTrack> {
    if gamma.shape() != gamma_bar.shape() {
        return Err(Error::Shape(format!(
            "coefficient {:?} and its mean-field partner {:?}",
            gamma.shape(),
            gamma_bar.shape()
        )));
    }
    match block {
        Block::Fluctuation => {
            // still validate grid compatibility
            gamma.zip_with(gamma_bar, |a, _| a.clone())
        }
        Block::Mean => gamma.add(gamma_bar),
    }
}

/// A coefficient already split into the fluctuation and mean blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPair {
    pub fluct: MatrixTrack,
    pub mean: MatrixTrack,
}

impl BlockPair {
    pub fn from_pair(gamma: &MatrixTrack, gamma_bar: &MatrixTrack) -> Result<Self> {
        Ok(Self {
            fluct: combine_coefficient(gamma, gamma_bar, Block::Fluctuation)?,
            mean: combine_coefficient(gamma, gamma_bar, Block::Mean)?,
        })
    }

    pub fn uniform(track: MatrixTrack) -> Self {
        Self { fluct: track.clone(), mean: track }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::uniform(MatrixTrack::zeros(rows, cols))
    }

    pub fn get(&self, block: Block) -> &MatrixTrack {
        match block {
            Block::Fluctuation => &self.fluct,
            Block::Mean => &self.mean,
        }
    }

    pub fn map(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64> + Copy) -> Self {
        Self { fluct: self.fluct.map(f), mean: self.mean.map(f) }
    }

    pub fn is_zero(&self) -> bool {
        self.fluct.is_zero() && self.mean.is_zero()
    }

    /// Recover (Γ, Γ̄) from the split form.
    pub fn to_pair(&self) -> Result<(MatrixTrack, MatrixTrack)> {
        Ok((self.fluct.clone(), self.mean.sub(&self.fluct)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_partner_gives_same_track() {
        let g = MatrixTrack::Constant(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let z = MatrixTrack::zeros(2, 2);
        assert_eq!(combine_coefficient(&g, &z, Block::Fluctuation).unwrap(), g);
        assert_eq!(combine_coefficient(&g, &z, Block::Mean).unwrap(), g);
    }

    #[test]
    fn mean_block_of_worked_example_drift() {
        // drift −(a+2ρ), mean-field partner a, with ρ=1, a=0.3
        let rho = 1.0;
        let a = 0.3;
        let g = MatrixTrack::scalar(-(a + 2.0 * rho));
        let gb = MatrixTrack::scalar(a);
        let two = combine_coefficient(&g, &gb, Block::Mean).unwrap();
        assert!((two.at(0)[(0, 0)] + 2.0 * rho).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g = MatrixTrack::zeros(2, 2);
        let gb = MatrixTrack::zeros(2, 1);
        assert!(combine_coefficient(&g, &gb, Block::Mean).is_err());
        let s1 = MatrixTrack::Sampled(vec![DMatrix::zeros(1, 1); 3]);
        let s2 = MatrixTrack::Sampled(vec![DMatrix::zeros(1, 1); 4]);
        assert!(s1.add(&s2).is_err());
    }

    #[test]
    fn sampled_and_constant_mix() {
        let s = MatrixTrack::Sampled((0..4).map(|k| DMatrix::from_element(1, 1, k as f64)).collect());
        let c = MatrixTrack::scalar(10.0);
        let sum = s.add(&c).unwrap();
        assert_eq!(sum.sample_count(), Some(4));
        assert_eq!(sum.at(3)[(0, 0)], 13.0);
        assert_eq!(sum.at(99)[(0, 0)], 13.0);
    }

    fn mat3() -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 9).prop_map(|v| DMatrix::from_row_slice(3, 3, &v))
    }

    proptest! {
        #[test]
        fn combined_matches_elementwise_oracle(a in mat3(), b in mat3()) {
            let g = MatrixTrack::Constant(a.clone());
            let gb = MatrixTrack::Constant(b.clone());
            let two = combine_coefficient(&g, &gb, Block::Mean).unwrap();
            let one = combine_coefficient(&g, &gb, Block::Fluctuation).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(two.at(0)[(i, j)], a[(i, j)] + b[(i, j)]);
                    prop_assert_eq!(one.at(0)[(i, j)], a[(i, j)]);
                    // Γ² − Γ¹ = Γ̄ (exact up to one rounding of the addition)
                    let diff = two.at(0)[(i, j)] - one.at(0)[(i, j)];
                    prop_assert!((diff - b[(i, j)]).abs() <= 1e-14 * (1.0 + a[(i, j)].abs()));
                }
            }
        }
    }
}
