use crate::error::{Error, Result};
use crate::model::grid::TimeGrid;
use crate::model::marks::MarkMeasure;
use crate::model::process::Process;

/// Inhomogeneous data of a linear forward-backward system. Missing entries are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForcingTuple {
    /// Forward drift forcing, width n.
    pub drift: Option<Process>,
    /// Diffusion forcing, width n·d (one n-block per Brownian component).
    pub diffusion: Option<Process>,
    /// Jump forcing, width n·atoms (one n-block per mark atom).
    pub jump: Option<Process>,
    /// Backward driver forcing, width n.
    pub backward: Option<Process>,
}

/// Weighted norms of each forcing component.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForcingNorms {
    pub drift: f64,
    pub diffusion: f64,
    pub jump: f64,
    pub backward: f64,
}

impl ForcingTuple {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn check(&self, n: usize, d: usize, atoms: usize, paths: usize, points: usize) -> Result<()> {
        for (name, p, w) in [
            ("drift forcing", &self.drift, n),
            ("diffusion forcing", &self.diffusion, n * d),
            ("jump forcing", &self.jump, n * atoms),
            ("backward forcing", &self.backward, n),
        ] {
            if let Some(p) = p {
                if p.width() != w || p.paths() != paths || p.points() != points {
                    return Err(Error::Shape(format!(
                        "{name}: ({}, {}, {}) expected ({paths}, {points}, {w})",
                        p.paths(),
                        p.points(),
                        p.width()
                    )));
                }
                if !p.all_finite() {
                    return Err(Error::Invalid(format!("{name} has non-finite values")));
                }
            }
        }
        Ok(())
    }

    pub fn norms(&self, grid: &TimeGrid, weight_k: f64, marks: &MarkMeasure, n: usize) -> ForcingNorms {
        let norm = |p: &Option<Process>, w: Option<&[f64]>| p.as_ref().map_or(0.0, |p| p.weighted_norm(grid, weight_k, w));
        let jw = marks.entry_weights(n);
        ForcingNorms {
            drift: norm(&self.drift, None),
            diffusion: norm(&self.diffusion, None),
            jump: norm(&self.jump, Some(&jw)),
            backward: norm(&self.backward, None),
        }
    }
}
