use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform truncated time grid s_k = t0 + k·dt, k = 0..=num_steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub num_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, horizon: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && horizon.is_finite() && dt.is_finite()) {
            return Err(Error::Invalid("grid values must be finite".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Invalid(format!("dt={dt} must be positive")));
        }
        if !(horizon > t0) {
            return Err(Error::Invalid(format!("horizon T={horizon} must exceed t0={t0}")));
        }
        let num_steps = ((horizon - t0) / dt).round() as usize;
        if num_steps == 0 {
            return Err(Error::Invalid("grid has no steps".into()));
        }
        Ok(Self { t0, horizon, dt, num_steps })
    }

    pub fn points(&self) -> usize {
        self.num_steps + 1
    }

    pub fn s(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Last grid point, t0 + num_steps·dt.
    pub fn end(&self) -> f64 {
        self.s(self.num_steps)
    }

    /// Trapezoid weight of grid point k.
    pub fn trapezoid(&self, k: usize) -> f64 {
        if k == 0 || k == self.num_steps {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// Trapezoid weights times e^{2Ks_k}.
    pub fn weighted_quadrature(&self, weight_k: f64) -> Vec<f64> {
        (0..self.points())
            .map(|k| self.trapezoid(k) * (2.0 * weight_k * self.s(k)).exp())
            .collect()
    }

    /// Same spacing and start, different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.t0, horizon, self.dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_rounds() {
        let g = TimeGrid::new(0.0, 20.0, 1e-3).unwrap();
        assert_eq!(g.num_steps, 20_000);
        assert!((g.end() - 20.0).abs() < 1e-9);
        assert!(TimeGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = TimeGrid::new(0.0, 3.0, 0.25).unwrap();
        let q: f64 = (0..g.points()).map(|k| g.trapezoid(k) * g.s(k)).sum();
        assert!((q - 4.5).abs() < 1e-12);
    }
}
