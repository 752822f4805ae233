use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-activity discretisation of one jump component's Lévy measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkComponent {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MarkComponent {
    /// Total intensity λ_j.
    pub fn intensity(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Σ_k w_k (1 ∧ |e_k|²).
    pub fn small_jump_mass(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(e, w)| w * e.iter().map(|v| v * v).sum::<f64>().min(1.0))
            .sum()
    }
}

/// Mark measures for all l jump components. Atoms are flattened in
/// component order; coefficient and process arrays use that flat index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkMeasure {
    components: Vec<MarkComponent>,
}

impl MarkMeasure {
    pub fn new(components: Vec<MarkComponent>) -> Result<Self> {
        let l = components.len();
        for (j, c) in components.iter().enumerate() {
            if c.atoms.len() != c.weights.len() {
                return Err(Error::Shape(format!(
                    "mark component {j}: {} atoms but {} weights",
                    c.atoms.len(),
                    c.weights.len()
                )));
            }
            if c.atoms.is_empty() {
                return Err(Error::Invalid(format!("mark component {j} has no atoms")));
            }
            for (a, (e, &w)) in c.atoms.iter().zip(&c.weights).enumerate() {
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::Invalid(format!(
                        "mark component {j}, atom {a}: weight {w} must be finite and nonnegative"
                    )));
                }
                if e.len() != l {
                    return Err(Error::Shape(format!(
                        "mark component {j}, atom {a}: mark has dimension {} but l={l}",
                        e.len()
                    )));
                }
                if e.iter().any(|v| !v.is_finite()) || e.iter().all(|&v| v == 0.0) {
                    return Err(Error::Invalid(format!(
                        "mark component {j}, atom {a}: marks must be finite and nonzero"
                    )));
                }
            }
        }
        Ok(Self { components })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn components(&self) -> &[MarkComponent] {
        &self.components
    }

    /// Number of jump components l.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn atoms_total(&self) -> usize {
        self.components.iter().map(|c| c.atoms.len()).sum()
    }

    /// Atom weights in flat order.
    pub fn flat_weights(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| c.weights.iter().copied()).collect()
    }

    /// Flat index of the first atom of each component.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.components
            .iter()
            .map(|c| {
                let o = acc;
                acc += c.atoms.len();
                o
            })
            .collect()
    }

    /// Per-entry weights for a field holding one `block`-vector per atom.
    pub fn entry_weights(&self, block: usize) -> Vec<f64> {
        self.flat_weights()
            .into_iter()
            .flat_map(|w| std::iter::repeat_n(w, block))
            .collect()
    }

    /// ‖ψ‖²_ρ = Σ_j Σ_k w_{j,k} |ψ_{j,k}|² for `psi` laid out as one block per atom.
    pub fn fibre_norm_sq(&self, psi: &[f64], block: usize) -> f64 {
        self.flat_weights()
            .iter()
            .enumerate()
            .map(|(a, w)| w * psi[a * block..(a + 1) * block].iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_component() -> MarkMeasure {
        MarkMeasure::new(vec![
            MarkComponent { atoms: vec![vec![1.0, 0.0], vec![-0.5, 0.2]], weights: vec![0.3, 1.2] },
            MarkComponent { atoms: vec![vec![0.0, 2.0]], weights: vec![0.7] },
        ])
        .unwrap()
    }

    #[test]
    fn layout_and_intensity() {
        let m = two_component();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atoms_total(), 3);
        assert_eq!(m.offsets(), vec![0, 2]);
        assert!((m.components()[0].intensity() - 1.5).abs() < 1e-15);
        // 0.3·1 + 1.2·0.29 + 0.7·1
        assert!((m.components()[0].small_jump_mass() - (0.3 + 1.2 * 0.29)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_measures() {
        let zero_atom = MarkComponent { atoms: vec![vec![0.0]], weights: vec![1.0] };
        assert!(MarkMeasure::new(vec![zero_atom]).is_err());
        let neg = MarkComponent { atoms: vec![vec![1.0]], weights: vec![-1.0] };
        assert!(MarkMeasure::new(vec![neg]).is_err());
        let wrong_dim = MarkComponent { atoms: vec![vec![1.0, 1.0]], weights: vec![1.0] };
        assert!(MarkMeasure::new(vec![wrong_dim]).is_err());
    }

    proptest! {
        #[test]
        fn fibre_norm_matches_double_sum(vals in proptest::collection::vec(-5.0f64..5.0, 6)) {
            let m = two_component();
            let block = 2;
            let fast = m.fibre_norm_sq(&vals, block);
            let mut brute = 0.0;
            let mut flat = 0;
            for c in m.components() {
                for w in &c.weights {
                    for i in 0..block {
                        brute += w * vals[flat * block + i].powi(2);
                    }
                    flat += 1;
                }
            }
            prop_assert!((fast - brute).abs() <= 1e-12 * (1.0 + brute));
        }
    }
}
