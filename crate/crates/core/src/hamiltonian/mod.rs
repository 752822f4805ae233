//! The coupled Hamiltonian forward-backward system: cross-term
//! elimination, the decoupled base case, α-continuation with damped Picard
//! levels, and residual/stability diagnostics.

pub mod continuation;
pub mod diagnostics;
pub mod system;
pub mod transform;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::ProblemSpec;

pub use continuation::{check_hamiltonian_window, continuation_solve, ContinuationState, HamiltonianOptions, LevelRecord};
pub use diagnostics::{fbsde_residual, stability_check, ResidualReport, StabilityReport};
pub use system::{coupling, CoupledSystem, QuadrupleSolution, ThetaNorms};
pub use transform::{eliminate_cross_terms, TransformedSpec};

/// Whether to eliminate cross weights before solving.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformMode {
    #[default]
    Auto,
    Off,
}

/// The problem the continuation method actually solves, with the transform
/// applied when needed.
pub fn prepare(spec: &ProblemSpec, mode: TransformMode) -> Result<(ProblemSpec, Option<TransformedSpec>)> {
    match mode {
        TransformMode::Auto if spec.has_cross_terms() => {
            let t = eliminate_cross_terms(spec)?;
            Ok((t.spec.clone(), Some(t)))
        }
        _ => Ok((spec.clone(), None)),
    }
}

#[cfg(test)]
mod tests;
