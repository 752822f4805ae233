//! Simulation of the controlled mean-field jump SDE and checks of its
//! integrability estimate.

pub mod estimate;
pub mod noise;
pub mod simulate;

pub use estimate::{check_decay, check_sde_estimate, DecayReport, InequalityReport};
pub use noise::NoiseBank;
pub use simulate::{
    realized_feedback, simulate_mfsde, simulate_system, ControlInput, ForwardSystem, MeanMode, PathEnsemble,
};

#[cfg(test)]
mod tests;
