//! Linear mean-field BSDE with jumps on a truncated horizon.

pub mod estimate;
pub mod solve;

pub use estimate::{check_bsde_decay, check_bsde_estimate};
pub use solve::{solve_mfbsde, solve_system, AdjointSolution, BackwardSystem, BsdeOptions};

#[cfg(test)]
mod tests;
