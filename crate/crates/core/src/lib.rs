//! Infinite-horizon mean-field linear-quadratic control with jumps:
//! dissipation analysis, forward and backward solvers, the coupled
//! Hamiltonian system and open-loop control synthesis.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod backward;
pub mod control;
pub mod error;
pub mod forward;
pub mod hamiltonian;
pub mod linalg;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{
    BlockPair, CoefficientSet, CostSet, Dims, ForcingTuple, InitialState, MarkComponent, MarkMeasure, MatrixTrack,
    Process, ProblemSpec, RandomProblem, TimeGrid,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
