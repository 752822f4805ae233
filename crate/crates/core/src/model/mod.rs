//! Problem representation: grids, coefficients, mark measures, sampled
//! processes with their mean/fluctuation split, weighted norms and forcings.

pub mod file;
pub mod forcing;
pub mod grid;
pub mod marks;
pub mod ops;
pub mod process;
pub mod random;
pub mod spec;
pub mod track;

pub use file::{parse_problem, problem_to_json, ProblemFile};
pub use forcing::{ForcingNorms, ForcingTuple};
pub use grid::TimeGrid;
pub use marks::{MarkComponent, MarkMeasure};
pub use ops::{split_apply, split_apply_slice};
pub use random::{random_problem, RandomProblem};
pub use process::{empirical_mean, split_mean, weighted_norm, MeanSplit, Process};
pub use spec::{scalar_track, CoefficientSet, CostSet, Dims, InitialState, ProblemSpec};
pub use track::{combine_coefficient, Block, BlockPair, MatrixTrack};
