//! Open-loop control synthesis, cost evaluation and optimality checks.

pub mod cost;
pub mod example31;
pub mod expansion;
pub mod synthesis;

pub use cost::{cost_form, cost_form_per_path, evaluate_cost};
pub use example31::{example31_oracle, example31_problem, example31_spec, Example31Oracle, ScalarProfile};
pub use expansion::{
    inner_product, optimality_report, probe_direction, quadratic_expansion_check, OptimalityReport, ProbeRow,
};
pub use synthesis::{adjoint_driver, coupling_of, solve_adjoint, stationarity_residual, synthesize_control};
