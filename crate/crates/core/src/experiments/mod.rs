//! Near-optimal examples for the stability estimates, δ sweeps and exponent
//! fits against the reference rate tables.

mod construct;
mod sweep;
mod zeta;

pub use construct::{
    build_case1_example, case1_epsilon, measured_gamma, projection_pairings, solve_projected_problem, ExperimentOptions,
    ExperimentRecord, ProjectedSolution,
};
pub use zeta::{zeta_reference, BoundaryRegime, RegimeInputs, ZetaRegime};
pub use sweep::{
    balance_point, boundary_schedule, boundary_sweep, exponent_sweep, plot_script, robin_with_gradient, write_sweep_csv, BoundaryGrid,
    SweepReport,
};
