//! Closed second-moment equation `u' = u Pi` and the decay constants of
//! its minimal solution.

mod constants;
mod forward;
mod qmatrix;

pub use constants::{
    decay_constants, embedded_matrix, expected_visits, smallness_threshold_goy_sabra, DecayConstants, Threshold,
    TAIL_STEP, TAIL_TOL,
};
pub use forward::{geometric_grid, linear_grid, solve_forward, ForwardSolution, SolveMode};
pub use qmatrix::{build_qmatrix, QMatrix};
