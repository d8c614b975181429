//! Galerkin-truncated nonlinear and linear Itô systems.

mod ensemble;
mod goy;
mod step;
mod truncation;
mod weight;

pub use ensemble::{run_ensemble, run_ensemble_on, simulate_path, EnsembleConfig, EnsembleStats};
pub use goy::ComplexGoy;
pub use step::{step_conservative, step_em, step_exponential, Integrator, Scheme, System, TruncatedState};
pub use truncation::{Boundary, TruncatedModel};
pub use weight::{accumulate_weight, qv_bound, Direction, PathWeight};
