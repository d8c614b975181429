//! Shared fixtures for the kernel benchmarks.

use stochshell::moments::{build_qmatrix, QMatrix};
use stochshell::{Boundary, ModelSpec, Preset, TruncatedModel, TruncatedState};

pub fn goy() -> ModelSpec {
    Preset::default_goy().build().expect("default GOY preset is valid")
}

pub fn novikov() -> ModelSpec {
    Preset::default_novikov().build().expect("default Novikov preset is valid")
}

pub fn truncated(spec: &ModelSpec, shells: usize) -> TruncatedModel {
    TruncatedModel::new(spec, shells, Boundary::Absorbing).expect("truncation fits the noise window")
}

/// Smooth, decaying state with every shell populated.
pub fn spread_state(spec: &ModelSpec, shells: usize) -> TruncatedState {
    let x = (0..shells * spec.d)
        .map(|i| (0.7f64).powi((i / spec.d) as i32) * if i % 2 == 0 { 1.0 } else { -0.5 })
        .collect();
    TruncatedState::new(shells, spec.d, x).expect("shape matches")
}

pub fn qmatrix(spec: &ModelSpec, shells: usize) -> QMatrix {
    build_qmatrix(spec, shells).expect("identity-gram model")
}
