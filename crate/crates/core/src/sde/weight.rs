use serde::{Deserialize, Serialize};

use super::step::TruncatedState;
use super::truncation::TruncatedModel;
use crate::noise::NoiseSlab;

/// Direction of the change of measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Nonlinear paths reweighted to the linear-system measure.
    PtoQ,
    /// Linear paths reweighted to the nonlinear-system measure.
    QtoP,
}

/// Running exponent `z` and quadratic variation `qv` of a path density.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PathWeight {
    pub z: f64,
    pub qv: f64,
}

impl PathWeight {
    pub fn density(&self) -> f64 {
        (self.z - 0.5 * self.qv).exp()
    }

    pub fn log_density(&self) -> f64 {
        self.z - 0.5 * self.qv
    }
}

/// Left-point update over one step; `state` is the pre-step state and the
/// sum runs over `I*` only.
pub fn accumulate_weight(
    weight: &mut PathWeight,
    model: &TruncatedModel,
    state: &TruncatedState,
    slab: &NoiseSlab,
    direction: Direction,
) {
    let sigma = model.spec().sigma;
    let d = state.d;
    let sign = match direction {
        Direction::PtoQ => -1.0,
        Direction::QtoP => 1.0,
    };
    let roots = model.spec().istar.len();
    let mut dz = 0.0;
    for root in 0..roots {
        for n in 1..=state.shells {
            let x = &state.x[(n - 1) * d..n * d];
            let dw = slab.root_values(root, n as i64);
            dz += x.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    weight.z += sign * dz / sigma;
    weight.qv += roots as f64 * state.energy() * slab.dt / (sigma * sigma);
}

/// `|I*| |x|^2 T / sigma^2`.
pub fn qv_bound(model: &TruncatedModel, energy: f64, horizon: f64) -> f64 {
    let s = model.spec().sigma;
    model.spec().istar.len() as f64 * energy * horizon / (s * s)
}
