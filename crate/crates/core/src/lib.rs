//! Stochastic shell models with transport noise: model algebra, noise
//! fields, truncated SDE integration, the closed second-moment equation,
//! the shell-jump chain and composed experiments.

pub mod algebra;
pub mod chain;
pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod moments;
pub mod noise;
pub mod rng;
pub mod sde;

pub use algebra::{
    build_goy, build_novikov, build_sabra, ito_correction, validate_model, BilinearMap, Interaction, ModelSpec,
    Preset, ValidationReport,
};
pub use chain::{simulate_chain, survival_curve, Caps, JumpChain, Status, SurvivalCurve};
pub use config::ModelDoc;
pub use error::{ChainError, Error, ModelError, MomentError, NoiseError, SimError};
pub use moments::{build_qmatrix, decay_constants, solve_forward, DecayConstants, QMatrix, SolveMode};
pub use noise::{sample_slab, NoiseKey, NoiseSlab};
pub use sde::{
    run_ensemble, Boundary, Direction, EnsembleConfig, EnsembleStats, Scheme, System, TruncatedModel,
    TruncatedState,
};
