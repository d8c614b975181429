use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stochshell::chain::Caps;
use stochshell::experiment::{DissipationParams, TriangulationParams};
use stochshell::{Boundary, Direction, ModelDoc, Scheme, SolveMode, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Geometric,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub system: System,
    pub shells: usize,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub scheme: Option<Scheme>,
    pub boundary: Boundary,
    pub record_every: usize,
    pub weighting: Option<Direction>,
    pub start_shell: usize,
    pub energy: f64,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            system: System::Linear,
            shells: 6,
            dt: 1e-5,
            horizon: 0.1,
            paths: 1000,
            scheme: None,
            boundary: Boundary::Absorbing,
            record_every: 1000,
            weighting: None,
            start_shell: 1,
            energy: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSettings {
    pub shells: usize,
    pub horizon: f64,
    pub t_min: f64,
    pub points: usize,
    pub grid: Grid,
    pub mode: SolveMode,
    pub start_shell: usize,
    pub energy: f64,
}

impl Default for MomentsSettings {
    fn default() -> Self {
        Self {
            shells: 20,
            horizon: 10.0,
            t_min: 1e-3,
            points: 60,
            grid: Grid::Geometric,
            mode: SolveMode::Spectral,
            start_shell: 1,
            energy: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub replicates: usize,
    pub horizon: f64,
    pub t_min: f64,
    pub points: usize,
    pub grid: Grid,
    pub caps: Caps,
    pub start_shell: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            replicates: 10_000,
            horizon: 1.0,
            t_min: 1e-3,
            points: 40,
            grid: Grid::Geometric,
            caps: Caps::default(),
            start_shell: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSettings {
    pub shells: usize,
    pub energy: f64,
}

impl Default for ConstantsSettings {
    fn default() -> Self {
        Self {
            shells: 40,
            energy: 1.0,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub model: ModelDoc,
    pub simulate: SimulateSettings,
    pub moments: MomentsSettings,
    pub chain: ChainSettings,
    pub constants: ConstantsSettings,
    pub triangulate: TriangulationParams,
    pub dissipation: DissipationParams,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        if let (Some(f), Some(dir)) = (cfg.model.file.as_mut(), path.parent()) {
            if f.is_relative() {
                *f = dir.join(&*f);
            }
        }
        Ok(cfg)
    }
}
