mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use settings::{ExperimentConfig, Grid};
use stochshell::{Boundary, Direction, Scheme, SolveMode, System};

/// Stochastic shell models: validation, simulation, moment flow and
/// jump-chain experiments.
#[derive(Debug, Parser)]
#[command(name = "stochshell", version)]
pub struct Cli {
    /// Experiment configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Preset name (goy, sabra, novikov) or path to a model file.
    #[arg(long)]
    model: Option<String>,
    /// Model parameter override, e.g. `--param lambda=2.5`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model against the structural requirements.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Monte Carlo ensemble of the truncated SDE.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_enum::<System>)]
        system: Option<System>,
        #[arg(long)]
        shells: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        /// em, conservative or exponential; chosen from the stiffness when absent.
        #[arg(long, value_parser = parse_enum::<Scheme>)]
        scheme: Option<Scheme>,
        #[arg(long, value_parser = parse_enum::<Boundary>)]
        boundary: Option<Boundary>,
        #[arg(long)]
        record_every: Option<usize>,
        /// Girsanov reweighting direction: qtop or ptoq.
        #[arg(long, value_parser = parse_enum::<Direction>)]
        weighting: Option<Direction>,
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long)]
        start_shell: Option<usize>,
    },
    /// Solve the closed second-moment equation.
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        shells: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_parser = parse_enum::<Grid>)]
        grid: Option<Grid>,
        #[arg(long, value_parser = parse_enum::<SolveMode>)]
        mode: Option<SolveMode>,
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long)]
        start_shell: Option<usize>,
    },
    /// Survival and occupancy of the shell-jump chain.
    Chain {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_parser = parse_enum::<Grid>)]
        grid: Option<Grid>,
        #[arg(long)]
        max_level: Option<usize>,
        #[arg(long)]
        max_jumps: Option<u64>,
        #[arg(long)]
        start_shell: Option<usize>,
    },
    /// Decay constants of the moment flow.
    Constants {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        shells: Option<usize>,
        /// Initial energy |x|^2.
        #[arg(long)]
        energy: Option<f64>,
    },
    /// Compare Monte Carlo, moment-flow and jump-chain second moments.
    Triangulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        shells: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Comma-separated comparison times.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        max_shell: Option<usize>,
        #[arg(long, value_parser = parse_enum::<Scheme>)]
        scheme: Option<Scheme>,
        #[arg(long)]
        energy: Option<f64>,
    },
    /// Energy-loss evidence from the moment flow.
    Dissipation {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated truncation levels.
        #[arg(long, value_delimiter = ',')]
        shells: Option<Vec<usize>>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long)]
        no_girsanov: bool,
        #[arg(long)]
        girsanov_paths: Option<usize>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_model(cfg: &mut ExperimentConfig, m: ModelArgs) -> anyhow::Result<()> {
    if let Some(arg) = m.model {
        cfg.model = stochshell::config::model_ref(&arg)?;
    }
    for kv in m.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--param expects KEY=VALUE, got {kv:?}"))?;
        let v: f64 = v.trim().parse().map_err(|e| anyhow::anyhow!("--param {k}: {e}"))?;
        cfg.model.set_param(k.trim(), v)?;
    }
    Ok(())
}

/// Merges flags into the configuration and returns the command name.
fn merge(cli: Cli) -> anyhow::Result<(ExperimentConfig, &'static str)> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    let name = match cli.command {
        Command::Validate { model } => {
            apply_model(&mut cfg, model)?;
            "validate"
        }
        Command::Simulate {
            model,
            system,
            shells,
            dt,
            horizon,
            paths,
            scheme,
            boundary,
            record_every,
            weighting,
            energy,
            start_shell,
        } => {
            apply_model(&mut cfg, model)?;
            let s = &mut cfg.simulate;
            set(&mut s.system, system);
            set(&mut s.shells, shells);
            set(&mut s.dt, dt);
            set(&mut s.horizon, horizon);
            set(&mut s.paths, paths);
            if scheme.is_some() {
                s.scheme = scheme;
            }
            set(&mut s.boundary, boundary);
            set(&mut s.record_every, record_every);
            if weighting.is_some() {
                s.weighting = weighting;
            }
            set(&mut s.energy, energy);
            set(&mut s.start_shell, start_shell);
            "simulate"
        }
        Command::Moments {
            model,
            shells,
            horizon,
            t_min,
            points,
            grid,
            mode,
            energy,
            start_shell,
        } => {
            apply_model(&mut cfg, model)?;
            let s = &mut cfg.moments;
            set(&mut s.shells, shells);
            set(&mut s.horizon, horizon);
            set(&mut s.t_min, t_min);
            set(&mut s.points, points);
            set(&mut s.grid, grid);
            set(&mut s.mode, mode);
            set(&mut s.energy, energy);
            set(&mut s.start_shell, start_shell);
            "moments"
        }
        Command::Chain {
            model,
            replicates,
            horizon,
            t_min,
            points,
            grid,
            max_level,
            max_jumps,
            start_shell,
        } => {
            apply_model(&mut cfg, model)?;
            let s = &mut cfg.chain;
            set(&mut s.replicates, replicates);
            set(&mut s.horizon, horizon);
            set(&mut s.t_min, t_min);
            set(&mut s.points, points);
            set(&mut s.grid, grid);
            set(&mut s.caps.max_level, max_level);
            set(&mut s.caps.max_jumps, max_jumps);
            set(&mut s.start_shell, start_shell);
            "chain"
        }
        Command::Constants { model, shells, energy } => {
            apply_model(&mut cfg, model)?;
            set(&mut cfg.constants.shells, shells);
            set(&mut cfg.constants.energy, energy);
            "constants"
        }
        Command::Triangulate {
            model,
            shells,
            dt,
            horizon,
            paths,
            replicates,
            times,
            max_shell,
            scheme,
            energy,
        } => {
            apply_model(&mut cfg, model)?;
            let s = &mut cfg.triangulate;
            set(&mut s.shells, shells);
            set(&mut s.dt, dt);
            set(&mut s.horizon, horizon);
            set(&mut s.paths, paths);
            set(&mut s.replicates, replicates);
            set(&mut s.times, times);
            set(&mut s.max_shell, max_shell);
            if scheme.is_some() {
                s.scheme = scheme;
            }
            set(&mut s.energy, energy);
            "triangulate"
        }
        Command::Dissipation {
            model,
            shells,
            t_max,
            points,
            energy,
            no_girsanov,
            girsanov_paths,
        } => {
            apply_model(&mut cfg, model)?;
            let s = &mut cfg.dissipation;
            set(&mut s.shells, shells);
            set(&mut s.t_max, t_max);
            set(&mut s.points, points);
            set(&mut s.energy, energy);
            if no_girsanov {
                s.girsanov.enabled = false;
            }
            set(&mut s.girsanov.paths, girsanov_paths);
            "dissipation"
        }
    };
    Ok((cfg, name))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (cfg, name) = match merge(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(name, &cfg) {
        Ok(outcome) => ExitCode::from(outcome as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
