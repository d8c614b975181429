use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::Serialize;
use stochshell::chain::{survival_curve, JumpChain};
use stochshell::experiment::{auto_scheme, constants_report, dissipation, triangulate, unit_state};
use stochshell::moments::{build_qmatrix, geometric_grid, linear_grid, solve_forward};
use stochshell::sde::run_ensemble_on;
use stochshell::{validate_model, EnsembleConfig, Error, ModelDoc, ModelSpec, TruncatedModel};

use crate::settings::{ExperimentConfig, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    CheckFailed = 1,
}

impl Outcome {
    fn from_pass(ok: bool) -> Self {
        if ok {
            Outcome::Success
        } else {
            Outcome::CheckFailed
        }
    }
}

/// Exit status for an error: 2 for input problems, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_)) | Some(Error::Io { .. }) => 2,
        _ => 1,
    }
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let p = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("cannot write {}", p.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn sidecar(&mut self, name: &str, cfg: &ExperimentConfig) -> anyhow::Result<()> {
        let p = self.path(&format!("{name}.config.toml"));
        fs::write(&p, toml::to_string(cfg)?).with_context(|| format!("cannot write {}", p.display()))
    }

    fn report(&self) {
        for p in &self.written {
            println!("wrote {}", p.display());
        }
    }
}

fn resolve(doc: &ModelDoc) -> anyhow::Result<ModelSpec> {
    if *doc == ModelDoc::default() {
        return Err(Error::Config("no model given; use --model or a [model] table in --config".into()).into());
    }
    Ok(doc.resolve()?)
}

fn absolute(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    if let Some(f) = c.model.file.as_mut() {
        if let Ok(abs) = std::path::absolute(&*f) {
            *f = abs;
        }
    }
    c
}

pub fn run(name: &str, cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let mut out = Output::new(cfg)?;
    let outcome = match name {
        "validate" => validate(cfg, &mut out)?,
        "simulate" => simulate(cfg, &mut out)?,
        "moments" => moments(cfg, &mut out)?,
        "chain" => chain(cfg, &mut out)?,
        "constants" => constants(cfg, &mut out)?,
        "triangulate" => triangulation(cfg, &mut out)?,
        "dissipation" => dissipation_cmd(cfg, &mut out)?,
        other => bail!("unknown command {other}"),
    };
    out.sidecar(name, &absolute(cfg))?;
    out.report();
    Ok(outcome)
}

#[derive(Serialize)]
struct ValidateDoc<'a> {
    accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    checks: Vec<&'a stochshell::algebra::CheckResult>,
}

fn validate(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = match resolve(&cfg.model) {
        Ok(s) => s,
        Err(e) => match e.downcast_ref::<Error>() {
            Some(Error::Model(m)) => {
                println!("FAIL {m}");
                out.json(
                    "validate.json",
                    &ValidateDoc {
                        accepted: false,
                        error: Some(m.to_string()),
                        checks: Vec::new(),
                    },
                )?;
                return Ok(Outcome::CheckFailed);
            }
            _ => return Err(e),
        },
    };
    let report = validate_model(&spec)?;
    println!("{report}");
    out.json(
        "validate.json",
        &ValidateDoc {
            accepted: report.accepted(),
            error: None,
            checks: report.checks.iter().collect(),
        },
    )?;
    Ok(Outcome::from_pass(report.accepted()))
}

#[derive(Serialize)]
struct SimRow {
    t: f64,
    n: usize,
    mean_sq: f64,
    se: f64,
    energy_mean: f64,
    ess: f64,
}

fn simulate(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = resolve(&cfg.model)?;
    let s = &cfg.simulate;
    let model = TruncatedModel::new(&spec, s.shells, s.boundary)?;
    let scheme = s.scheme.unwrap_or_else(|| auto_scheme(&model, s.dt));
    let ens = EnsembleConfig {
        shells: s.shells,
        dt: s.dt,
        horizon: s.horizon,
        paths: s.paths,
        system: s.system,
        scheme,
        boundary: s.boundary,
        seed: cfg.seed,
        record_every: s.record_every,
        weighting: s.weighting,
    };
    let x0 = unit_state(&spec, s.shells, s.start_shell, s.energy);
    let stats = run_ensemble_on(&model, &x0, &ens)?;
    let rows = stats.times.iter().enumerate().flat_map(|(r, &t)| {
        let st = &stats;
        (1..=s.shells).map(move |n| SimRow {
            t,
            n,
            mean_sq: st.mean_sq[r][n - 1],
            se: st.se[r][n - 1],
            energy_mean: st.energy_mean[r],
            ess: st.ess[r],
        })
    });
    out.csv("simulate.csv", rows)?;
    let last = stats.times.len() - 1;
    println!(
        "scheme {:?}, {} paths, E|X|^2(T) = {:.6e} +/- {:.1e}, max energy drift {:.3e}",
        scheme, stats.paths, stats.energy_mean[last], stats.energy_se[last], stats.max_energy_drift
    );
    Ok(Outcome::Success)
}

fn grid(kind: Grid, t_min: f64, horizon: f64, points: usize) -> Vec<f64> {
    match kind {
        Grid::Geometric => geometric_grid(t_min, horizon, points),
        Grid::Linear => linear_grid(horizon, points),
    }
}

#[derive(Serialize)]
struct MomentRow {
    t: f64,
    n: usize,
    u: f64,
    mass: f64,
}

fn moments(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = resolve(&cfg.model)?;
    let s = &cfg.moments;
    if s.start_shell == 0 || s.start_shell > s.shells {
        return Err(Error::Config(format!("start_shell must lie in 1..={}", s.shells)).into());
    }
    let q = build_qmatrix(&spec, s.shells)?;
    let mut u0 = vec![0.0; s.shells];
    u0[s.start_shell - 1] = s.energy;
    let tg = grid(s.grid, s.t_min, s.horizon, s.points);
    let sol = solve_forward(&q, &u0, &tg, s.mode)?;
    let rows = sol.times.iter().enumerate().flat_map(|(j, &t)| {
        let sol = &sol;
        (1..=s.shells).map(move |n| MomentRow {
            t,
            n,
            u: sol.u[j][n - 1],
            mass: sol.mass[j],
        })
    });
    out.csv("moments.csv", rows)?;
    println!("mass(T) = {:.6e}", sol.mass.last().copied().unwrap_or(f64::NAN));
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct SurvivalRow {
    t: f64,
    survival: f64,
    se: f64,
}

#[derive(Serialize)]
struct OccupancyRow {
    t: f64,
    n: usize,
    occupancy: f64,
    se: f64,
}

#[derive(Serialize)]
struct ChainSummary {
    replicates: usize,
    exploded: usize,
    jump_cap_hits: usize,
    absorbed: usize,
    residual_time_bound: f64,
    caps: stochshell::Caps,
}

fn chain(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = resolve(&cfg.model)?;
    let s = &cfg.chain;
    if s.start_shell == 0 {
        return Err(Error::Config("start_shell must be at least 1".into()).into());
    }
    let jc = JumpChain::new(&spec)?;
    let mut start = vec![0.0; s.start_shell];
    start[s.start_shell - 1] = 1.0;
    let tg = grid(s.grid, s.t_min, s.horizon, s.points);
    let curve = survival_curve(&jc, &start, &tg, s.replicates, s.caps, cfg.seed)?;
    out.csv(
        "chain.csv",
        curve.times.iter().enumerate().map(|(j, &t)| SurvivalRow {
            t,
            survival: curve.survival[j],
            se: curve.se[j],
        }),
    )?;
    out.csv(
        "chain_occupancy.csv",
        curve.times.iter().enumerate().flat_map(|(j, &t)| {
            let c = &curve;
            (1..=c.caps.max_level).map(move |n| OccupancyRow {
                t,
                n,
                occupancy: c.occupancy[j][n - 1],
                se: c.occupancy_se(j, n),
            })
        }),
    )?;
    out.json(
        "chain.json",
        &ChainSummary {
            replicates: curve.replicates,
            exploded: curve.exploded,
            jump_cap_hits: curve.jump_cap_hits,
            absorbed: curve.absorbed,
            residual_time_bound: curve.residual_time_bound,
            caps: curve.caps,
        },
    )?;
    println!(
        "survival(T) = {:.4} ({} of {} replicates exploded)",
        curve.survival.last().copied().unwrap_or(f64::NAN),
        curve.exploded,
        curve.replicates
    );
    Ok(Outcome::Success)
}

fn constants(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = resolve(&cfg.model)?;
    let r = constants_report(&spec, cfg.constants.energy, cfg.constants.shells)?;
    if let Some(stochshell::moments::Threshold::Undefined { radicand }) = r.constants.threshold {
        eprintln!("warning: smallness threshold undefined (a^2 - c^2/lambda^2 = {radicand:.4})");
    }
    out.json("constants.json", &r)?;
    println!(
        "nu = {:.6e}, mu = {:.6e}, C = {:.6e}, rho = {:.4}, sigma invariance {:.1e}",
        r.constants.nu, r.constants.mu, r.constants.c, r.constants.rho, r.sigma_invariance
    );
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct TriSummary<'a> {
    scheme: stochshell::Scheme,
    stiffness: f64,
    passing_cells: usize,
    cells: usize,
    pass_fraction: f64,
    passed: bool,
    sde_failure: &'a Option<String>,
    chain_exploded: usize,
}

fn triangulation(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = resolve(&cfg.model)?;
    let r = triangulate(&spec, &cfg.triangulate, cfg.seed)?;
    out.csv("triangulate.csv", r.cells.iter())?;
    out.json(
        "triangulate.json",
        &TriSummary {
            scheme: r.scheme,
            stiffness: r.stiffness,
            passing_cells: r.passing_cells,
            cells: r.cells.len(),
            pass_fraction: r.pass_fraction,
            passed: r.passed,
            sde_failure: &r.sde_failure,
            chain_exploded: r.chain_exploded,
        },
    )?;
    if let Some(f) = &r.sde_failure {
        eprintln!("warning: Monte Carlo route failed: {f}");
    }
    println!(
        "{} {}/{} cells within {} SE (scheme {:?}, dt*pi_N = {:.3e})",
        if r.passed { "PASS" } else { "FAIL" },
        r.passing_cells,
        r.cells.len(),
        cfg.triangulate.z_limit,
        r.scheme,
        r.stiffness
    );
    Ok(Outcome::from_pass(r.passed))
}

#[derive(Serialize)]
struct MassRow {
    shells: usize,
    t: f64,
    mass: f64,
}

fn dissipation_cmd(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = resolve(&cfg.model)?;
    let r = dissipation(&spec, &cfg.dissipation, cfg.seed)?;
    out.csv(
        "dissipation.csv",
        r.curves.iter().flat_map(|c| {
            c.times.iter().zip(&c.mass).map(move |(&t, &mass)| MassRow {
                shells: c.shells,
                t,
                mass,
            })
        }),
    )?;
    let mut doc = serde_json::to_value(&r)?;
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("curves");
        obj.insert("passed".into(), r.passed().into());
    }
    out.json("dissipation.json", &doc)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} fitted rate {} vs sigma^2/mu = {:.4}; mass<1 {}, bound {}, monotone {}, control drift {:.1e}",
        if r.passed() { "PASS" } else { "FAIL" },
        r.fitted_rate.map_or("n/a".to_string(), |v| format!("{v:.4}")),
        r.bound_rate,
        r.mass_below_one,
        r.bound_holds,
        r.monotone_in_shells,
        r.control_energy_drift
    );
    Ok(Outcome::from_pass(r.passed()))
}
