use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::step::{Integrator, Scheme, System, TruncatedState};
use super::truncation::{Boundary, TruncatedModel};
use super::weight::{accumulate_weight, Direction, PathWeight};
use crate::algebra::ModelSpec;
use crate::error::{PathFailure, SimError};
use crate::noise::NoiseKey;

const BLOCK: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub shells: usize,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub system: System,
    pub scheme: Scheme,
    #[serde(default)]
    pub boundary: Boundary,
    pub seed: u64,
    /// Record every this many steps (the final step is always recorded).
    pub record_every: usize,
    #[serde(default)]
    pub weighting: Option<Direction>,
}

impl EnsembleConfig {
    pub fn steps(&self) -> Result<usize, SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(SimError::Setting("dt must be positive and the horizon non-negative".into()));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon.max(self.dt) {
            return Err(SimError::Setting(format!(
                "horizon {} is not a whole number of steps of size {}",
                self.horizon, self.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn record_steps(&self) -> Result<Vec<usize>, SimError> {
        let steps = self.steps()?;
        let every = self.record_every.max(1);
        let mut out: Vec<usize> = (0..=steps).step_by(every).collect();
        if *out.last().expect("non-empty") != steps {
            out.push(steps);
        }
        Ok(out)
    }
}

/// Per-record ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// `mean_sq[r][n-1]` estimates `E|X_n(t_r)|^2`.
    pub mean_sq: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub energy_mean: Vec<f64>,
    pub energy_se: Vec<f64>,
    pub weight_mean: Vec<f64>,
    pub weight_se: Vec<f64>,
    pub ess: Vec<f64>,
    pub max_qv: f64,
    pub max_energy_drift: f64,
    pub paths: usize,
}

#[derive(Debug, Clone)]
struct Sums {
    f: Vec<f64>,
    f2: Vec<f64>,
    w: Vec<f64>,
    w2: Vec<f64>,
    max_qv: f64,
    max_drift: f64,
    failures: Vec<PathFailure>,
    fatal: Option<SimError>,
}

impl Sums {
    fn new(records: usize, cols: usize) -> Self {
        Self {
            f: vec![0.0; records * cols],
            f2: vec![0.0; records * cols],
            w: vec![0.0; records],
            w2: vec![0.0; records],
            max_qv: 0.0,
            max_drift: 0.0,
            failures: Vec::new(),
            fatal: None,
        }
    }

    fn merge(mut self, other: Sums) -> Sums {
        for (a, b) in self.f.iter_mut().zip(&other.f) {
            *a += b;
        }
        for (a, b) in self.f2.iter_mut().zip(&other.f2) {
            *a += b;
        }
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += b;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += b;
        }
        self.max_qv = self.max_qv.max(other.max_qv);
        self.max_drift = self.max_drift.max(other.max_drift);
        self.failures.extend(other.failures);
        self.fatal = self.fatal.or(other.fatal);
        self
    }
}

/// Runs one path and feeds its records to `record`.
pub fn simulate_path(
    model: &TruncatedModel,
    x0: &[f64],
    cfg: &EnsembleConfig,
    path: u64,
    mut record: impl FnMut(usize, &TruncatedState, &PathWeight),
) -> Result<(TruncatedState, PathWeight), SimError> {
    let steps = cfg.steps()?;
    let marks = cfg.record_steps()?;
    let mut state = TruncatedState::new(model.shells(), model.dim(), x0.to_vec())?;
    let mut weight = PathWeight::default();
    let mut integ = Integrator::new(model);
    let mut slab = model.layout().zeros(cfg.dt);
    let mut next = 0;
    for k in 0..=steps {
        if next < marks.len() && marks[next] == k {
            record(next, &state, &weight);
            next += 1;
        }
        if k == steps {
            break;
        }
        model.layout().refill(&mut slab, cfg.dt, NoiseKey::new(cfg.seed, path, k as u64));
        if let Some(dir) = cfg.weighting {
            accumulate_weight(&mut weight, model, &state, &slab, dir);
        }
        integ.step(cfg.scheme, &mut state, &slab, cfg.system, path)?;
    }
    Ok((state, weight))
}

/// Monte Carlo ensemble of truncated paths; deterministic for a given seed
/// irrespective of thread count.
pub fn run_ensemble(spec: &ModelSpec, x0: &[f64], cfg: &EnsembleConfig) -> Result<EnsembleStats, SimError> {
    let model = TruncatedModel::new(spec, cfg.shells, cfg.boundary)?;
    run_ensemble_on(&model, x0, cfg)
}

pub fn run_ensemble_on(model: &TruncatedModel, x0: &[f64], cfg: &EnsembleConfig) -> Result<EnsembleStats, SimError> {
    if cfg.paths == 0 {
        return Err(SimError::Setting("at least one path is required".into()));
    }
    if x0.len() != model.shells() * model.dim() {
        return Err(SimError::StateShape {
            got: x0.len() / model.dim(),
            got_d: model.dim(),
            want: model.shells(),
            want_d: model.dim(),
        });
    }
    let marks = cfg.record_steps()?;
    let records = marks.len();
    let shells = model.shells();
    let cols = shells + 1;
    let energy0: f64 = x0.iter().map(|v| v * v).sum();
    let blocks = cfg.paths.div_ceil(BLOCK);
    let partial: Vec<Sums> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut sums = Sums::new(records, cols);
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(cfg.paths);
            for p in lo..hi {
                let mut local = Sums::new(records, cols);
                let res = simulate_path(model, x0, cfg, p as u64, |r, st, w| {
                    let wt = if cfg.weighting.is_some() { w.density() } else { 1.0 };
                    let row = &mut local.f[r * cols..(r + 1) * cols];
                    let row2 = &mut local.f2[r * cols..(r + 1) * cols];
                    for n in 1..=shells {
                        let v = wt * st.shell_sq(n);
                        row[n - 1] = v;
                        row2[n - 1] = v * v;
                    }
                    let e = st.energy();
                    row[shells] = wt * e;
                    row2[shells] = (wt * e) * (wt * e);
                    local.w[r] = wt;
                    local.w2[r] = wt * wt;
                    let drift = if energy0 > 0.0 { (e - energy0).abs() / energy0 } else { e };
                    local.max_drift = local.max_drift.max(drift);
                    local.max_qv = local.max_qv.max(w.qv);
                });
                match res {
                    Ok(_) => sums = sums.merge(local),
                    Err(SimError::PathFailure(f)) => sums.failures.push(f),
                    Err(e) => {
                        sums.fatal.get_or_insert(e);
                    }
                }
            }
            sums
        })
        .collect();
    let total = partial
        .into_iter()
        .reduce(Sums::merge)
        .expect("at least one block");
    if let Some(e) = total.fatal {
        return Err(e);
    }
    if let Some(first) = total.failures.first() {
        return Err(SimError::EnsembleFailure {
            count: total.failures.len(),
            paths: cfg.paths,
            first: first.clone(),
        });
    }
    let np = cfg.paths as f64;
    let stat = |s: f64, s2: f64| {
        let mean = s / np;
        let var = if cfg.paths > 1 {
            ((s2 - s * mean) / (np - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean, (var / np).sqrt())
    };
    let mut out = EnsembleStats {
        times: marks.iter().map(|&k| k as f64 * cfg.dt).collect(),
        mean_sq: Vec::with_capacity(records),
        se: Vec::with_capacity(records),
        energy_mean: Vec::with_capacity(records),
        energy_se: Vec::with_capacity(records),
        weight_mean: Vec::with_capacity(records),
        weight_se: Vec::with_capacity(records),
        ess: Vec::with_capacity(records),
        max_qv: total.max_qv,
        max_energy_drift: total.max_drift,
        paths: cfg.paths,
    };
    for r in 0..records {
        let (mut m, mut s) = (Vec::with_capacity(shells), Vec::with_capacity(shells));
        for c in 0..shells {
            let (a, b) = stat(total.f[r * cols + c], total.f2[r * cols + c]);
            m.push(a);
            s.push(b);
        }
        out.mean_sq.push(m);
        out.se.push(s);
        let (em, es) = stat(total.f[r * cols + shells], total.f2[r * cols + shells]);
        out.energy_mean.push(em);
        out.energy_se.push(es);
        let (wm, ws) = stat(total.w[r], total.w2[r]);
        out.weight_mean.push(wm);
        out.weight_se.push(ws);
        out.ess.push(if total.w2[r] > 0.0 { total.w[r] * total.w[r] / total.w2[r] } else { 0.0 });
    }
    Ok(out)
}
