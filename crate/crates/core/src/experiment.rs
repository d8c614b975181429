//! Composed experiments: cross-checking the three routes to second moments,
//! dissipation evidence and the decay-constant report.

use serde::{Deserialize, Serialize};

use crate::algebra::ModelSpec;
use crate::chain::{survival_curve, Caps, JumpChain};
use crate::error::{Error, SimError};
use crate::moments::{
    build_qmatrix, decay_constants, geometric_grid, solve_forward, DecayConstants, SolveMode, Threshold,
};
use crate::sde::{run_ensemble, Boundary, Direction, EnsembleConfig, Scheme, System, TruncatedModel};

/// Largest `dt * pi_N` for which plain Euler–Maruyama is chosen automatically.
pub const EM_STIFFNESS_LIMIT: f64 = 0.1;

/// Initial state `sqrt(energy) e_1` placed on `shell`.
pub fn unit_state(spec: &ModelSpec, shells: usize, shell: usize, energy: f64) -> Vec<f64> {
    let mut x = vec![0.0; shells * spec.d];
    if shell >= 1 && shell <= shells {
        x[(shell - 1) * spec.d] = energy.sqrt();
    }
    x
}

fn shell_energies(x: &[f64], shells: usize, d: usize) -> Vec<f64> {
    (0..shells).map(|n| x[n * d..(n + 1) * d].iter().map(|v| v * v).sum()).collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Step index of `t` on a `dt` lattice, if `t` lies on it.
fn lattice_index(t: f64, dt: f64) -> Option<usize> {
    let k = (t / dt).round();
    ((k * dt - t).abs() <= 1e-9 * t.abs().max(dt) && k >= 0.0).then_some(k as usize)
}

/// Scheme picked when none is configured.
pub fn auto_scheme(model: &TruncatedModel, dt: f64) -> Scheme {
    if dt * model.max_rate() <= EM_STIFFNESS_LIMIT {
        Scheme::Em
    } else {
        Scheme::Exponential
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriangulationParams {
    pub shells: usize,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub replicates: usize,
    pub times: Vec<f64>,
    /// Highest shell compared.
    pub max_shell: usize,
    /// `None` selects Euler–Maruyama when `dt * pi_N <= 0.1` and the
    /// exponential scheme otherwise.
    pub scheme: Option<Scheme>,
    pub start_shell: usize,
    pub energy: f64,
    /// Explicit flattened initial state; overrides `start_shell` and `energy`.
    pub x0: Option<Vec<f64>>,
    pub z_limit: f64,
    pub pass_fraction: f64,
}

impl Default for TriangulationParams {
    fn default() -> Self {
        Self {
            shells: 15,
            dt: 1e-4,
            horizon: 1.0,
            paths: 10_000,
            replicates: 10_000,
            times: vec![0.25, 0.5, 1.0],
            max_shell: 10,
            scheme: None,
            start_shell: 1,
            energy: 1.0,
            x0: None,
            z_limit: 3.0,
            pass_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangulationCell {
    pub t: f64,
    pub n: usize,
    pub sde: f64,
    pub sde_se: f64,
    pub ode: f64,
    pub chain: f64,
    pub chain_se: f64,
    pub z_sde_ode: f64,
    pub z_chain_ode: f64,
    pub z_sde_chain: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangulationReport {
    pub scheme: Scheme,
    pub stiffness: f64,
    pub cells: Vec<TriangulationCell>,
    pub passing_cells: usize,
    pub pass_fraction: f64,
    pub passed: bool,
    /// Set when the Monte Carlo route could not produce estimates.
    pub sde_failure: Option<String>,
    pub chain_exploded: usize,
}

fn zscore(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY.copysign(diff)
    }
}

fn binomial_se(p: f64, reps: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / reps.max(1) as f64).sqrt()
}

/// Estimates `E|X_n(t)|^2` of the linear system three ways and compares
/// them pairwise.
pub fn triangulate(spec: &ModelSpec, p: &TriangulationParams, seed: u64) -> Result<TriangulationReport, Error> {
    spec.require_identity_grams()?;
    if p.times.is_empty() || p.max_shell == 0 || p.max_shell > p.shells {
        return Err(Error::Config("need at least one time and 1 <= max_shell <= shells".into()));
    }
    let x0 = match &p.x0 {
        Some(x) => x.clone(),
        None => unit_state(spec, p.shells, p.start_shell, p.energy),
    };
    if x0.len() != p.shells * spec.d {
        return Err(Error::Config(format!(
            "x0 has {} entries, expected {}",
            x0.len(),
            p.shells * spec.d
        )));
    }
    let u0 = shell_energies(&x0, p.shells, spec.d);
    let energy: f64 = u0.iter().sum();

    let mut marks = Vec::with_capacity(p.times.len());
    for &t in &p.times {
        if t > p.horizon {
            return Err(Error::Config(format!("time {t} exceeds the horizon {}", p.horizon)));
        }
        marks.push(lattice_index(t, p.dt).ok_or_else(|| Error::Config(format!("time {t} is not a multiple of dt")))?);
    }
    let model = TruncatedModel::new(spec, p.shells, Boundary::Absorbing)?;
    let scheme = p.scheme.unwrap_or_else(|| auto_scheme(&model, p.dt));
    let total_steps = lattice_index(p.horizon, p.dt)
        .ok_or_else(|| Error::Config("horizon is not a multiple of dt".into()))?;
    let every = marks.iter().fold(total_steps, |g, &k| gcd(g, k)).max(1);
    let cfg = EnsembleConfig {
        shells: p.shells,
        dt: p.dt,
        horizon: p.horizon,
        paths: p.paths,
        system: System::Linear,
        scheme,
        boundary: Boundary::Absorbing,
        seed,
        record_every: every,
        weighting: None,
    };
    let (sde, sde_failure) = match crate::sde::run_ensemble_on(&model, &x0, &cfg) {
        Ok(s) => (Some(s), None),
        Err(e @ SimError::EnsembleFailure { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };

    let q = build_qmatrix(spec, p.shells)?;
    let ode = solve_forward(&q, &u0, &p.times, SolveMode::Spectral)?;

    let chain_occ: Vec<Vec<f64>>;
    let mut chain_exploded = 0;
    if energy > 0.0 {
        let chain = JumpChain::new(spec)?;
        let caps = Caps {
            max_level: p.shells,
            ..Caps::default()
        };
        let start: Vec<f64> = u0.iter().map(|u| u / energy).collect();
        let curve = survival_curve(&chain, &start, &p.times, p.replicates, caps, seed)?;
        chain_exploded = curve.exploded;
        chain_occ = curve.occupancy;
    } else {
        chain_occ = vec![vec![0.0; p.shells]; p.times.len()];
    }

    let mut cells = Vec::new();
    for (j, (&t, &k)) in p.times.iter().zip(&marks).enumerate() {
        let rec = k / every;
        for n in 1..=p.max_shell {
            let ode_v = ode.u[j][n - 1];
            let chain_p = chain_occ[j][n - 1];
            let chain_v = energy * chain_p;
            let chain_se = energy * binomial_se(chain_p, p.replicates);
            let (sde_v, sde_se) = match &sde {
                Some(s) => (s.mean_sq[rec][n - 1], s.se[rec][n - 1]),
                None => (f64::NAN, f64::NAN),
            };
            let p_ode = if energy > 0.0 { ode_v / energy } else { 0.0 };
            let z_sde_ode = zscore(sde_v - ode_v, sde_se);
            let z_chain_ode = zscore(chain_v - ode_v, energy * binomial_se(p_ode, p.replicates));
            let p_mid = if energy > 0.0 { 0.5 * (sde_v / energy + chain_p) } else { 0.0 };
            let combined = (sde_se * sde_se + (energy * binomial_se(p_mid, p.replicates)).powi(2)).sqrt();
            let z_sde_chain = zscore(sde_v - chain_v, combined);
            let pass = [z_sde_ode, z_chain_ode, z_sde_chain]
                .iter()
                .all(|z| z.abs() < p.z_limit);
            cells.push(TriangulationCell {
                t,
                n,
                sde: sde_v,
                sde_se,
                ode: ode_v,
                chain: chain_v,
                chain_se,
                z_sde_ode,
                z_chain_ode,
                z_sde_chain,
                pass,
            });
        }
    }
    let passing = cells.iter().filter(|c| c.pass).count();
    let fraction = passing as f64 / cells.len() as f64;
    Ok(TriangulationReport {
        scheme,
        stiffness: p.dt * model.max_rate(),
        passed: fraction >= p.pass_fraction && sde_failure.is_none(),
        cells,
        passing_cells: passing,
        pass_fraction: fraction,
        sde_failure,
        chain_exploded,
    })
}

/// Least-squares decay rate of `values` over `times >= from`.
pub fn fit_decay_rate(times: &[f64], values: &[f64], from: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= from && **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlParams {
    pub shells: usize,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            shells: 6,
            dt: 1e-5,
            horizon: 0.1,
            paths: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GirsanovParams {
    pub enabled: bool,
    pub shells: usize,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub records: usize,
}

impl Default for GirsanovParams {
    fn default() -> Self {
        Self {
            enabled: true,
            shells: 5,
            dt: 5e-5,
            horizon: 1.0,
            paths: 1000,
            records: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DissipationParams {
    pub shells: Vec<usize>,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub energy: f64,
    pub start_shell: usize,
    /// Truncation used for the decay constants.
    pub constants_shells: usize,
    /// Tail fit uses grid times at or above this fraction of `t_max`.
    pub fit_from: f64,
    /// Grid times from which `mass < 1` is required.
    pub mass_check_from: f64,
    pub control: ControlParams,
    pub girsanov: GirsanovParams,
}

impl Default for DissipationParams {
    fn default() -> Self {
        Self {
            shells: vec![10, 15, 20],
            t_min: 1e-3,
            t_max: 10.0,
            points: 60,
            energy: 1.0,
            start_shell: 1,
            constants_shells: 40,
            fit_from: 0.5,
            mass_check_from: 0.1,
            control: ControlParams::default(),
            girsanov: GirsanovParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassCurve {
    pub shells: usize,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GirsanovDecay {
    pub times: Vec<f64>,
    /// Reweighted estimate of the nonlinear mean energy.
    pub energy: Vec<f64>,
    pub energy_se: Vec<f64>,
    pub weight_mean: f64,
    pub weight_se: f64,
    pub ess: f64,
    pub fitted_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    pub curves: Vec<MassCurve>,
    pub constants: DecayConstants,
    pub fitted_rate: Option<f64>,
    pub bound_rate: f64,
    pub rate_ok: bool,
    pub mass_below_one: bool,
    pub bound_holds: bool,
    pub monotone_in_shells: bool,
    pub control_energy_drift: f64,
    pub control_ok: bool,
    pub rho: f64,
    pub threshold: Option<Threshold>,
    pub girsanov: Option<GirsanovDecay>,
    pub warnings: Vec<String>,
}

impl DissipationReport {
    pub fn passed(&self) -> bool {
        self.rate_ok && self.mass_below_one && self.bound_holds && self.monotone_in_shells && self.control_ok
    }
}

/// Energy-loss evidence from the moment flow plus Monte Carlo controls.
pub fn dissipation(spec: &ModelSpec, p: &DissipationParams, seed: u64) -> Result<DissipationReport, Error> {
    spec.require_identity_grams()?;
    if p.shells.is_empty() || p.points < 2 || !(p.t_min > 0.0 && p.t_max > p.t_min) {
        return Err(Error::Config("dissipation needs shells, >= 2 points and 0 < t_min < t_max".into()));
    }
    let grid = geometric_grid(p.t_min, p.t_max, p.points);
    let mut shells = p.shells.clone();
    shells.sort_unstable();
    let mut curves = Vec::new();
    for &n in &shells {
        let q = build_qmatrix(spec, n)?;
        let mut u0 = vec![0.0; n];
        if p.start_shell >= 1 && p.start_shell <= n {
            u0[p.start_shell - 1] = 1.0;
        }
        let sol = solve_forward(&q, &u0, &grid, SolveMode::Spectral)?;
        curves.push(MassCurve {
            shells: n,
            times: grid.clone(),
            mass: sol.mass,
        });
    }
    let constants = decay_constants(spec, p.energy, p.constants_shells)?;
    let s2 = spec.sigma * spec.sigma;
    let bound_rate = s2 / constants.mu;
    let top = curves.last().expect("non-empty");
    let fitted_rate = fit_decay_rate(&top.times, &top.mass, p.fit_from * p.t_max);
    let rate_ok = fitted_rate.is_some_and(|r| r >= 0.5 * bound_rate);
    let mass_below_one = top
        .times
        .iter()
        .zip(&top.mass)
        .filter(|(t, _)| **t >= p.mass_check_from)
        .all(|(_, m)| *m < 1.0);
    let bound_holds = top
        .times
        .iter()
        .zip(&top.mass)
        .all(|(t, m)| p.energy * m <= constants.c * (-bound_rate * t).exp() * (1.0 + 1e-12));
    let monotone_in_shells = curves.windows(2).all(|w| {
        w[0].mass
            .iter()
            .zip(&w[1].mass)
            .all(|(lo, hi)| *lo <= hi + 1e-12 * hi.abs().max(1e-300))
    });

    let mut warnings = Vec::new();
    if constants.rho >= 1.0 {
        warnings.push(format!(
            "rho = {:.4} >= 1: exponential decay under the original measure is outside the proven regime",
            constants.rho
        ));
    }
    if let Some(Threshold::Undefined { radicand }) = constants.threshold {
        warnings.push(format!("smallness threshold undefined: a^2 - c^2/lambda^2 = {radicand:.4} <= 0"));
    }

    let c = &p.control;
    let control_cfg = EnsembleConfig {
        shells: c.shells,
        dt: c.dt,
        horizon: c.horizon,
        paths: c.paths,
        system: System::Nonlinear,
        scheme: Scheme::Conservative,
        boundary: Boundary::Absorbing,
        seed,
        record_every: lattice_index(c.horizon, c.dt).unwrap_or(1).max(1),
        weighting: None,
    };
    let x_control = unit_state(spec, c.shells, p.start_shell, p.energy);
    let control = run_ensemble(spec, &x_control, &control_cfg)?;
    let control_energy_drift = control.max_energy_drift;

    let girsanov = if p.girsanov.enabled && constants.rho < 1.0 {
        let g = &p.girsanov;
        let steps = lattice_index(g.horizon, g.dt)
            .ok_or_else(|| Error::Config("girsanov horizon is not a multiple of dt".into()))?;
        let cfg = EnsembleConfig {
            shells: g.shells,
            dt: g.dt,
            horizon: g.horizon,
            paths: g.paths,
            system: System::Linear,
            scheme: Scheme::Em,
            boundary: Boundary::Absorbing,
            seed: seed.wrapping_add(1),
            record_every: (steps / g.records.max(1)).max(1),
            weighting: Some(Direction::QtoP),
        };
        let x0 = unit_state(spec, g.shells, p.start_shell, p.energy);
        let st = run_ensemble(spec, &x0, &cfg)?;
        let last = st.times.len() - 1;
        Some(GirsanovDecay {
            fitted_rate: fit_decay_rate(&st.times, &st.energy_mean, 0.5 * g.horizon),
            times: st.times,
            energy: st.energy_mean,
            energy_se: st.energy_se,
            weight_mean: st.weight_mean[last],
            weight_se: st.weight_se[last],
            ess: st.ess[last],
        })
    } else {
        None
    };

    Ok(DissipationReport {
        rho: constants.rho,
        threshold: constants.threshold,
        curves,
        fitted_rate,
        bound_rate,
        rate_ok,
        mass_below_one,
        bound_holds,
        monotone_in_shells,
        control_ok: control_energy_drift <= 1e-12,
        control_energy_drift,
        constants,
        girsanov,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    #[serde(flatten)]
    pub constants: DecayConstants,
    pub mu_at_double_sigma: f64,
    pub sigma_invariance: f64,
    /// `|theta_max mu |x|^2 / sigma^2 - 1|`.
    pub identity_residual: f64,
}

/// Decay constants plus a recomputation at `2 sigma`.
pub fn constants_report(spec: &ModelSpec, energy: f64, shells: usize) -> Result<ConstantsReport, Error> {
    let constants = decay_constants(spec, energy, shells)?;
    let doubled = decay_constants(&spec.with_sigma(2.0 * spec.sigma), energy, shells)?;
    let s2 = spec.sigma * spec.sigma;
    Ok(ConstantsReport {
        mu_at_double_sigma: doubled.mu,
        sigma_invariance: (doubled.mu - constants.mu).abs() / constants.mu,
        identity_residual: (constants.theta_max * constants.mu * energy / s2 - 1.0).abs(),
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::build_novikov;

    #[test]
    fn decay_fit_recovers_rate() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.5 * t).exp()).collect();
        assert!((fit_decay_rate(&t, &v, 0.0).unwrap() - 2.5).abs() < 1e-12);
        assert!(fit_decay_rate(&t[..1], &v[..1], 0.0).is_none());
    }

    #[test]
    fn lattice_and_gcd() {
        assert_eq!(lattice_index(0.25, 1e-4), Some(2500));
        assert_eq!(lattice_index(0.25005, 1e-4), None);
        assert_eq!(gcd(2500, 10000), 2500);
    }

    #[test]
    fn zero_initial_condition_is_zero_everywhere() {
        let s = build_novikov(2.0, 1.0).unwrap();
        let p = TriangulationParams {
            shells: 4,
            dt: 1e-3,
            horizon: 0.1,
            paths: 8,
            replicates: 8,
            times: vec![0.05, 0.1],
            max_shell: 4,
            x0: Some(vec![0.0; 4]),
            ..TriangulationParams::default()
        };
        let r = triangulate(&s, &p, 3).unwrap();
        assert!(r.passed);
        assert!(r.cells.iter().all(|c| c.sde == 0.0 && c.ode == 0.0 && c.chain == 0.0));
    }

    #[test]
    fn constants_identity() {
        let s = build_novikov(2.0, 1.0).unwrap();
        let r = constants_report(&s, 4.0, 30).unwrap();
        assert!(r.identity_residual < 1e-12);
        assert!(r.sigma_invariance < 1e-10);
        let half = constants_report(&s, 1.0, 30).unwrap();
        assert!((r.constants.rho / half.constants.rho - 2.0).abs() < 1e-12);
    }
}
