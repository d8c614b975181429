use approx::assert_relative_eq;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use stochshell::experiment::unit_state;
use stochshell::noise::NoiseSlab;
use stochshell::sde::{simulate_path, ComplexGoy, Integrator};
use stochshell::{
    build_qmatrix, run_ensemble, Boundary, Direction, EnsembleConfig, ModelSpec, NoiseKey, Preset, Scheme, SimError,
    System, TruncatedModel, TruncatedState,
};

fn presets() -> Vec<ModelSpec> {
    [Preset::default_goy(), Preset::default_sabra(), Preset::default_novikov()]
        .iter()
        .map(|p| p.build().unwrap())
        .collect()
}

fn random_state(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn config(shells: usize, dt: f64, horizon: f64, paths: usize) -> EnsembleConfig {
    EnsembleConfig {
        shells,
        dt,
        horizon,
        paths,
        system: System::Linear,
        scheme: Scheme::Em,
        boundary: Boundary::Absorbing,
        seed: 17,
        record_every: (horizon / dt).round() as usize,
        weighting: None,
    }
}

/// Noise term assembled directly from the interaction table.
fn diffusion_oracle(spec: &ModelSpec, shells: usize, x: &[f64], slab: &NoiseSlab) -> Vec<f64> {
    let d = spec.d;
    let mut out = vec![0.0; x.len()];
    for n in 1..=shells as i64 {
        for (i, it) in spec.interactions.iter().enumerate() {
            let src = n + it.r;
            if !spec.is_active(i, n) || src < 1 || src > shells as i64 {
                continue;
            }
            let s = (src - 1) as usize;
            let dw = slab.lookup(i, n + it.h).unwrap();
            let b = it.map.apply(&x[s * d..(s + 1) * d], dw);
            let o = (n - 1) as usize * d;
            for a in 0..d {
                out[o + a] += spec.sigma * spec.k_eff(i, n) * b[a];
            }
        }
    }
    out
}

/// `E|noise term|^2 / dt`, exact: the term is linear in independent
/// `N(0, dt)` entries, so sum the squared responses to unit entries.
fn noise_power(spec: &ModelSpec, model: &TruncatedModel, x: &[f64]) -> f64 {
    let layout = model.layout();
    let mut total = 0.0;
    for &root in &spec.istar {
        for m in layout.lo..=layout.hi {
            for a in 0..spec.d {
                let mut slab = layout.zeros(1.0);
                let mut e = vec![0.0; spec.d];
                e[a] = 1.0;
                slab.set(root, m, &e).unwrap();
                let r = model.diffusion_apply(x, &slab).unwrap();
                total += dot(&r, &r);
            }
        }
    }
    total
}

#[test]
fn diffusion_follows_the_interaction_table() {
    for spec in presets() {
        let shells = 7;
        let model = TruncatedModel::new(&spec, shells, Boundary::Absorbing).unwrap();
        let x = random_state(shells * spec.d, 1);
        let slab = model.layout().sample(1e-3, NoiseKey::new(5, 0, 0));
        let got = model.diffusion_apply(&x, &slab).unwrap();
        let want = diffusion_oracle(&spec, shells, &x, &slab);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-13 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }
}

#[test]
fn ito_balance_closes_on_closed_truncation_and_leaks_escape_rate() {
    for spec in presets() {
        let shells = 6;
        let x = random_state(shells * spec.d, 2);
        let closed = TruncatedModel::new(&spec, shells, Boundary::Closed).unwrap();
        let power = noise_power(&spec, &closed, &x);
        let dissipated = -2.0 * dot(&x, &closed.drift_linear(&x).unwrap());
        assert_relative_eq!(power, dissipated, max_relative = 1e-12);

        let absorbing = TruncatedModel::new(&spec, shells, Boundary::Absorbing).unwrap();
        let dissipated = -2.0 * dot(&x, &absorbing.drift_linear(&x).unwrap());
        let q = build_qmatrix(&spec, shells).unwrap();
        let leak: f64 = (0..shells)
            .map(|n| q.escape[n] * x[n * spec.d..(n + 1) * spec.d].iter().map(|v| v * v).sum::<f64>())
            .sum();
        assert!(leak > 0.0);
        assert_relative_eq!(dissipated - power, leak, max_relative = 1e-10);
    }
}

#[test]
fn nonlinear_drift_is_transport_plus_correction() {
    for spec in presets() {
        let model = TruncatedModel::new(&spec, 9, Boundary::Absorbing).unwrap();
        let x = random_state(9 * spec.d, 3);
        let full = model.drift_nonlinear(&x).unwrap();
        let lin = model.drift_linear(&x).unwrap();
        let b = model.bilinear(&x).unwrap();
        for j in 0..x.len() {
            assert!((full[j] - lin[j] - b[j]).abs() <= 1e-12 * (1.0 + full[j].abs()));
        }
        let zero = vec![0.0; x.len()];
        assert!(model.drift_nonlinear(&zero).unwrap().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn linear_drift_is_minus_half_total_rate() {
    let spec = Preset::default_novikov().build().unwrap();
    let model = TruncatedModel::new(&spec, 5, Boundary::Absorbing).unwrap();
    let rates = model.isotropic_rates().unwrap();
    for n in 1..=5 {
        assert_relative_eq!(rates[n - 1], spec.total_rate(n as i64), max_relative = 1e-14);
    }
    assert_eq!(model.max_rate(), rates.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn conservative_step_keeps_energy() {
    for spec in presets() {
        for system in [System::Linear, System::Nonlinear] {
            let shells = 5;
            let model = TruncatedModel::new(&spec, shells, Boundary::Absorbing).unwrap();
            let x0 = random_state(shells * spec.d, 4);
            let mut state = TruncatedState::new(shells, spec.d, x0).unwrap();
            let e0 = state.energy();
            let dt = 0.05 / model.max_rate();
            let mut integ = Integrator::new(&model);
            let mut slab = model.layout().zeros(dt);
            for k in 0..200 {
                model.layout().refill(&mut slab, dt, NoiseKey::new(1, 0, k));
                integ.step_conservative(&mut state, &slab, system, 0).unwrap();
                assert!((state.energy() / e0 - 1.0).abs() <= 1e-14);
            }
        }
    }
}

#[test]
fn single_path_ensemble_reproduces_path() {
    let spec = Preset::default_goy().build().unwrap();
    let model = TruncatedModel::new(&spec, 5, Boundary::Absorbing).unwrap();
    let x0 = random_state(10, 5);
    let mut cfg = config(5, 1e-7, 1e-4, 1);
    cfg.system = System::Nonlinear;
    let stats = run_ensemble(&spec, &x0, &cfg).unwrap();
    let (end, _) = simulate_path(&model, &x0, &cfg, 0, |_, _, _| {}).unwrap();
    assert_relative_eq!(*stats.times.last().unwrap(), 1e-4, max_relative = 1e-12);
    for n in 1..=5 {
        assert_eq!(stats.mean_sq.last().unwrap()[n - 1], end.shell_sq(n));
    }
    assert_eq!(*stats.energy_mean.last().unwrap(), end.energy());
    assert_eq!(*stats.se.last().unwrap(), vec![0.0; 5]);
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let spec = Preset::default_novikov().build().unwrap();
    let x0 = unit_state(&spec, 5, 1, 1.0);
    let mut cfg = config(5, 1e-4, 0.02, 300);
    cfg.record_every = 50;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&spec, &x0, &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn standard_error_shrinks_with_paths() {
    let spec = Preset::default_novikov().build().unwrap();
    let x0 = unit_state(&spec, 4, 1, 1.0);
    let a = run_ensemble(&spec, &x0, &config(4, 1e-4, 0.05, 1000)).unwrap();
    let b = run_ensemble(&spec, &x0, &config(4, 1e-4, 0.05, 4000)).unwrap();
    let ratio = a.se.last().unwrap()[0] / b.se.last().unwrap()[0];
    assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
}

#[test]
fn settings_errors_are_reported() {
    let spec = Preset::default_novikov().build().unwrap();
    let x0 = unit_state(&spec, 4, 1, 1.0);
    assert!(matches!(run_ensemble(&spec, &x0, &config(4, 0.3, 1.0, 4)), Err(SimError::Setting(_))));
    assert!(run_ensemble(&spec, &x0, &config(4, 1e-3, 0.01, 0)).is_err());
    assert!(matches!(
        run_ensemble(&spec, &x0[..3], &config(4, 1e-3, 0.01, 4)),
        Err(SimError::StateShape { .. })
    ));
}

#[test]
fn stiff_em_fails_loudly_where_exponential_survives() {
    let spec = Preset::default_novikov().build().unwrap();
    let x0 = unit_state(&spec, 15, 1, 1.0);
    let mut cfg = config(15, 1e-4, 0.02, 8);
    match run_ensemble(&spec, &x0, &cfg) {
        Err(SimError::EnsembleFailure { count, first, .. }) => {
            assert!(count > 0);
            assert!(first.shell >= 1 && first.shell <= 15);
        }
        other => panic!("expected a path failure, got {other:?}"),
    }
    cfg.scheme = Scheme::Exponential;
    let st = run_ensemble(&spec, &x0, &cfg).unwrap();
    assert!(st.energy_mean.iter().all(|e| e.is_finite() && *e <= 1.0 + 1e-9));
}

#[test]
fn girsanov_reweighting_matches_direct_simulation() {
    let spec = Preset::default_novikov().build().unwrap();
    let shells = 4;
    let x0 = unit_state(&spec, shells, 1, 1.0);
    let mut direct = config(shells, 1e-4, 0.2, 4000);
    direct.system = System::Nonlinear;
    let mut weighted = direct.clone();
    weighted.system = System::Linear;
    weighted.weighting = Some(Direction::QtoP);
    weighted.seed = 99;
    let p = run_ensemble(&spec, &x0, &direct).unwrap();
    let q = run_ensemble(&spec, &x0, &weighted).unwrap();
    let last = p.times.len() - 1;
    for n in 0..shells {
        let (a, sa) = (p.mean_sq[last][n], p.se[last][n]);
        let (b, sb) = (q.mean_sq[last][n], q.se[last][n]);
        let z = (a - b) / (sa * sa + sb * sb).sqrt();
        assert!(z.abs() < 4.0, "shell {}: {a} vs {b} (z {z})", n + 1);
    }
    assert!(q.ess[last] > 0.0 && q.ess[last] <= 4000.0);
}

#[test]
fn weight_of_a_silent_path_is_trivial() {
    let spec = Preset::default_novikov().build().unwrap();
    let model = TruncatedModel::new(&spec, 4, Boundary::Absorbing).unwrap();
    let mut cfg = config(4, 1e-3, 0.1, 1);
    cfg.weighting = Some(Direction::PtoQ);
    let (_, w) = simulate_path(&model, &[0.0; 4], &cfg, 0, |_, _, _| {}).unwrap();
    assert_eq!((w.z, w.qv, w.density()), (0.0, 0.0, 1.0));
}

#[test]
fn complex_goy_tracks_real_linear_system() {
    let spec = Preset::default_goy().build().unwrap();
    let shells = 6;
    let model = TruncatedModel::new(&spec, shells, Boundary::Absorbing).unwrap();
    let goy = ComplexGoy::new(&spec, shells).unwrap();
    let x0 = random_state(2 * shells, 6);
    let mut u: Vec<Complex64> = x0.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let mut state = TruncatedState::new(shells, 2, x0).unwrap();
    let dt = 0.02 / model.max_rate();
    let mut integ = Integrator::new(&model);
    for k in 0..500 {
        let slab = model.layout().sample(dt, NoiseKey::new(3, 0, k));
        goy.step(&mut u, &goy.increments(&spec, &slab).unwrap(), dt, System::Linear);
        integ.step_em(&mut state, &slab, System::Linear, 0).unwrap();
    }
    for (n, z) in u.iter().enumerate() {
        assert!((z.re - state.x[2 * n]).abs() < 1e-12 && (z.im - state.x[2 * n + 1]).abs() < 1e-12);
    }
    assert!(ComplexGoy::new(&Preset::default_novikov().build().unwrap(), 4).is_err());
}
