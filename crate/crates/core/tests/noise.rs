use stochshell::noise::{goy_noise_bridge, goy_noise_complement, BridgeVariant, SlabLayout, DEFAULT_MAX_SHELLS};
use stochshell::{sample_slab, NoiseKey, Preset};

const DRAWS: u64 = 20_000;

fn within(est: f64, target: f64, se: f64, k: f64) -> bool {
    (est - target).abs() <= k * se
}

#[test]
fn increments_have_brownian_moments() {
    let spec = Preset::default_goy().build().unwrap();
    let layout = SlabLayout::new(&spec, 5, DEFAULT_MAX_SHELLS).unwrap();
    let dt = 0.01;
    let len = layout.len();
    let mut sum = vec![0.0; len];
    let mut sq = vec![0.0; len];
    let mut cross = 0.0;
    let mut lag = 0.0;
    let mut prev = layout.sample(dt, NoiseKey::new(1, 0, 0));
    for step in 1..=DRAWS {
        let slab = layout.sample(dt, NoiseKey::new(1, 0, step));
        let v = slab.values();
        for j in 0..len {
            sum[j] += v[j];
            sq[j] += v[j] * v[j];
        }
        cross += v[0] * v[1];
        lag += v[0] * prev.values()[0];
        prev = slab;
    }
    let n = DRAWS as f64;
    let mean_se = (dt / n).sqrt();
    let var_se = dt * (2.0 / n).sqrt();
    let prod_se = dt / n.sqrt();
    let mean_ok = sum.iter().filter(|s| within(*s / n, 0.0, mean_se, 5.0)).count();
    let var_ok = sq.iter().filter(|s| within(*s / n, dt, var_se, 5.0)).count();
    assert_eq!(mean_ok, len);
    assert_eq!(var_ok, len);
    assert!(within(cross / n, 0.0, prod_se, 5.0));
    assert!(within(lag / n, 0.0, prod_se, 5.0));
}

#[test]
fn keys_select_distinct_reproducible_streams() {
    let spec = Preset::default_novikov().build().unwrap();
    let a = sample_slab(&spec, 6, 0.1, NoiseKey::new(4, 2, 9)).unwrap();
    assert_eq!(a, sample_slab(&spec, 6, 0.1, NoiseKey::new(4, 2, 9)).unwrap());
    for key in [NoiseKey::new(5, 2, 9), NoiseKey::new(4, 3, 9), NoiseKey::new(4, 2, 10)] {
        assert_ne!(a.values(), sample_slab(&spec, 6, 0.1, key).unwrap().values());
    }
}

#[test]
fn partners_share_their_owner_increment() {
    for preset in [Preset::default_goy(), Preset::default_sabra(), Preset::default_novikov()] {
        let spec = preset.build().unwrap();
        let slab = sample_slab(&spec, 7, 0.02, NoiseKey::new(8, 1, 1)).unwrap();
        let (lo, hi) = (slab.layout().lo, slab.layout().hi);
        for i in 0..spec.len() {
            for m in lo..=hi {
                assert_eq!(slab.lookup(i, m).unwrap(), slab.lookup(spec.pairing[i], m).unwrap());
            }
            assert!(slab.lookup(i, hi + 1).is_err());
            assert!(slab.lookup(i, lo - 1).is_err());
        }
    }
}

#[test]
fn complex_bridge_has_unit_rate_and_is_orthogonal() {
    let spec = Preset::default_goy().build().unwrap();
    let (a, c, lambda) = (1.0, 0.5, 2.0);
    let share = a * a / (a * a + c * c / (lambda * lambda));
    let dt = 0.05;
    let mut full = [0.0; 3];
    let mut active1 = 0.0;
    let mut cross = 0.0;
    for step in 0..DRAWS {
        let slab = sample_slab(&spec, 4, dt, NoiseKey::new(2, 0, step)).unwrap();
        for n in 1..=3 {
            full[n - 1] += goy_noise_bridge(&spec, &slab, n as i64, BridgeVariant::Full).unwrap().norm_sqr();
        }
        active1 += goy_noise_bridge(&spec, &slab, 1, BridgeVariant::Active).unwrap().norm_sqr();
        let b = goy_noise_bridge(&spec, &slab, 2, BridgeVariant::Full).unwrap();
        let o = goy_noise_complement(&spec, &slab, 2).unwrap();
        cross += (b * o.conj()).re;
    }
    let n = DRAWS as f64;
    let se = 2.0 * dt / n.sqrt();
    for f in full {
        assert!(within(f / n, 2.0 * dt, se, 5.0), "{}", f / n);
    }
    assert!(within(active1 / n, 2.0 * dt * share, se, 5.0));
    assert!(within(cross / n, 0.0, se, 5.0));
}

#[test]
fn bridge_without_c_reads_one_family() {
    let spec = stochshell::build_goy(1.0, -1.0, 0.0, 2.0, 1.0).unwrap();
    let slab = sample_slab(&spec, 4, 0.01, NoiseKey::new(3, 3, 3)).unwrap();
    for n in 1..=3 {
        let w = slab.lookup(0, n + 2).unwrap();
        let b = goy_noise_bridge(&spec, &slab, n, BridgeVariant::Full).unwrap();
        assert_eq!((b.re, b.im), (w[0], -w[1]));
    }
}

#[test]
fn non_goy_models_have_no_bridge() {
    let spec = Preset::default_novikov().build().unwrap();
    let slab = sample_slab(&spec, 4, 0.01, NoiseKey::new(0, 0, 0)).unwrap();
    assert!(goy_noise_bridge(&spec, &slab, 2, BridgeVariant::Full).is_err());
}
