use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use stochshell::algebra::{embed_complex, lift_real, Requirement};
use stochshell::{
    build_goy, build_novikov, build_sabra, ito_correction, validate_model, BilinearMap, Boundary, ModelSpec, Preset,
    TruncatedModel,
};

fn goy_family() -> impl Strategy<Value = ModelSpec> {
    (0.2..3.0f64, -2.0..2.0f64, 1.2..4.0f64, 0.1..2.0f64).prop_filter_map("degenerate", |(a, c, lambda, st)| {
        build_goy(a, -a - c, c, lambda, st).ok()
    })
}

fn sabra_family() -> impl Strategy<Value = ModelSpec> {
    (0.2..3.0f64, 0.05..2.0f64, 1.2..4.0f64, 0.1..2.0f64).prop_filter_map("degenerate", |(a, c, lambda, s1)| {
        build_sabra(a, -a - c, c, lambda, s1, s1 * c / (lambda * a)).ok()
    })
}

fn pairing(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

proptest! {
    #[test]
    fn goy_family_validates_and_cancels(spec in goy_family(), seed in any::<u64>()) {
        prop_assert!(validate_model(&spec).unwrap().accepted());
        let model = TruncatedModel::new(&spec, 8, Boundary::Absorbing).unwrap();
        let x: Vec<f64> = (0..16).map(|j| ((seed.wrapping_mul(j as u64 + 1) % 1000) as f64 / 500.0) - 1.0).collect();
        let b = model.bilinear(&x).unwrap();
        let scale: f64 = b.iter().map(|v| v.abs()).sum::<f64>() * x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!(pairing(&x, &b).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn sabra_family_validates(spec in sabra_family()) {
        prop_assert!(validate_model(&spec).unwrap().accepted());
    }

    #[test]
    fn novikov_first_shell_correction(lambda in 1.1..5.0f64, sigma in 0.1..3.0f64) {
        let spec = build_novikov(lambda, sigma).unwrap();
        assert_relative_eq!(ito_correction(&spec, 1)[0], -0.5 * sigma * sigma * lambda * lambda, max_relative = 1e-13);
    }

    #[test]
    fn bilinear_maps_are_bilinear(
        u in prop::collection::vec(-2.0..2.0f64, 2),
        v in prop::collection::vec(-2.0..2.0f64, 2),
        w in prop::collection::vec(-2.0..2.0f64, 2),
        s in -3.0..3.0f64,
    ) {
        let b = Preset::default_goy().build().unwrap().interactions[0].map.clone();
        let mix: Vec<f64> = u.iter().zip(&w).map(|(a, c)| s * a + c).collect();
        let lhs = b.apply(&mix, &v);
        let (bu, bw) = (b.apply(&u, &v), b.apply(&w, &v));
        for k in 0..2 {
            prop_assert!((lhs[k] - (s * bu[k] + bw[k])).abs() <= 1e-12 * (1.0 + lhs[k].abs()));
        }
        let rhs = b.apply(&v, &mix);
        let (cu, cw) = (b.apply(&v, &u), b.apply(&v, &w));
        for k in 0..2 {
            prop_assert!((rhs[k] - (s * cu[k] + cw[k])).abs() <= 1e-12 * (1.0 + rhs[k].abs()));
        }
    }

    #[test]
    fn complex_embedding_roundtrips(re in prop::collection::vec(-5.0..5.0f64, 4), im in prop::collection::vec(-5.0..5.0f64, 4)) {
        let u: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        prop_assert_eq!(lift_real(&embed_complex(&u)), u);
    }
}

#[test]
fn goy_default_coefficients() {
    let spec = build_goy(1.0, -1.5, 0.5, 2.0, 1.0).unwrap();
    let k: Vec<f64> = spec.interactions.iter().map(|i| i.k).collect();
    assert_relative_eq!(k[0], 2f64.sqrt(), max_relative = 1e-15);
    assert_relative_eq!(k[1], 2f64.sqrt() * 0.125, max_relative = 1e-15);
    assert_relative_eq!(spec.sigma, 1.0 / 1.0625f64.sqrt(), max_relative = 1e-15);
    assert_eq!(spec.d, 2);
    for it in &spec.interactions {
        assert!(it.map.gram_is_identity(1e-12));
    }
}

#[test]
fn degenerate_and_mismatched_parameters_rejected() {
    assert!(build_goy(0.0, 0.0, 0.0, 2.0, 1.0).is_err());
    assert!(build_goy(1.0, -1.0, 0.0, 1.0, 1.0).is_err());
    assert!(build_sabra(1.0, -1.25, 0.25, 2.0, 1.0, 0.1375).is_err());
    assert!(build_novikov(2.0, 0.0).is_err() || !validate_model(&build_novikov(2.0, 0.0).unwrap()).unwrap().accepted());
}

#[test]
fn self_interaction_cites_requirement_two() {
    let mut spec = build_novikov(2.0, 1.0).unwrap();
    spec.interactions[1].r = 0;
    let report = validate_model(&spec).unwrap();
    assert!(report.failures().contains(&Requirement::NoSelfInteraction));
    assert!(report.to_string().contains("(ii)"));
}

#[test]
fn single_coefficient_change_breaks_only_cancellation() {
    for preset in [Preset::default_goy(), Preset::default_sabra(), Preset::default_novikov()] {
        let spec = preset.build().unwrap();
        for i in 0..spec.len() {
            let mut s = spec.clone();
            s.interactions[i].k *= 1.0 + 1e-6;
            let report = validate_model(&s).unwrap();
            assert_eq!(report.failures(), vec![Requirement::CoefficientCancellation], "{} #{i}", preset.name());
        }
    }
}

#[test]
fn partner_coefficients_cancel_across_the_hop() {
    for preset in [Preset::default_goy(), Preset::default_sabra(), Preset::default_novikov()] {
        let spec = preset.build().unwrap();
        for i in 0..spec.len() {
            let j = spec.pairing[i];
            assert_eq!(spec.pairing[j], i);
            let it = &spec.interactions[i];
            assert_eq!(spec.interactions[j].r, -it.r);
            for n in 1..20 {
                if spec.is_active(i, n) {
                    assert_relative_eq!(spec.k_eff(j, n + it.r), -spec.k_eff(i, n), max_relative = 1e-13);
                }
            }
        }
    }
}

#[test]
fn alias_mismatch_detected() {
    let mut spec = Preset::default_goy().build().unwrap();
    let map = &spec.interactions[1].map;
    let mut entries = map.entries().to_vec();
    let j = entries.iter().position(|v| *v != 0.0).unwrap();
    entries[j] = -entries[j];
    spec.interactions[1].map = BilinearMap::new(2, entries).unwrap();
    let report = validate_model(&spec).unwrap();
    assert!(report.failures().contains(&Requirement::BilinearAlias));
}

#[test]
fn goy_correction_matches_closed_form() {
    let spec = build_goy(1.0, -1.5, 0.5, 2.0, 1.0).unwrap();
    for n in 3..10 {
        let expect = -0.5 * spec.sigma.powi(2) * 2.0 * 1.0625 * 1.25 * 4f64.powi(n);
        let m = ito_correction(&spec, n as i64);
        assert_relative_eq!(m[0], expect, max_relative = 1e-13);
        assert_relative_eq!(m[3], expect, max_relative = 1e-13);
        assert_eq!(m[1], 0.0);
        assert_eq!(m[2], 0.0);
    }
}

#[test]
fn goy_product_is_rescaled_bilinear_map() {
    let b = Preset::default_goy().build().unwrap().interactions[0].map.clone();
    assert_eq!(embed_complex(&[Complex64::new(1.0, 2.0)]), vec![[1.0, 2.0]]);
    let v = Complex64::new(0.7, -0.2);
    let z = Complex64::new(-1.3, 0.9);
    let prod = Complex64::i() * v.conj() * z.conj();
    let got = b.apply(&[v.re, v.im], &[z.re, z.im]);
    assert_relative_eq!(prod.re, 2f64.sqrt() * got[0], max_relative = 1e-14);
    assert_relative_eq!(prod.im, 2f64.sqrt() * got[1], max_relative = 1e-14);
}
