use elastica::inference::{coef_regions_from, quantile_type7};
use elastica::{
    adjusted_r2, bootstrap, bootstrap_with, coef_confidence_regions, distance_confidence_region, elastic_mean_model,
    fit_quotient, frechet_r2, generate_scenario, model_r2, oob_model_comparison, permutation_test_global, AlignConfig,
    BootstrapOptions, Dataset64, ElasticError, FitConfig, Scenario, ScenarioSpec, SplineBasis,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn small_data(n: usize, seed: u64) -> Dataset64 {
    generate_scenario(&ScenarioSpec { n, seed, kappa_range: (8, 10), ..ScenarioSpec::new(Scenario::One) }).unwrap().train
}

fn fast() -> FitConfig {
    FitConfig {
        max_iter: 2,
        basis: SplineBasis::new(1, 5, false).unwrap(),
        align: AlignConfig { grid_size: 30, ..AlignConfig::default() },
        target_points: 41,
        ..FitConfig::default()
    }
}

#[test]
fn type7_quantile_matches_hand_values() {
    let v = [1.0, 2.0, 3.0, 4.0, 10.0];
    assert_eq!(quantile_type7(&v, 0.0), 1.0);
    assert_eq!(quantile_type7(&v, 1.0), 10.0);
    // h = 4 · 0.3 = 1.2 → 2 + 0.2 · (3 − 2)
    assert!((quantile_type7(&v, 0.3) - 2.2).abs() < 1e-12);
    // h = 3.6 → 4 + 0.6 · 6
    assert!((quantile_type7(&v, 0.9) - 7.6).abs() < 1e-12);
    assert!(quantile_type7(&[], 0.5).is_nan());
}

#[test]
fn adjusted_r2_penalizes_covariates() {
    assert!((adjusted_r2(0.5, 11, 1).unwrap() - (1.0 - 0.5 * 10.0 / 9.0)).abs() < 1e-12);
    assert!(matches!(adjusted_r2(0.5, 3, 2), Err(ElasticError::DegreesOfFreedom { n: 3, k: 2 })));
}

#[test]
fn mean_model_explains_nothing() {
    let data = small_data(6, 1);
    let config = fast();
    let curves_only = Dataset64::unconditional(data.curves().to_vec()).unwrap();
    let mean = elastic_mean_model(data.curves(), &config).unwrap();
    assert_eq!(model_r2(&mean, &curves_only, &config).unwrap(), 0.0);
    let full = fit_quotient(&data, &config).unwrap();
    assert!(model_r2(&full, &data, &config).unwrap() <= 1.0);
}

#[test]
fn perfect_predictions_explain_everything() {
    let data = small_data(5, 2);
    let config = fast();
    let mean = elastica::elastic_mean(data.curves(), &config).unwrap();
    let r2 = frechet_r2(data.curves(), data.curves(), &mean, &config).unwrap();
    assert!((r2 - 1.0).abs() < 1e-9, "{r2}");
}

#[test]
fn bootstrap_is_reproducible_and_tracks_out_of_bag_rows() {
    let data = small_data(8, 3);
    let config = fast();
    let x = vec![vec![0.0]];
    let a = bootstrap(&data, &config, 6, &x, 11).unwrap();
    let b = bootstrap(&data, &config, 6, &x, 11).unwrap();
    assert_eq!(a, b);
    let c = bootstrap(&data, &config, 6, &x, 12).unwrap();
    assert_ne!(a.iter().map(|s| &s.indices).collect::<Vec<_>>(), c.iter().map(|s| &s.indices).collect::<Vec<_>>());
    for s in &a {
        assert_eq!(s.indices.len(), data.len());
        for i in 0..data.len() {
            assert_eq!(s.out_of_bag.contains(&i), !s.indices.contains(&i));
        }
        assert_eq!(s.predictions.len(), 1);
    }
}

#[test]
fn out_of_bag_share_is_about_a_third() {
    let n = 30;
    let data = small_data(n, 4);
    let config = FitConfig { max_iter: 1, ..fast() };
    let samples = bootstrap(&data, &config, 60, &[], 5).unwrap();
    let share = samples.iter().map(|s| s.out_of_bag.len() as f64 / n as f64).sum::<f64>() / samples.len() as f64;
    let expected = (1.0 - 1.0 / n as f64).powi(n as i32);
    assert!((share - expected).abs() < 0.03, "{share} vs {expected}");
}

#[test]
fn warm_started_bootstrap_runs() {
    let data = small_data(6, 6);
    let options = BootstrapOptions { replicates: 3, seed: 1, warm_start: true };
    let samples = bootstrap_with(&data, &fast(), &[vec![0.5]], &options).unwrap();
    assert_eq!(samples.len(), 3);
}

#[test]
fn distance_region_keeps_the_closest_share() {
    let data = small_data(6, 7);
    let config = fast();
    let samples = bootstrap(&data, &config, 10, &[vec![0.0]], 3).unwrap();
    let region = distance_confidence_region(&samples, &[0.0], 0.2, &config).unwrap();
    assert_eq!(region.curves.len(), 8);
    assert!(region.distances.windows(2).all(|w| w[0] <= w[1]));
    let mut members = region.members.clone();
    members.sort_unstable();
    members.dedup();
    assert_eq!(members.len(), 8);
    assert!(distance_confidence_region(&samples, &[0.0], 0.0, &config).is_err());
    assert!(distance_confidence_region(&samples, &[0.0], 1.0, &config).is_err());
    assert!(distance_confidence_region(&samples[..0], &[0.0], 0.1, &config).is_err());
}

#[test]
fn coefficient_regions_from_bootstrap_samples() {
    let data = small_data(8, 8);
    let config = fast();
    let samples = bootstrap(&data, &config, 12, &[], 2).unwrap();
    let inf = coef_confidence_regions(&samples, 0.1).unwrap();
    assert_eq!(inf.ellipses.len(), 2 * config.basis.size());
    assert_eq!(inf.effect_rejected.len(), 2);
    for e in &inf.ellipses {
        assert!(e.joint_radius >= e.radius);
        assert!(e.contains(&e.center));
    }
}

fn gaussian_draws(n: usize, mean: [f64; 2], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            vec![mean[0] + a, mean[1] + 0.5 * a + 0.3 * b]
        })
        .collect()
}

#[test]
fn ellipses_cover_their_share_of_draws() {
    let draws = gaussian_draws(400, [0.0, 0.0], 1);
    let refs: Vec<&[f64]> = draws.iter().map(|d| d.as_slice()).collect();
    let inf = coef_regions_from(&refs, 1, 1, 2, 0.1).unwrap();
    let e = inf.ellipse(0, 0);
    let inside = draws.iter().filter(|d| e.contains(d)).count() as f64 / draws.len() as f64;
    assert!((inside - 0.9).abs() <= 1.0 / draws.len() as f64 + 1e-12, "{inside}");
    assert!(!inf.coef_rejected[0]);
}

#[test]
fn distant_effects_are_rejected() {
    let draws = gaussian_draws(200, [8.0, -5.0], 2);
    let refs: Vec<&[f64]> = draws.iter().map(|d| d.as_slice()).collect();
    let inf = coef_regions_from(&refs, 1, 1, 2, 0.05).unwrap();
    assert!(inf.coef_rejected[0] && inf.effect_rejected[0]);
    assert!(!inf.high_dispersion);
}

#[test]
fn constant_draws_are_regularized() {
    let draws = vec![vec![1.0, 2.0]; 60];
    let refs: Vec<&[f64]> = draws.iter().map(|d| d.as_slice()).collect();
    let inf = coef_regions_from(&refs, 1, 1, 2, 0.05).unwrap();
    let e = inf.ellipse(0, 0);
    assert!(e.regularized);
    assert!(e.statistic(&[1.0, 2.0]).is_finite());
    assert!(inf.coef_rejected[0]);
}

#[test]
fn wide_intercepts_flag_high_dispersion() {
    let draws = gaussian_draws(100, [0.1, 0.1], 3);
    let refs: Vec<&[f64]> = draws.iter().map(|d| d.as_slice()).collect();
    assert!(coef_regions_from(&refs, 1, 1, 2, 0.05).unwrap().high_dispersion);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn type7_quantile_is_monotone_and_bounded(
        mut v in prop::collection::vec(-100.0..100.0f64, 1..30),
        p in 0.0..1.0f64,
        q in 0.0..1.0f64,
    ) {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let (a, b) = (quantile_type7(&v, lo), quantile_type7(&v, hi));
        prop_assert!(a <= b);
        prop_assert!(a >= v[0] && b <= v[v.len() - 1]);
    }

    // the studentized statistic does not depend on the coordinate system
    #[test]
    fn ellipse_statistic_is_affine_invariant(
        seed in 0u64..1000,
        m in (0.5..2.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.5..2.0f64),
        shift in (-3.0..3.0f64, -3.0..3.0f64),
        probe in (-3.0..3.0f64, -3.0..3.0f64),
    ) {
        let draws = gaussian_draws(80, [0.5, -0.5], seed);
        let map = |v: &[f64]| vec![m.0 * v[0] + m.1 * v[1] + shift.0, m.2 * v[0] + m.3 * v[1] + shift.1];
        let moved: Vec<Vec<f64>> = draws.iter().map(|d| map(d)).collect();
        let r1: Vec<&[f64]> = draws.iter().map(|d| d.as_slice()).collect();
        let r2: Vec<&[f64]> = moved.iter().map(|d| d.as_slice()).collect();
        let e1 = coef_regions_from(&r1, 1, 1, 2, 0.05).unwrap().ellipses.remove(0);
        let e2 = coef_regions_from(&r2, 1, 1, 2, 0.05).unwrap().ellipses.remove(0);
        let p = [probe.0, probe.1];
        let (s1, s2) = (e1.statistic(&p), e2.statistic(&map(&p)));
        prop_assert!((s1 - s2).abs() < 1e-7 * (1.0 + s1), "{} vs {}", s1, s2);
        prop_assert!((e1.radius - e2.radius).abs() < 1e-7 * (1.0 + e1.radius));
    }
}

#[test]
fn permutation_test_respects_its_floor() {
    let data = small_data(6, 9);
    let config = FitConfig { max_iter: 1, ..fast() };
    assert!(permutation_test_global(&data, &config, 50, 1).is_err());
    let res = permutation_test_global(&data, &config, 99, 1).unwrap();
    assert_eq!(res.permuted.len(), 99);
    assert!(res.p_value >= 0.01 && res.p_value <= 1.0);
    let again = permutation_test_global(&data, &config, 99, 1).unwrap();
    assert_eq!(res, again);
}

#[test]
fn oob_comparison_accounts_for_every_replicate() {
    let data = small_data(8, 10);
    let config = FitConfig { max_iter: 1, ..fast() };
    let res = oob_model_comparison(&data, &config, &[vec![]], 8, 4).unwrap();
    assert_eq!(res.len(), 1);
    assert_eq!(res[0].replicates + res[0].skipped, 8);
    assert!(res[0].mean_delta_mse.is_finite());
    assert!((0.0..=1.0).contains(&res[0].increase_fraction));
    assert!(oob_model_comparison(&data, &config, &[vec![3]], 8, 4).is_err());
}
