use elastica::simulate::{replicate_seed, Generator, ALL_METHODS};
use elastica::{
    elastic_distance, generate_scenario, geodesic_interpolate, polygon_from_points, run_benchmark, srv_transform,
    AlignConfig, FitConfig, Method, Scenario, ScenarioSpec, Templates,
};

fn spec(scenario: Scenario) -> ScenarioSpec<f64> {
    ScenarioSpec::new(scenario)
}

#[test]
fn generation_is_a_function_of_the_seed() {
    for scenario in [Scenario::One, Scenario::Two, Scenario::Three, Scenario::CoefTest] {
        let s = ScenarioSpec { seed: 42, ..spec(scenario) };
        assert_eq!(generate_scenario(&s).unwrap(), generate_scenario(&s).unwrap());
        let other = generate_scenario(&ScenarioSpec { seed: 43, ..s.clone() }).unwrap();
        assert_ne!(generate_scenario(&s).unwrap().train, other.train);
    }
}

#[test]
fn kept_points_respect_the_range() {
    for scenario in [Scenario::One, Scenario::Two, Scenario::Three] {
        let s = ScenarioSpec { kappa_range: (6, 9), seed: 3, ..spec(scenario) };
        let data = generate_scenario(&s).unwrap();
        for c in data.train.curves().iter().chain(data.test.curves()) {
            // closed curves repeat their first point
            let kept = if scenario.is_closed() { c.len() - 1 } else { c.len() };
            assert!((6..=9).contains(&kept), "{scenario:?}: {kept} points");
            assert_eq!(c.is_closed(), scenario.is_closed());
        }
    }
}

#[test]
fn covariates_form_an_equidistant_grid() {
    let data = generate_scenario(&ScenarioSpec { n: 5, ..spec(Scenario::One) }).unwrap();
    let x: Vec<f64> = data.train.covariates().iter().map(|r| r[0]).collect();
    let expected = [-1.0, -0.5, 0.0, 0.5, 1.0];
    assert!(x.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12), "{x:?}");
    assert_eq!(data.test.covariates(), data.train.covariates());
}

#[test]
fn noiseless_curves_lie_on_the_truth() {
    for scenario in [Scenario::One, Scenario::Two] {
        let full = ScenarioSpec { sd: 0.0, kappa_range: (51, 51), seed: 8, ..spec(scenario) };
        let g = Generator::new(full.clone()).unwrap();
        let data = g.generate().unwrap();
        for (c, x) in data.train.curves().iter().zip(data.train.covariates()) {
            let d = elastic_distance(c, &g.truth(x).unwrap(), &AlignConfig::default()).unwrap();
            assert!(d < 1e-4, "{scenario:?} at {x:?}: {d}");
        }
        // subsampled curves keep a subset of the truth's vertices
        let sparse = Generator::new(ScenarioSpec { kappa_range: (15, 20), ..full }).unwrap();
        let data = sparse.generate().unwrap();
        for (c, x) in data.train.curves().iter().zip(data.train.covariates()) {
            let truth = sparse.truth(x).unwrap();
            for l in 0..c.len() {
                let hit = (0..truth.len())
                    .any(|i| truth.point(i).iter().zip(c.point(l)).all(|(a, b)| (a - b).abs() < 1e-12));
                assert!(hit, "{scenario:?}: vertex {l} is not on the truth");
            }
        }
    }
}

#[test]
fn noise_level_matches_the_random_walk() {
    // the SRV walk reaches sd at the end of the curve: E‖W‖² = sd² in the plane
    let sd: f64 = 0.4;
    let mut total = 0.0;
    let mut count = 0.0;
    for seed in 0..3 {
        let s = ScenarioSpec { sd, kappa_range: (51, 51), seed, ..spec(Scenario::One) };
        let g = Generator::new(s).unwrap();
        let data = g.generate().unwrap();
        for (c, x) in data.train.curves().iter().zip(data.train.covariates()) {
            total += elastic_distance(c, &g.truth(x).unwrap(), &AlignConfig::default()).unwrap().powi(2);
            count += 1.0;
        }
    }
    // alignment absorbs part of the noise
    let ratio = total / count / (sd * sd);
    assert!((0.4..1.3).contains(&ratio), "{ratio}");
}

#[test]
fn geodesic_interpolation_hits_both_ends() {
    let a = polygon_from_points(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]], false).unwrap();
    let b = polygon_from_points(&[vec![0.0, 0.0], vec![0.5, 0.8], vec![1.2, 1.5]], false).unwrap();
    let (qa, qb) = (srv_transform(&a), srv_transform(&b));
    assert!(geodesic_interpolate(&a, &b, -1.0).unwrap().l2_distance(&qa) < 1e-12);
    assert!(geodesic_interpolate(&a, &b, 1.0).unwrap().l2_distance(&qb) < 1e-12);
    let mid = geodesic_interpolate(&a, &b, 0.0).unwrap();
    let half: f64 = 0.5 * qa.l2_distance(&qb);
    assert!((mid.l2_distance(&qa) - half).abs() < 1e-12);
    assert!((mid.l2_distance(&qb) - half).abs() < 1e-12);
    assert!(geodesic_interpolate(&a, &b, 1.5).is_err());
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(generate_scenario(&ScenarioSpec { sd: -1.0, ..spec(Scenario::One) }).is_err());
    assert!(generate_scenario(&ScenarioSpec { kappa_range: (9, 5), ..spec(Scenario::One) }).is_err());
    assert!(generate_scenario(&ScenarioSpec { kappa_range: (2, 5), ..spec(Scenario::One) }).is_err());
    assert!(generate_scenario(&ScenarioSpec { n: 1, ..spec(Scenario::One) }).is_err());
    let wrong = ScenarioSpec { templates: Some(Templates::builtin(Scenario::CoefTest)), ..spec(Scenario::One) };
    assert!(generate_scenario(&wrong).is_err());
}

#[test]
fn coefficient_scenario_has_three_covariates() {
    let data = generate_scenario(&spec(Scenario::CoefTest)).unwrap();
    assert_eq!(data.train.num_covariates(), 3);
    assert_eq!(data.train.len(), 30);
    assert_ne!(data.train.covariates(), data.test.covariates());
}

#[test]
fn replicate_seeds_differ() {
    let seeds: std::collections::BTreeSet<u64> = (0..50).map(|r| replicate_seed(7, r)).collect();
    assert_eq!(seeds.len(), 50);
    assert_eq!(replicate_seed(7, 3), replicate_seed(7, 3));
}

#[test]
fn benchmark_table_is_reproducible() {
    let s = ScenarioSpec { n: 5, ..spec(Scenario::One) };
    let config = FitConfig { max_iter: 2, ..Scenario::One.fit_config() };
    let methods = [Method::Quotient, Method::PrealignSrv];
    let a = run_benchmark(&s, &methods, 2, 1, Some(&config)).unwrap();
    let b = run_benchmark(&s, &methods, 2, 1, Some(&config)).unwrap();
    assert_eq!(a.mse, b.mse);
    assert_eq!(a.mse.len(), 2);
    assert!(a.mse.iter().flatten().all(|v| v.is_some_and(|v| v.is_finite() && v >= 0.0)));
    assert!(a.best().is_some());
    assert_eq!(ALL_METHODS.len(), 5);
}
