use elastica::{
    align_to_target, brute_force_distance, elastic_distance, polygon_from_points, srv_transform, AlignConfig, Curve64,
    SplineBasis, SrvFunction64, Warping64,
};
use proptest::prelude::*;

/// A unit vertical segment against the linear SRV `t ↦ (1, 1 + 2t)`.
fn segment_and_ramp() -> (Curve64, SrvFunction64) {
    let segment = polygon_from_points(&[vec![0.0, 0.0], vec![0.0, 1.0]], false).unwrap();
    let basis = SplineBasis::new(1, 2, false).unwrap();
    let ramp = SrvFunction64::spline(basis, vec![1.0, 1.0, 1.0, 3.0], 2).unwrap();
    (segment, ramp)
}

// The warped segment has SRV (0, √γ'), so the inner product with the ramp is
// ∫ √γ'·(1 + 2t); Cauchy–Schwarz under ∫γ' = 1 gives √γ' ∝ 1 + 2t.
fn optimal_warp(t: f64) -> f64 {
    ((2.0 * t + 1.0).powi(3) - 1.0) / 26.0
}

fn optimal_residual() -> f64 {
    let ramp_sq = 1.0 + 13.0 / 3.0;
    (1.0 + ramp_sq - 2.0 * (13.0f64 / 3.0).sqrt()).sqrt()
}

#[test]
fn segment_warps_to_closed_form_optimum() {
    let (segment, ramp) = segment_and_ramp();
    let res = align_to_target(&segment, &ramp, &AlignConfig::default()).unwrap();
    let sup = res.warping.sup_distance(optimal_warp, 1001);
    assert!(sup < 1e-4, "sup {sup}, residual {}", res.residual);
    // piecewise-linear warps on the 200-point lattice cost O(1e-6)
    assert!((res.residual - optimal_residual()).abs() < 1e-5, "{} vs {}", res.residual, optimal_residual());
}

#[test]
fn quadratic_warp_is_not_optimal_for_the_ramp() {
    let (segment, ramp) = segment_and_ramp();
    let quadratic = Warping64::from_fn(400, |t| 0.5 * t * t + 0.5 * t).unwrap();
    let warped = srv_transform(&segment).warp(&quadratic).unwrap();
    let residual = warped.l2_distance(&ramp);
    assert!(residual > optimal_residual() + 1e-2, "{residual}");
}

#[test]
fn distance_to_self_vanishes() {
    let c = polygon_from_points(&[vec![0.0, 0.0], vec![1.0, 0.2], vec![1.3, 1.1], vec![0.2, 2.0]], false).unwrap();
    assert!(elastic_distance(&c, &c, &AlignConfig::default()).unwrap() < 1e-10);
}

#[test]
fn closed_curves_keep_their_start() {
    let square = polygon_from_points(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]], true).unwrap();
    assert!(square.is_closed());
    assert_eq!(square.point(0), square.point(square.len() - 1));
    assert!(elastic_distance(&square, &square, &AlignConfig::default()).unwrap() < 1e-10);
}

#[test]
fn brute_force_rejects_large_lattices() {
    let (segment, _) = segment_and_ramp();
    assert!(brute_force_distance(&segment, &segment, 61).is_err());
}

fn polygon() -> impl Strategy<Value = Curve64> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 5..=10)
        .prop_filter_map("degenerate", |pts| {
            let rows: Vec<Vec<f64>> = pts.into_iter().map(|(x, y)| vec![x, y]).collect();
            polygon_from_points(&rows, false).ok().filter(|c| c.length() > 0.5)
        })
}

fn warp() -> impl Strategy<Value = Warping64> {
    (0.2..5.0f64, 0.0..1.0f64).prop_map(|(power, mix)| {
        Warping64::from_fn(50, move |t| mix * t.powf(power) + (1.0 - mix) * t).unwrap()
    })
}

fn rotate(c: &Curve64, angle: f64) -> Curve64 {
    let (s, co) = angle.sin_cos();
    let pts: Vec<f64> = c.points().chunks(2).flat_map(|p| [co * p[0] - s * p[1], s * p[0] + co * p[1]]).collect();
    Curve64::with_times(&pts, c.times(), 2, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn distance_is_symmetric_and_nonnegative(a in polygon(), b in polygon()) {
        let cfg = AlignConfig::default();
        let ab = elastic_distance(&a, &b, &cfg).unwrap();
        let ba = elastic_distance(&b, &a, &cfg).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-4 * (1.0 + ab));
    }

    #[test]
    fn distance_ignores_reparametrization(a in polygon(), b in polygon(), w in warp()) {
        let cfg = AlignConfig::default();
        let d = elastic_distance(&a, &b, &cfg).unwrap();
        let dw = elastic_distance(&a.apply_warping(&w), &b, &cfg).unwrap();
        prop_assert!((d - dw).abs() < 5e-3, "{} vs {}", d, dw);
    }

    #[test]
    fn distance_is_rigid_motion_invariant(a in polygon(), b in polygon(), angle in -3.0..3.0f64, shift in -5.0..5.0f64) {
        let cfg = AlignConfig::default();
        let d = elastic_distance(&a, &b, &cfg).unwrap();
        let moved = rotate(&a, angle).translated(&[shift, -shift]);
        let dm = elastic_distance(&moved, &rotate(&b, angle), &cfg).unwrap();
        prop_assert!((d - dm).abs() < 1e-6 * (1.0 + d), "{} vs {}", d, dm);
    }

    // scaling a curve by c scales its SRV by √c
    #[test]
    fn distance_scales_with_square_root(a in polygon(), b in polygon(), c in 0.25..4.0f64) {
        let cfg = AlignConfig::default();
        let d = elastic_distance(&a, &b, &cfg).unwrap();
        let ds = elastic_distance(&a.scaled(c), &b.scaled(c), &cfg).unwrap();
        prop_assert!((ds - c.sqrt() * d).abs() < 1e-6 * (1.0 + ds), "{} vs {}", ds, c.sqrt() * d);
    }

    #[test]
    fn alignment_never_beats_the_identity_downwards(a in polygon(), b in polygon()) {
        let target = srv_transform(&a);
        let res = align_to_target(&b, &target, &AlignConfig::default()).unwrap();
        let unwarped = srv_transform(&b).l2_distance(&target);
        prop_assert!(res.residual <= unwarped + 1e-10);
        prop_assert!((res.warped.l2_distance(&target) - res.residual).abs() < 1e-8 * (1.0 + res.residual));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn banded_search_matches_exhaustive_search(a in polygon(), b in polygon()) {
        let fast = elastic_distance(&a, &b, &AlignConfig { grid_size: 40, ..AlignConfig::default() }).unwrap();
        let slow = brute_force_distance(&a, &b, 40).unwrap();
        prop_assert!((fast - slow).abs() < 1e-6, "{} vs {}", fast, slow);
    }
}

#[test]
fn single_precision_agrees_with_double() {
    let rows = [vec![0.0, 0.0], vec![1.0, 0.5], vec![1.5, 2.0], vec![0.5, 3.0]];
    let other = [vec![0.0, 0.0], vec![0.7, 0.9], vec![1.2, 2.2], vec![0.1, 2.6]];
    let d64 = elastic_distance(
        &polygon_from_points(&rows, false).unwrap(),
        &polygon_from_points(&other, false).unwrap(),
        &AlignConfig::default(),
    )
    .unwrap();
    let to32 = |r: &[Vec<f64>]| r.iter().map(|p| p.iter().map(|&v| v as f32).collect()).collect::<Vec<Vec<f32>>>();
    let d32 = elastic_distance(
        &polygon_from_points(&to32(&rows), false).unwrap(),
        &polygon_from_points(&to32(&other), false).unwrap(),
        &AlignConfig::default(),
    )
    .unwrap();
    assert!((d32 as f64 - d64).abs() < 1e-3, "{d32} vs {d64}");
}
