//! Clarke estimates, min-norm points and estimator determinism.

use pprs::linalg::{dot, norm};
use pprs::objectives::{chain_partition, desk_attack_instance, linf_objective, margin_attack_perturbation_objective, NetSpec};
use pprs::smoothing::{clarke_min_norm, min_norm_point, smoothed_gradient, SmoothingConfig};
use proptest::prelude::*;

fn residual(gradients: &[Vec<f64>], weights: &[f64], element: &[f64]) -> f64 {
    let mut combo = vec![0.0; element.len()];
    for (g, w) in gradients.iter().zip(weights) {
        for (c, gi) in combo.iter_mut().zip(g) {
            *c += w * gi;
        }
    }
    combo.iter().zip(element).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clarke_estimate_is_a_capped_convex_combination(
        theta in prop::collection::vec(-1.0f64..1.0, 5),
        r in 0.01f64..2.0,
        n in 1usize..40,
        seed in 0u64..1000,
    ) {
        let f = linf_objective(5, 1.0).unwrap();
        let est = clarke_min_norm(&f, &theta, r, n, seed).unwrap();
        let best = est.gradients.iter().map(|g| norm(g)).fold(f64::INFINITY, f64::min);
        prop_assert!(est.min_norm <= best);
        prop_assert!(est.weights.iter().all(|&w| w >= 0.0));
        prop_assert!((est.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(residual(&est.gradients, &est.weights, &est.min_norm_element) <= 1e-8);
        prop_assert_eq!(est.min_norm, norm(&est.min_norm_element));
    }

    #[test]
    fn min_norm_point_satisfies_optimality(
        points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..25),
    ) {
        let sol = min_norm_point(&points);
        let scale = points.iter().map(|p| dot(p, p)).fold(1.0, f64::max);
        prop_assert!(sol.weights.iter().all(|&w| w >= 0.0));
        prop_assert!((sol.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(residual(&points, &sol.weights, &sol.point) <= 1e-8);
        // first-order condition over the hull: <x, g_j - x> >= 0 for every vertex
        let xx = dot(&sol.point, &sol.point);
        for p in &points {
            prop_assert!(dot(&sol.point, p) - xx >= -1e-9 * scale);
        }
    }

    #[test]
    fn smoothed_gradient_is_deterministic(seed in 0u64..10_000, iteration in 0u64..1000, k in 1usize..20) {
        let f = linf_objective(4, 1.0).unwrap();
        let theta = [0.3, -0.2, 0.1, 0.05];
        let cfg = SmoothingConfig::new(0.5, k, seed).unwrap();
        let a = smoothed_gradient(&f, &theta, &cfg, iteration, None).unwrap();
        let b = smoothed_gradient(&f, &theta, &cfg, iteration, None).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn clarke_on_the_attack_objective() {
    let (net, x, y) = desk_attack_instance(&NetSpec::default()).unwrap();
    let f = chain_partition(&margin_attack_perturbation_objective(&net, &x, y, 300.0).unwrap(), 20).unwrap();
    for seed in 0..5 {
        let est = clarke_min_norm(&f, &vec![0.01; x.len()], 0.05, 64, seed).unwrap();
        let best = est.gradients.iter().map(|g| norm(g)).fold(f64::INFINITY, f64::min);
        assert!(est.min_norm <= best);
        assert!(residual(&est.gradients, &est.weights, &est.min_norm_element) <= 1e-8);
    }
}
