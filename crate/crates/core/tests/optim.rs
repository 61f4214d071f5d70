//! Optimizer bookkeeping, guarantees and reproducibility.

use pprs::objectives::{chain_partition, linf_objective, linf_objective_with_radius, quadratic_objective};
use pprs::optim::{agd_run, gd_run, lambda_sequence, pprs_run, theorem3_params, Momentum, PPRSConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulated_time_is_charged_per_iteration(
        delta in 1usize..12,
        k in 1usize..12,
        iterations in 1usize..15,
        tau in 0usize..3,
        seed in 0u64..100,
    ) {
        let f = chain_partition(&linf_objective(3, 1.0).unwrap(), delta).unwrap();
        let mut cfg = PPRSConfig::new(iterations, k, 0.01, 0.01, delta);
        cfg.tau = tau;
        cfg.seed = seed;
        let run = pprs_run(&f, &cfg).unwrap();
        let cost = 2 * (k + delta - 1) + 2 * (delta - 1) * tau;
        for (t, rec) in run.iterations.iter().enumerate() {
            prop_assert_eq!(rec.t, t + 1);
            prop_assert_eq!(rec.simulated_time, (t + 1) * cost);
        }
        prop_assert_eq!(run.total_time(), 2 * iterations * (k + delta - 1) + 2 * iterations * (delta - 1) * tau);
        for baseline in [gd_run(&f, 0.01, iterations, delta, None).unwrap(), agd_run(&f, 0.01, Momentum::Constant(0.5), iterations, delta, None).unwrap()] {
            prop_assert_eq!(baseline.total_time(), 2 * iterations * delta);
            prop_assert!(baseline.iterations.windows(2).all(|w| w[0].simulated_time < w[1].simulated_time));
        }
    }

    #[test]
    fn gd_best_iterate_never_increases(d in 1usize..10, iterations in 1usize..80) {
        // step R/(L√T) with R = 1 and L = 1
        let f = linf_objective_with_radius(d, 1.0, 1.0).unwrap();
        let step = 1.0 / (iterations as f64).sqrt();
        let run = gd_run(&f, step, iterations, f.depth(), None).unwrap();
        let mut prev = run.initial_loss;
        for rec in &run.iterations {
            prop_assert!(rec.best_loss <= prev);
            prop_assert_eq!(rec.best_loss, prev.min(rec.loss));
            prev = rec.best_loss;
        }
        prop_assert!(!run.diverged);
    }
}

#[test]
fn convex_bound_holds_on_average() {
    for d in [4usize, 16] {
        for t in [49usize, 99] {
            let f = linf_objective_with_radius(d, 1.0, 1.0).unwrap();
            let p = theorem3_params(1.0, 1.0, d, t).unwrap();
            let seeds = 20;
            let mut total = 0.0;
            for seed in 0..seeds {
                let mut cfg = PPRSConfig::new(p.iterations, p.samples, p.step, p.gamma, f.depth());
                cfg.momentum = p.momentum;
                cfg.seed = seed;
                total += pprs_run(&f, &cfg).unwrap().final_loss();
            }
            let mean = total / seeds as f64;
            let bound = p.error_bound(1.0, 1.0, d);
            assert!(mean <= bound, "d={d}, T={t}: mean error {mean} above {bound}");
        }
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let f = chain_partition(&quadratic_objective(6, 2.0).unwrap(), 4).unwrap();
    let mut cfg = PPRSConfig::new(30, 5, 0.1, 0.05, 4);
    cfg.seed = 9;
    assert_eq!(pprs_run(&f, &cfg).unwrap(), pprs_run(&f, &cfg).unwrap());
    cfg.seed = 10;
    assert_ne!(pprs_run(&f, &PPRSConfig { seed: 9, ..cfg.clone() }).unwrap(), pprs_run(&f, &cfg).unwrap());
}

#[test]
fn lambda_grows_at_least_linearly() {
    let s = lambda_sequence(10_000).unwrap();
    for t in 1..=10_000 {
        assert!(s.lambdas[t] >= (t as f64 + 1.0) / 2.0, "t = {t}");
    }
    assert!(s.momenta.iter().all(|&m| (0.0..1.0).contains(&m)));
}
