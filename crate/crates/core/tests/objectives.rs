//! Objective library checked against closed forms and finite differences.

mod common;

use common::{gradient_check, library, random_points, rel_err, rel_err_scalar, Case};
use pprs::objectives::{
    affine_objective, chain_partition, desk_attack_instance, fig1_objective, finite_sum, linf_objective,
    linf_objective_centered, margin_attack_objective, margin_attack_perturbation_objective, quadratic_objective,
    quadratic_objective_centered, NetSpec, PiecewiseLinearNet,
};
use proptest::prelude::*;

/// Plain-loop network evaluation, independent of the graph machinery.
fn logits(net: &PiecewiseLinearNet, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let n = net.layers().len();
    for (l, layer) in net.layers().iter().enumerate() {
        let inputs = h.len();
        let mut out = layer.bias().to_vec();
        for (o, v) in out.iter_mut().enumerate() {
            for (i, hi) in h.iter().enumerate() {
                *v += layer.weights()[o * inputs + i] * hi;
            }
        }
        if l + 1 < n {
            for v in &mut out {
                *v = v.max(0.0);
            }
        }
        h = out;
    }
    h
}

fn attack_loss(net: &PiecewiseLinearNet, x: &[f64], adv: &[f64], y: usize, lambda: f64) -> f64 {
    let z = logits(net, adv);
    let hinge: f64 = (0..z.len())
        .filter(|&i| i != y)
        .map(|i| (1.0 - z[y] + z[i]).max(0.0))
        .sum();
    let dist = adv.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    hinge + lambda * dist
}

#[test]
fn forward_matches_closed_forms() {
    let fig1 = fig1_objective();
    let box_points = |d: usize, seed: u64| {
        random_points(
            &Case {
                name: String::new(),
                objective: linf_objective(d, 1.0).unwrap(),
                base: vec![0.0; d],
                spread: 3.0,
            },
            100,
            seed,
        )
    };
    for p in box_points(2, 1) {
        let (x, w) = (p[0], p[1]);
        let expect = (1.0 + (x / 2.0).exp()).ln() + (x / 2.0 - w * x.sin()).abs();
        assert!(rel_err_scalar(fig1.value(&p).unwrap(), expect) <= 1e-12);
    }

    let center: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 0.7).collect();
    let linf = linf_objective_centered(2.5, center.clone()).unwrap();
    let quad = quadratic_objective_centered(1.7, center.clone()).unwrap();
    let a = vec![0.5, -1.0, 2.0, 0.0, 3.5, -0.25];
    let affine = affine_objective(a.clone(), -1.5).unwrap();
    for p in box_points(6, 2) {
        let linf_expect = 2.5 * p.iter().zip(&center).map(|(t, c)| (t - c).abs()).fold(0.0, f64::max);
        let quad_expect = 0.85 * p.iter().zip(&center).map(|(t, c)| (t - c) * (t - c)).sum::<f64>();
        let affine_expect = p.iter().zip(&a).map(|(t, ai)| t * ai).sum::<f64>() - 1.5;
        assert!(rel_err_scalar(linf.value(&p).unwrap(), linf_expect) <= 1e-12);
        assert!(rel_err_scalar(quad.value(&p).unwrap(), quad_expect) <= 1e-12);
        assert!(rel_err_scalar(affine.value(&p).unwrap(), affine_expect) <= 1e-12);
    }
    let q = quadratic_objective(4, 2.0).unwrap();
    assert!(q.value(&[0.5; 4]).unwrap().abs() <= 1e-15);

    let (net, x, y) = desk_attack_instance(&NetSpec::default()).unwrap();
    let absolute = margin_attack_objective(&net, &x, y, 300.0).unwrap();
    let perturbation = margin_attack_perturbation_objective(&net, &x, y, 300.0).unwrap();
    for p in box_points(x.len(), 3) {
        let delta: Vec<f64> = p.iter().map(|v| v / 6.0).collect();
        let adv: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let expect = attack_loss(&net, &x, &adv, y, 300.0);
        assert!(rel_err_scalar(absolute.value(&adv).unwrap(), expect) <= 1e-12);
        // the perturbation form rounds x + θ inside the graph the same way
        assert!(rel_err_scalar(perturbation.value(&delta).unwrap(), expect) <= 1e-12);
    }
}

#[test]
fn backward_matches_finite_differences() {
    for (i, c) in library().iter().enumerate() {
        let (worst, _) = gradient_check(c, 100, 7 + i as u64);
        assert!(worst <= 1e-5, "{}: relative error {worst:e}", c.name);
    }
}

#[test]
fn chain_partition_preserves_values_and_gradients() {
    let (net, x, y) = desk_attack_instance(&NetSpec::default()).unwrap();
    let bases = [
        ("fig1", fig1_objective(), 3.0),
        ("linf", linf_objective(5, 1.5).unwrap(), 2.0),
        ("quadratic", quadratic_objective(5, 2.0).unwrap(), 2.0),
        ("margin_attack", margin_attack_perturbation_objective(&net, &x, y, 300.0).unwrap(), 0.5),
    ];
    for (name, base, spread) in bases {
        let case = Case {
            name: name.into(),
            base: vec![0.0; base.dim()],
            objective: base.clone(),
            spread,
        };
        for stages in [1, 3, 20, 200] {
            let parted = chain_partition(&base, stages).unwrap();
            assert_eq!(parted.depth(), stages, "{name}");
            for p in random_points(&case, 100, stages as u64) {
                assert!(rel_err_scalar(parted.value(&p).unwrap(), base.value(&p).unwrap()) <= 1e-12);
                let (g, h) = (parted.gradient(&p).unwrap(), base.gradient(&p).unwrap());
                assert!(rel_err(&g, &h) <= 1e-9, "{name} with {stages} stages");
            }
        }
    }
}

#[test]
fn chain_depth_equals_stage_count() {
    let base = linf_objective(3, 1.0).unwrap();
    for stages in 1..=64 {
        let parted = chain_partition(&base, stages).unwrap();
        assert_eq!(parted.depth(), stages);
        assert_eq!(parted.graph().chain().map(|c| c.len()), Some(stages));
    }
}

#[test]
fn finite_sum_gradient_is_the_sample_average() {
    let centers: Vec<Vec<f64>> = (0..7).map(|i| vec![0.1 * i as f64, -0.2 * i as f64, 1.0]).collect();
    let sum = finite_sum(&centers, |c| linf_objective_centered(1.0 + c[0], c.clone())).unwrap();
    let probe = Case {
        name: String::new(),
        objective: linf_objective(3, 1.0).unwrap(),
        base: vec![0.0; 3],
        spread: 2.0,
    };
    for p in random_points(&probe, 50, 11) {
        let g = sum.gradient(&p).unwrap();
        let m = sum.len() as f64;
        let mut expect = vec![0.0; 3];
        for i in 0..sum.len() {
            for (e, gi) in expect.iter_mut().zip(sum.sample_gradient(i, &p).unwrap()) {
                *e += gi / m;
            }
        }
        // same summation order
        let mut ordered = [0.0; 3];
        for i in 0..sum.len() {
            for (o, gi) in ordered.iter_mut().zip(sum.sample_gradient(i, &p).unwrap()) {
                *o += gi;
            }
        }
        let ordered: Vec<f64> = ordered.iter().map(|o| o / m).collect();
        assert_eq!(g, ordered);
        assert!(rel_err(&g, &expect) <= 1e-14);
        let v: f64 = (0..sum.len()).map(|i| sum.sample(i).value(&p).unwrap()).sum::<f64>() / m;
        assert_eq!(sum.value(&p).unwrap(), v);
    }
}

proptest! {
    #[test]
    fn linf_is_exactly_lipschitz(
        a in prop::collection::vec(-3.0f64..3.0, 6),
        b in prop::collection::vec(-3.0f64..3.0, 6),
        coord in 0usize..6,
        step in 0.01f64..1.0,
    ) {
        let l = 1.75;
        let f = linf_objective(6, l).unwrap();
        let dist = pprs::linalg::distance(&a, &b);
        prop_assume!(dist > 1e-9);
        let slope = (f.value(&a).unwrap() - f.value(&b).unwrap()).abs() / dist;
        prop_assert!(slope <= l * (1.0 + 1e-12));
        // moving the dominant coordinate away from zero has slope exactly L
        let i = (0..6).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap();
        let mut moved = a.clone();
        moved[i] += step * a[i].signum();
        let s = (f.value(&moved).unwrap() - f.value(&a).unwrap()) / step;
        prop_assert!((s - l).abs() <= 1e-9 * l.max(1.0) / step);
        // every coordinate direction has slope at most L
        let mut other = a.clone();
        other[coord] += step;
        prop_assert!((f.value(&other).unwrap() - f.value(&a).unwrap()).abs() <= l * step * (1.0 + 1e-12));
    }

    #[test]
    fn partitioned_gradients_are_deterministic(seed in 0u64..1000, stages in 1usize..40) {
        let base = fig1_objective();
        let parted = chain_partition(&base, stages).unwrap();
        let case = Case { name: String::new(), objective: base, base: vec![0.0; 2], spread: 3.0 };
        let p = random_points(&case, 1, seed).remove(0);
        prop_assert_eq!(parted.gradient(&p).unwrap(), parted.gradient(&p).unwrap());
    }
}
