//! Helpers shared by the integration suites.
#![allow(dead_code)]

use pprs::objectives::{
    affine_objective, chain_partition, desk_attack_instance, fig1_objective, linf_objective, linf_objective_with_radius,
    margin_attack_objective, margin_attack_perturbation_objective, quadratic_objective, NetSpec, Objective,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

/// An objective plus the box half-width random test points are drawn from,
/// around `θ₀ = 0` or around a stored base point.
pub struct Case {
    pub name: String,
    pub objective: Objective,
    pub base: Vec<f64>,
    pub spread: f64,
}

fn case(name: &str, objective: Objective, spread: f64) -> Case {
    let base = vec![0.0; objective.dim()];
    Case {
        name: name.into(),
        objective,
        base,
        spread,
    }
}

/// Every objective constructor in the library, with partitioned variants.
pub fn library() -> Vec<Case> {
    let spec = NetSpec::default();
    let (net, x, y) = desk_attack_instance(&spec).unwrap();
    let attack = margin_attack_perturbation_objective(&net, &x, y, 300.0).unwrap();
    let mut absolute = case("margin_attack_input", margin_attack_objective(&net, &x, y, 300.0).unwrap(), 0.5);
    absolute.base = x.clone();
    let linf = linf_objective(8, 2.0).unwrap();
    vec![
        case("fig1", fig1_objective(), 3.0),
        case("linf_d8", linf.clone(), 2.0),
        case("linf_radius_d16", linf_objective_with_radius(16, 1.0, 1.0).unwrap(), 2.0),
        case("quadratic_d4", quadratic_objective(4, 1.0).unwrap(), 2.0),
        case("quadratic_d16", quadratic_objective(16, 3.0).unwrap(), 2.0),
        case("affine_d5", affine_objective(vec![1.0, -2.0, 0.5, 3.0, -0.25], 0.7).unwrap(), 2.0),
        case("margin_attack", attack.clone(), 0.5),
        absolute,
        case("linf_d8_chain20", chain_partition(&linf, 20).unwrap(), 2.0),
        case("fig1_chain7", chain_partition(&fig1_objective(), 7).unwrap(), 3.0),
        case("margin_attack_chain200", chain_partition(&attack, 200).unwrap(), 0.5),
    ]
}

pub fn random_points(c: &Case, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| c.base.iter().map(|b| b + rng.gen_range(-c.spread..c.spread)).collect())
        .collect()
}

fn shifted(theta: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut p = theta.to_vec();
    p[i] += h;
    p
}

/// Central differences with step `FD_STEP`, or `None` when a coordinate's
/// one-sided slopes disagree, i.e. a kink lies within one step.
pub fn central_differences(objective: &Objective, theta: &[f64]) -> Option<Vec<f64>> {
    let f0 = objective.value(theta).unwrap();
    let mut g = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let fp = objective.value(&shifted(theta, i, FD_STEP)).unwrap();
        let fm = objective.value(&shifted(theta, i, -FD_STEP)).unwrap();
        let (fwd, bwd) = ((fp - f0) / FD_STEP, (f0 - fm) / FD_STEP);
        let central = (fp - fm) / (2.0 * FD_STEP);
        if (fwd - bwd).abs() > 1e-3 * central.abs().max(1.0) {
            return None;
        }
        g.push(central);
    }
    Some(g)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = pprs::linalg::norm(a).max(pprs::linalg::norm(b));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn rel_err_scalar(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative error of backward against central differences over
/// `n` random differentiable points, with the number of points skipped for
/// sitting next to a kink.
pub fn gradient_check(c: &Case, n: usize, seed: u64) -> (f64, usize) {
    let mut worst = 0.0f64;
    let (mut checked, mut skipped) = (0usize, 0usize);
    let mut draw = 0u64;
    while checked < n {
        let theta = random_points(c, 1, seed.wrapping_mul(1_000_003).wrapping_add(draw)).remove(0);
        draw += 1;
        match central_differences(&c.objective, &theta) {
            Some(fd) => {
                let g = c.objective.gradient(&theta).unwrap();
                worst = worst.max(rel_err(&g, &fd));
                checked += 1;
            }
            None => skipped += 1,
        }
        assert!(skipped < 10 * n, "{}: too many kink hits", c.name);
    }
    (worst, skipped)
}
