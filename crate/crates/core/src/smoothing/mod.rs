//! Gaussian randomized smoothing and the sampled Clarke r-subdifferential.
//!
//! The smoothed surrogate is `f^γ(θ) = E[f(θ + γX)]` with `X ~ N(0, I)`.
//! Every random draw comes from its own keyed stream, so estimates depend
//! only on the seed and never on evaluation order.

mod min_norm;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{average, gaussian, norm, sample_in_ball, stream};
use crate::objectives::Objective;
use crate::pipeline::PipelineExecutor;

pub use min_norm::{min_norm_point, MinNormPoint};

const GRADIENT_STREAM: u64 = 1;
const VALUE_STREAM: u64 = 2;
const CLARKE_STREAM: u64 = 3;

/// Two-sided 99% standard normal quantile.
const Z_99: f64 = 2.5758293035489;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingConfig {
    pub gamma: f64,
    pub samples: usize,
    pub seed: u64,
}

impl SmoothingConfig {
    pub fn new(gamma: f64, samples: usize, seed: u64) -> Result<Self> {
        let cfg = Self { gamma, samples, seed };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid(format!("smoothing radius must be positive, got {}", self.gamma)));
        }
        if self.samples == 0 {
            return Err(invalid("need at least one smoothing sample"));
        }
        Ok(())
    }
}

/// The `K` perturbed points `θ + γX_k` used at `iteration`.
pub fn perturbed_points(theta: &[f64], cfg: &SmoothingConfig, iteration: u64) -> Vec<Vec<f64>> {
    (0..cfg.samples as u64)
        .map(|k| {
            let x = gaussian(&mut stream(cfg.seed, iteration, k, GRADIENT_STREAM), theta.len());
            theta.iter().zip(&x).map(|(t, xi)| t + cfg.gamma * xi).collect()
        })
        .collect()
}

/// Average of `K` gradients at Gaussian perturbations of `θ`, with the
/// logical time charged: the pipeline's makespan when an executor is given,
/// `2K` otherwise.
pub fn smoothed_gradient(
    objective: &Objective,
    theta: &[f64],
    cfg: &SmoothingConfig,
    iteration: u64,
    pipeline: Option<&PipelineExecutor>,
) -> Result<(Vec<f64>, usize)> {
    cfg.check()?;
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(invalid("smoothing point is not finite"));
    }
    let points = perturbed_points(theta, cfg, iteration);
    let (grads, elapsed) = match pipeline {
        Some(exec) => {
            let out = exec.execute(&points)?;
            (out.gradients, out.elapsed)
        }
        None => {
            let grads = points
                .par_iter()
                .map(|p| objective.gradient(p))
                .collect::<Result<Vec<_>>>()?;
            (grads, 2 * cfg.samples)
        }
    };
    if grads.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    Ok((average(&grads), elapsed))
}

/// Monte-Carlo estimate of `f^γ(θ)` and the half-width of its 99%
/// confidence interval.
pub fn smoothed_value(objective: &Objective, theta: &[f64], gamma: f64, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    if n_mc < 2 {
        return Err(invalid("need at least two Monte-Carlo samples"));
    }
    SmoothingConfig::new(gamma, n_mc, seed)?;
    let mut rng = stream(seed, 0, 0, VALUE_STREAM);
    let mut point = theta.to_vec();
    // Welford
    let (mut mean, mut m2) = (0.0, 0.0);
    for j in 0..n_mc {
        let x = gaussian(&mut rng, theta.len());
        for ((p, t), xi) in point.iter_mut().zip(theta).zip(&x) {
            *p = t + gamma * xi;
        }
        let v = objective.value(&point)?;
        let delta = v - mean;
        mean += delta / (j + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n_mc - 1) as f64;
    Ok((mean, Z_99 * (var / n_mc as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingBounds {
    /// Bound on `sup |f^γ − f|`.
    pub gap: f64,
    /// Lipschitz constant of `∇f^γ`.
    pub smoothness: f64,
}

pub fn smoothing_bounds(lipschitz: f64, gamma: f64, d: usize) -> Result<SmoothingBounds> {
    if !(lipschitz > 0.0 && gamma > 0.0 && d >= 1) {
        return Err(invalid("smoothing bounds need L > 0, gamma > 0, d >= 1"));
    }
    Ok(SmoothingBounds {
        gap: gamma * lipschitz * (d as f64).sqrt(),
        smoothness: lipschitz / gamma,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClarkeEstimate {
    pub point: Vec<f64>,
    pub radius: f64,
    pub gradients: Vec<Vec<f64>>,
    /// Convex weights of `min_norm_element` over `gradients`.
    pub weights: Vec<f64>,
    pub min_norm_element: Vec<f64>,
    pub min_norm: f64,
}

/// Samples `n` points uniformly in the `r`-ball around `θ` and returns the
/// minimum-norm element of the convex hull of their gradients. This is an
/// inner approximation of the Clarke set, so the norm can only overestimate
/// the true distance to stationarity.
pub fn clarke_min_norm(objective: &Objective, theta: &[f64], r: f64, n: usize, seed: u64) -> Result<ClarkeEstimate> {
    if !(r > 0.0) || n == 0 {
        return Err(invalid("Clarke estimate needs r > 0 and at least one sample"));
    }
    let gradients = (0..n as u64)
        .map(|j| objective.gradient(&sample_in_ball(&mut stream(seed, 0, j, CLARKE_STREAM), theta, r)))
        .collect::<Result<Vec<_>>>()?;
    if gradients.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    let sol = min_norm_point(&gradients);
    // never report more than the best single sample
    let (min_norm_element, weights) = match gradients
        .iter()
        .enumerate()
        .map(|(j, g)| (j, norm(g)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
    {
        Some((j, best)) if best < sol.norm => {
            let mut w = vec![0.0; n];
            w[j] = 1.0;
            (gradients[j].clone(), w)
        }
        _ => (sol.point, sol.weights),
    };
    Ok(ClarkeEstimate {
        point: theta.to_vec(),
        radius: r,
        min_norm: norm(&min_norm_element),
        min_norm_element,
        weights,
        gradients,
    })
}

/// First timestamp whose min-norm is at most `ε`; `history` is
/// `(time, min_norm)` in time order.
pub fn time_to_reach<T: Copy>(history: &[(T, f64)], epsilon: f64) -> Option<T> {
    history.iter().find(|(_, m)| *m <= epsilon).map(|(t, _)| *t)
}
