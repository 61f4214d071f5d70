//! Step-size, sample-count and momentum schedules with guarantees.

use super::Momentum;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSequence {
    /// `λ_0 ..= λ_{T+1}`, with `λ_0 = 0`.
    pub lambdas: Vec<f64>,
    /// `μ_0 .. μ_{T−1}`, where `μ_t = (λ_{t+1} − 1)/λ_{t+2}`; `μ_0 = 0`.
    pub momenta: Vec<f64>,
}

/// `λ_t = (1 + √(1 + 4λ_{t−1}²))/2` from `λ_0 = 0`, and the momenta it
/// induces over `iterations` steps.
pub fn lambda_sequence(iterations: usize) -> Result<LambdaSequence> {
    if iterations == 0 {
        return Err(invalid("need at least one iteration"));
    }
    let mut lambdas = Vec::with_capacity(iterations + 2);
    lambdas.push(0.0f64);
    for t in 1..iterations + 2 {
        let prev = lambdas[t - 1];
        lambdas.push((1.0 + (1.0 + 4.0 * prev * prev).sqrt()) / 2.0);
    }
    let momenta = (0..iterations).map(|t| (lambdas[t + 1] - 1.0) / lambdas[t + 2]).collect();
    Ok(LambdaSequence { lambdas, momenta })
}

/// Rounds up, treating values within floating-point noise of an integer as
/// that integer.
fn ceil_exact(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theorem3Params {
    pub iterations: usize,
    pub samples: usize,
    pub step: f64,
    pub gamma: f64,
    pub momentum: Momentum,
}

impl Theorem3Params {
    /// Predicted bound on `E[f(y_T)] − f*`.
    pub fn error_bound(&self, lipschitz: f64, radius: f64, d: usize) -> f64 {
        let q = (d as f64).powf(0.25);
        3.0 * lipschitz * radius * q / (self.iterations + 1) as f64
            + lipschitz * radius / (q * 2.0 * self.samples as f64)
    }
}

/// Convex `L`-Lipschitz parameters for `T` iterations from a start at
/// distance `R` of a minimizer. The smoothing radius is `R d^{−1/4}/(T+1)`.
pub fn theorem3_params(lipschitz: f64, radius: f64, d: usize, iterations: usize) -> Result<Theorem3Params> {
    if !(lipschitz > 0.0 && radius > 0.0) || d == 0 || iterations == 0 {
        return Err(invalid("convex parameters need L, R > 0, d >= 1, T >= 1"));
    }
    let t1 = (iterations + 1) as f64;
    let quarter = (d as f64).powf(-0.25);
    Ok(Theorem3Params {
        iterations,
        samples: ceil_exact(t1 / (d as f64).sqrt()),
        step: radius * quarter / (lipschitz * t1),
        gamma: radius * quarter / t1,
        momentum: Momentum::Accelerated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theorem4Params {
    pub gamma: f64,
    pub step: f64,
    pub momentum: Momentum,
    pub samples: usize,
    pub iterations: usize,
}

/// Non-convex parameters to reach a Clarke `r`-stationary point of
/// tolerance `ε`, given the initial gap `D = f(θ₀) − f*`.
pub fn theorem4_params(lipschitz: f64, gap: f64, d: usize, r: f64, epsilon: f64) -> Result<Theorem4Params> {
    if !(epsilon > 0.0 && epsilon < 3.0 * lipschitz) {
        return Err(Error::InvalidEpsilon { epsilon, lipschitz });
    }
    if !(gap >= 0.0 && r > 0.0) || d == 0 {
        return Err(invalid("non-convex parameters need D >= 0, r > 0, d >= 1"));
    }
    let df = d as f64;
    let e = std::f64::consts::E;
    let gamma = r / (4.0 * (3.0 * lipschitz / epsilon).ln() + 2.0 * (2.0 * e).ln() * df).sqrt();
    let eps2 = epsilon * epsilon;
    Ok(Theorem4Params {
        gamma,
        step: gamma / lipschitz,
        momentum: Momentum::Constant(0.0),
        samples: ceil_exact(18.0 * lipschitz * lipschitz / eps2),
        iterations: ceil_exact(36.0 * lipschitz * (gap + 2.0 * gamma * lipschitz * df.sqrt()) / (gamma * eps2)),
    })
}
