//! PPRS and the sequential first-order baselines.
//!
//! All three methods share the accelerated update
//!
//! ```text
//! y_{t+1} = x_t − η G_t
//! x_{t+1} = (1 + μ_t) y_{t+1} − μ_t y_t
//! ```
//!
//! and differ in `G_t` (an average of `K` gradients at Gaussian perturbations
//! for PPRS, the plain gradient otherwise) and in the simulated time charged
//! per iteration: the bubbling makespan `2(K+Δ−1)` for PPRS, `2Δ` for the
//! sequential baselines. Losses are recorded at `y_t`.

mod params;

use crate::error::{invalid, Error, Result};
use crate::linalg::norm;
use crate::objectives::Objective;
use crate::pipeline::{bubbling_makespan, nse_schedule, PipelineExecutor};
use crate::smoothing::{clarke_min_norm, smoothed_gradient, SmoothingConfig};

pub use params::{lambda_sequence, theorem3_params, theorem4_params, LambdaSequence, Theorem3Params, Theorem4Params};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Momentum {
    Constant(f64),
    /// `μ_t = (λ_{t+1} − 1)/λ_{t+2}` from the accelerated λ recursion.
    Accelerated,
}

impl Momentum {
    fn schedule(&self, iterations: usize) -> Result<Vec<f64>> {
        match *self {
            Momentum::Constant(mu) => {
                if !(0.0..1.0).contains(&mu) {
                    return Err(invalid(format!("momentum must lie in [0, 1), got {mu}")));
                }
                Ok(vec![mu; iterations])
            }
            Momentum::Accelerated => Ok(lambda_sequence(iterations)?.momenta),
        }
    }
}

impl std::fmt::Display for Momentum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Momentum::Constant(mu) => write!(f, "{mu}"),
            Momentum::Accelerated => f.write_str("accelerated"),
        }
    }
}

/// Periodic Clarke min-norm diagnostics at the current `y_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClarkeMonitor {
    pub radius: f64,
    pub samples: usize,
    /// Estimate every this many iterations (and at the last one).
    pub every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PPRSConfig {
    pub iterations: usize,
    pub samples: usize,
    pub step: f64,
    pub momentum: Momentum,
    pub gamma: f64,
    pub seed: u64,
    /// Pipeline depth; must equal the objective's depth.
    pub delta: usize,
    /// Inter-stage communication latency in slots.
    pub tau: usize,
    pub clarke: Option<ClarkeMonitor>,
    /// Initial point; zero when absent.
    pub start: Option<Vec<f64>>,
}

impl PPRSConfig {
    pub fn new(iterations: usize, samples: usize, step: f64, gamma: f64, delta: usize) -> Self {
        Self {
            iterations,
            samples,
            step,
            momentum: Momentum::Accelerated,
            gamma,
            seed: 0,
            delta,
            tau: 0,
            clarke: None,
            start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub t: usize,
    pub simulated_time: usize,
    pub loss: f64,
    /// Best loss so far, including the initial point.
    pub best_loss: f64,
    /// Norm of the descent direction used at this iteration.
    pub grad_norm: f64,
    pub clarke_min_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub delta: usize,
    pub samples: usize,
    pub gamma: f64,
    pub step: f64,
    pub momentum: Momentum,
    pub seed: u64,
    pub initial_loss: f64,
    pub iterations: Vec<IterationRecord>,
    pub final_point: Vec<f64>,
    pub diverged: bool,
}

impl RunRecord {
    pub fn final_loss(&self) -> f64 {
        self.iterations.last().map_or(self.initial_loss, |r| r.loss)
    }

    pub fn best_loss(&self) -> f64 {
        self.iterations.last().map_or(self.initial_loss, |r| r.best_loss)
    }

    pub fn total_time(&self) -> usize {
        self.iterations.last().map_or(0, |r| r.simulated_time)
    }
}

struct Driver<'a> {
    objective: &'a Objective,
    step: f64,
    momenta: Vec<f64>,
    cost: usize,
    clarke: Option<ClarkeMonitor>,
    seed: u64,
}

impl Driver<'_> {
    fn run(
        &self,
        mut record: RunRecord,
        start: Option<&[f64]>,
        mut direction: impl FnMut(&[f64], usize) -> Result<Vec<f64>>,
    ) -> Result<RunRecord> {
        let d = self.objective.dim();
        let x0 = match start {
            Some(s) if s.len() != d => {
                return Err(Error::DimensionMismatch {
                    context: "start point".into(),
                    expected: d,
                    found: s.len(),
                })
            }
            Some(s) => s.to_vec(),
            None => vec![0.0; d],
        };
        record.initial_loss = self.objective.value(&x0)?;
        let mut best = record.initial_loss;
        let mut x = x0.clone();
        let mut y = x0;
        let iterations = self.momenta.len();
        for t in 0..iterations {
            let g = match direction(&x, t) {
                Ok(g) => g,
                Err(Error::NonFiniteGradient) => {
                    record.diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let y_next: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - self.step * gi).collect();
            let mu = self.momenta[t];
            x = y_next
                .iter()
                .zip(&y)
                .map(|(yn, yo)| (1.0 + mu) * yn - mu * yo)
                .collect();
            y = y_next;
            let loss = self.objective.value(&y)?;
            if loss.is_finite() {
                best = best.min(loss);
            }
            let clarke_min_norm = match self.clarke {
                Some(m) if loss.is_finite() && ((t + 1) % m.every.max(1) == 0 || t + 1 == iterations) => {
                    let seed = self.seed.wrapping_add(t as u64 + 1);
                    Some(clarke_min_norm(self.objective, &y, m.radius, m.samples, seed)?.min_norm)
                }
                _ => None,
            };
            record.iterations.push(IterationRecord {
                t: t + 1,
                simulated_time: (t + 1) * self.cost,
                loss,
                best_loss: best,
                grad_norm: norm(&g),
                clarke_min_norm,
            });
            if !loss.is_finite() {
                record.diverged = true;
                break;
            }
        }
        record.final_point = y;
        Ok(record)
    }
}

/// Pipeline-parallel randomized smoothing. Chain objectives run their
/// gradients through the pipeline executor; other graphs of the same depth
/// are evaluated directly and charged the same bubbling time.
pub fn pprs_run(objective: &Objective, config: &PPRSConfig) -> Result<RunRecord> {
    if config.iterations == 0 {
        return Err(invalid("need at least one iteration"));
    }
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {}", config.step)));
    }
    if objective.depth() != config.delta {
        return Err(Error::DepthMismatch {
            expected: config.delta,
            found: objective.depth(),
        });
    }
    let smoothing = SmoothingConfig::new(config.gamma, config.samples, config.seed)?;
    let executor = match objective.graph().chain() {
        Some(_) => Some(PipelineExecutor::new(objective, config.samples, config.tau)?),
        None => None,
    };
    let cost = bubbling_makespan(config.delta, config.samples, config.tau)?;
    let driver = Driver {
        objective,
        step: config.step,
        momenta: config.momentum.schedule(config.iterations)?,
        cost,
        clarke: config.clarke,
        seed: config.seed,
    };
    let record = RunRecord {
        algorithm: "pprs".into(),
        delta: config.delta,
        samples: config.samples,
        gamma: config.gamma,
        step: config.step,
        momentum: config.momentum,
        seed: config.seed,
        initial_loss: 0.0,
        iterations: Vec::with_capacity(config.iterations),
        final_point: Vec::new(),
        diverged: false,
    };
    driver.run(record, config.start.as_deref(), |x, t| {
        smoothed_gradient(objective, x, &smoothing, t as u64, executor.as_ref()).map(|(g, _)| g)
    })
}

fn baseline(
    algorithm: &str,
    objective: &Objective,
    step: f64,
    momentum: Momentum,
    iterations: usize,
    delta: usize,
    start: Option<&[f64]>,
) -> Result<RunRecord> {
    if iterations == 0 {
        return Err(invalid("need at least one iteration"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {step}")));
    }
    let driver = Driver {
        objective,
        step,
        momenta: momentum.schedule(iterations)?,
        cost: nse_schedule(delta)?.makespan(),
        clarke: None,
        seed: 0,
    };
    let record = RunRecord {
        algorithm: algorithm.into(),
        delta,
        samples: 1,
        gamma: 0.0,
        step,
        momentum,
        seed: 0,
        initial_loss: 0.0,
        iterations: Vec::with_capacity(iterations),
        final_point: Vec::new(),
        diverged: false,
    };
    driver.run(record, start, |x, _| {
        let g = objective.gradient(x)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        Ok(g)
    })
}

/// Subgradient descent with each gradient computed sequentially through
/// `delta` stages.
pub fn gd_run(objective: &Objective, step: f64, iterations: usize, delta: usize, start: Option<&[f64]>) -> Result<RunRecord> {
    baseline("gd", objective, step, Momentum::Constant(0.0), iterations, delta, start)
}

/// Nesterov's accelerated gradient with sequential gradients.
pub fn agd_run(
    objective: &Objective,
    step: f64,
    momentum: Momentum,
    iterations: usize,
    delta: usize,
    start: Option<&[f64]>,
) -> Result<RunRecord> {
    baseline("agd", objective, step, momentum, iterations, delta, start)
}
