//! Empirical-risk objectives `(1/m) Σ_i f(θ, x_i)`.

use super::Objective;
use crate::error::{Error, Result};
use crate::linalg::average;

/// Uniform average of per-sample objectives sharing one parameter space.
#[derive(Clone, Debug)]
pub struct FiniteSumObjective {
    samples: Vec<Objective>,
}

/// Builds one per-sample objective per dataset record.
pub fn finite_sum<R>(
    dataset: &[R],
    per_sample: impl Fn(&R) -> Result<Objective>,
) -> Result<FiniteSumObjective> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let samples = dataset.iter().map(per_sample).collect::<Result<Vec<_>>>()?;
    FiniteSumObjective::new(samples)
}

impl FiniteSumObjective {
    pub fn new(samples: Vec<Objective>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::EmptyDataset);
        };
        let d = first.dim();
        if let Some(bad) = samples.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                context: "per-sample parameter dimension".into(),
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn samples(&self) -> &[Objective] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &Objective {
        &self.samples[i]
    }

    pub fn sample_gradient(&self, i: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.samples[i].gradient(theta)
    }

    /// Sum of per-sample values in dataset order, divided by `m`.
    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.samples {
            total += s.value(theta)?;
        }
        Ok(total / self.samples.len() as f64)
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let per_sample = self
            .samples
            .iter()
            .map(|s| s.gradient(theta))
            .collect::<Result<Vec<_>>>()?;
        Ok(average(&per_sample))
    }

    /// Applies the same transformation to every per-sample objective.
    pub fn map(&self, f: impl Fn(&Objective) -> Result<Objective>) -> Result<Self> {
        Self::new(self.samples.iter().map(f).collect::<Result<Vec<_>>>()?)
    }
}
