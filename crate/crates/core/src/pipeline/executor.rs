//! Runs real stage computations in schedule order.
//!
//! Each forward cell evaluates one stage on one microbatch and each backward
//! cell applies that stage's vector-Jacobian product, so the gradients are
//! exactly those of the plain serial backward pass while the elapsed time is
//! the schedule's makespan.

use std::sync::Arc;

use super::{bubbling_schedule, gpipe_erm_schedule, PassKind, PipelineSchedule};
use crate::error::{Error, Result};
use crate::graph::NodeFunction;
use crate::objectives::{FiniteSumObjective, Objective};

type Stages = Vec<Arc<dyn NodeFunction>>;

fn chain_stages(objective: &Objective) -> Result<Stages> {
    let graph = objective.graph();
    let path = graph.chain().ok_or(Error::NotAChain)?;
    Ok(path
        .iter()
        .map(|&id| graph.function(id).expect("chain nodes are functions").clone())
        .collect())
}

/// Walks `schedule`, using `stages_of(microbatch)` for the stage functions.
fn run<'a>(
    schedule: &PipelineSchedule,
    dim: usize,
    stages_of: impl Fn(usize) -> &'a Stages,
    points: &[Vec<f64>],
) -> Result<PipelineOutput> {
    let k = schedule.microbatches();
    if points.len() != k {
        return Err(Error::DimensionMismatch {
            context: "number of pipeline inputs".into(),
            expected: k,
            found: points.len(),
        });
    }
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "pipeline input".into(),
            expected: dim,
            found: bad.len(),
        });
    }
    let delta = schedule.stages();
    // acts[mb][i] is the input of stage i+1; acts[mb][delta] the scalar output
    let mut acts: Vec<Vec<Vec<f64>>> = points
        .iter()
        .map(|p| {
            let mut a = vec![Vec::new(); delta + 1];
            a[0] = p.clone();
            a
        })
        .collect();
    let mut adjoints: Vec<Vec<f64>> = vec![vec![1.0]; k];
    for cell in schedule.cells() {
        let mb = cell.microbatch - 1;
        let i = cell.unit - 1;
        let stage = &stages_of(mb)[i];
        match cell.kind {
            PassKind::Forward => {
                let out = stage.eval(&[&acts[mb][i]]);
                acts[mb][i + 1] = out;
            }
            PassKind::Backward => {
                let mut parts = stage.vjp(&[&acts[mb][i]], &adjoints[mb]);
                adjoints[mb] = parts.swap_remove(0);
            }
        }
    }
    Ok(PipelineOutput {
        values: acts.iter().map(|a| a[delta][0]).collect(),
        gradients: adjoints,
        elapsed: schedule.makespan(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    /// Objective value at each input, in microbatch order.
    pub values: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
    /// Logical slots charged for the whole batch.
    pub elapsed: usize,
}

/// A chain-partitioned objective bound to a bubbling schedule for `K`
/// microbatches.
#[derive(Clone, Debug)]
pub struct PipelineExecutor {
    stages: Stages,
    dim: usize,
    schedule: PipelineSchedule,
}

impl PipelineExecutor {
    pub fn new(objective: &Objective, k: usize, tau: usize) -> Result<Self> {
        let stages = chain_stages(objective)?;
        let schedule = bubbling_schedule(stages.len(), k, tau)?;
        Ok(Self {
            stages,
            dim: objective.dim(),
            schedule,
        })
    }

    pub fn schedule(&self) -> &PipelineSchedule {
        &self.schedule
    }

    pub fn stages(&self) -> usize {
        self.stages.len()
    }

    pub fn microbatches(&self) -> usize {
        self.schedule.microbatches()
    }

    pub fn execute(&self, points: &[Vec<f64>]) -> Result<PipelineOutput> {
        run(&self.schedule, self.dim, |_| &self.stages, points)
    }
}

/// Gradients at `points` through a bubbling schedule, with the elapsed
/// logical time.
pub fn simulate_iteration(objective: &Objective, points: &[Vec<f64>], tau: usize) -> Result<(Vec<Vec<f64>>, usize)> {
    if points.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "number of pipeline inputs".into(),
            expected: 1,
            found: 0,
        });
    }
    let out = PipelineExecutor::new(objective, points.len(), tau)?.execute(points)?;
    Ok((out.gradients, out.elapsed))
}

/// Empirical-risk variant: `points[k]` is evaluated on every sample, giving
/// `m·K` microbatches ordered sample-major. Every sample must be a chain of
/// the same depth.
pub fn simulate_erm_iteration(objective: &FiniteSumObjective, points: &[Vec<f64>]) -> Result<PipelineOutput> {
    let per_sample = objective
        .samples()
        .iter()
        .map(chain_stages)
        .collect::<Result<Vec<_>>>()?;
    let delta = per_sample[0].len();
    if let Some(bad) = per_sample.iter().find(|s| s.len() != delta) {
        return Err(Error::DepthMismatch {
            expected: delta,
            found: bad.len(),
        });
    }
    let k = points.len().max(1);
    let schedule = gpipe_erm_schedule(delta, objective.len(), k)?;
    let flat: Vec<Vec<f64>> = (0..objective.len())
        .flat_map(|_| points.iter().cloned())
        .collect();
    run(&schedule, objective.dim(), |mb| &per_sample[mb / k], &flat)
}
