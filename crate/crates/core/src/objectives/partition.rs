//! Re-expressing an objective as a chain of pipeline stages.
//!
//! The non-root nodes are taken in topological order and cut into
//! contiguous groups, one per stage. A stage receives the packed vector of
//! every value that is still needed downstream (its "live set"), runs its
//! group, and emits the next live set. Graphs with fewer nodes than stages
//! are padded with scalar identity stages after the leaf.

use std::sync::Arc;

use super::Objective;
use crate::error::{invalid, Result};
use crate::graph::{accumulate, ComputationGraph, GraphBuilder, Identity, NodeFunction, NodeId};

#[derive(Debug)]
struct Stage {
    label: String,
    source: Arc<ComputationGraph>,
    /// Constant root values, indexed by node id.
    constants: Arc<Vec<Option<Vec<f64>>>>,
    inputs: Vec<NodeId>,
    ops: Vec<NodeId>,
    outputs: Vec<NodeId>,
    in_dims: [usize; 1],
    out_dim: usize,
}

impl Stage {
    fn run_forward(&self, input: &[f64]) -> Vec<Option<Vec<f64>>> {
        let mut local: Vec<Option<Vec<f64>>> = vec![None; self.source.len()];
        let mut at = 0;
        for &v in &self.inputs {
            let dim = self.source.node(v).output_dim();
            local[v] = Some(input[at..at + dim].to_vec());
            at += dim;
        }
        for &op in &self.ops {
            let f = self.source.function(op).expect("stage ops are function nodes");
            let out = {
                let args = self.args(&local, op);
                f.eval(&args)
            };
            local[op] = Some(out);
        }
        local
    }

    fn args<'a>(&'a self, local: &'a [Option<Vec<f64>>], op: NodeId) -> Vec<&'a [f64]> {
        self.source
            .parents(op)
            .iter()
            .map(|&p| {
                local[p]
                    .as_deref()
                    .or(self.constants[p].as_deref())
                    .expect("stage input available")
            })
            .collect()
    }
}

impl NodeFunction for Stage {
    fn name(&self) -> &str {
        &self.label
    }

    fn input_dims(&self) -> &[usize] {
        &self.in_dims
    }

    fn output_dim(&self) -> usize {
        self.out_dim
    }

    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        let local = self.run_forward(inputs[0]);
        let mut out = Vec::with_capacity(self.out_dim);
        for &v in &self.outputs {
            out.extend_from_slice(local[v].as_deref().expect("stage output computed"));
        }
        out
    }

    fn vjp(&self, inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        let local = self.run_forward(inputs[0]);
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.source.len()];
        let mut at = 0;
        for &v in &self.outputs {
            let dim = self.source.node(v).output_dim();
            accumulate(&mut adj[v], adjoint[at..at + dim].to_vec());
            at += dim;
        }
        for &op in self.ops.iter().rev() {
            let f = self.source.function(op).expect("stage ops are function nodes");
            let a = adj[op].take().unwrap_or_else(|| vec![0.0; f.output_dim()]);
            let partials = f.vjp(&self.args(&local, op), &a);
            for (&p, part) in self.source.parents(op).iter().zip(partials) {
                if self.constants[p].is_none() {
                    accumulate(&mut adj[p], part);
                }
            }
        }
        let mut g = Vec::with_capacity(self.in_dims[0]);
        for &v in &self.inputs {
            match adj[v].take() {
                Some(a) => g.extend(a),
                None => g.extend(std::iter::repeat_n(0.0, self.source.node(v).output_dim())),
            }
        }
        vec![g]
    }
}

/// Same function, re-expressed as a `stages`-long chain so that
/// `depth(result) = stages`. Values and gradients are unchanged.
pub fn chain_partition(objective: &Objective, stages: usize) -> Result<Objective> {
    if stages == 0 {
        return Err(invalid("need at least one stage"));
    }
    let graph = objective.shared_graph();
    let n = graph.len();
    let ops: Vec<NodeId> = graph
        .topological_order()
        .iter()
        .copied()
        .filter(|&i| !graph.node(i).is_root())
        .collect();
    let groups = ops.len().min(stages);

    let mut constants = vec![None; n];
    for (r, v) in objective.constant_roots() {
        constants[r] = Some(v.to_vec());
    }
    let constants = Arc::new(constants);

    // stage index (1-based) at which each node becomes available; params at 0
    let mut stage_of = vec![usize::MAX; n];
    for &p in objective.param_roots() {
        stage_of[p] = 0;
    }
    let cut = |g: usize| g * ops.len() / groups;
    for g in 0..groups {
        for &op in &ops[cut(g)..cut(g + 1)] {
            stage_of[op] = g + 1;
        }
    }
    let last_use = |v: NodeId| graph.children(v).iter().map(|&c| stage_of[c]).max().unwrap_or(0);

    let mut b = GraphBuilder::new();
    let mut cur = b.root("theta", objective.dim());
    let mut inputs: Vec<NodeId> = objective.param_roots().to_vec();
    for g in 0..groups {
        let s = g + 1;
        let outputs: Vec<NodeId> = if s == groups {
            vec![graph.leaf()]
        } else {
            (0..n)
                .filter(|&v| stage_of[v] <= s && last_use(v) > s)
                .collect()
        };
        let dim_of = |vs: &[NodeId]| vs.iter().map(|&v| graph.node(v).output_dim()).sum::<usize>();
        let stage = Stage {
            label: format!("stage{s}"),
            source: graph.clone(),
            constants: constants.clone(),
            in_dims: [dim_of(&inputs)],
            out_dim: dim_of(&outputs),
            inputs,
            ops: ops[cut(g)..cut(g + 1)].to_vec(),
            outputs: outputs.clone(),
        };
        cur = b.shared(format!("stage{s}"), Arc::new(stage), &[cur]);
        inputs = outputs;
    }
    for s in groups + 1..=stages {
        cur = b.node(format!("stage{s}"), Identity::new(1), &[cur]);
    }
    let chain = b.build()?;
    debug_assert_eq!(chain.depth(), stages);

    let mut out = Objective::new(objective.name(), chain, vec![0], vec![])?
        .with_name(format!("{}/chain{stages}", objective.name()));
    out.lipschitz = objective.lipschitz;
    out.smoothness = objective.smoothness;
    out.optimum_value = objective.optimum_value;
    out.optimum_point = objective.optimum_point.clone();
    out.regularization = objective.regularization;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{fig1_objective, linf_objective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn linf_twenty_stages() {
        let f = linf_objective(8, 1.0).unwrap();
        let c = chain_partition(&f, 20).unwrap();
        assert_eq!(c.depth(), 20);
        assert!(c.graph().chain().is_some());
        for p in random_points(8, 50, 1) {
            assert_eq!(c.value(&p).unwrap(), f.value(&p).unwrap());
            assert_eq!(c.gradient(&p).unwrap(), f.gradient(&p).unwrap());
        }
    }

    #[test]
    fn single_stage_and_multi_op_stages() {
        let f = fig1_objective();
        for stages in [1, 2, 3, 4, 6, 7, 50] {
            let c = chain_partition(&f, stages).unwrap();
            assert_eq!(c.depth(), stages);
            assert_eq!(c.graph().function_count(), stages);
            for p in random_points(2, 20, stages as u64) {
                assert_eq!(c.value(&p).unwrap(), f.value(&p).unwrap());
                assert_eq!(c.gradient(&p).unwrap(), f.gradient(&p).unwrap());
            }
        }
    }

    #[test]
    fn zero_stages_rejected() {
        assert!(chain_partition(&fig1_objective(), 0).is_err());
    }
}
