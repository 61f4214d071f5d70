//! Benchmark objectives expressed as computation graphs.
//!
//! Every objective starts from `θ₀ = 0`. Parameters are the designated
//! parameter roots of the graph, concatenated in order; any other root is a
//! constant baked into the objective.

mod finite_sum;
mod network;
mod partition;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{
    Abs, Add, ComputationGraph, Dense, GraphBuilder, HalfSquaredNorm, MaxAbs, NodeId, Scale, Shift,
    Sin, Softplus, SubProduct,
};
use crate::linalg::{norm, sample_in_ball};

pub use finite_sum::{finite_sum, FiniteSumObjective};
pub use network::{
    desk_attack_instance, margin_attack_objective, margin_attack_perturbation_objective, NetSpec,
    PiecewiseLinearNet,
};
pub use partition::chain_partition;

#[derive(Clone, Debug)]
enum RootSource {
    Param { offset: usize, len: usize },
    Constant(usize),
}

/// A scalar objective over `R^d` backed by a computation graph.
#[derive(Clone, Debug)]
pub struct Objective {
    name: String,
    graph: Arc<ComputationGraph>,
    params: Vec<NodeId>,
    constants: Vec<Vec<f64>>,
    sources: Vec<RootSource>,
    param_dim: usize,
    /// Lipschitz constant `L`, when known.
    pub lipschitz: Option<f64>,
    /// Gradient Lipschitz constant `β`, when known.
    pub smoothness: Option<f64>,
    pub optimum_value: Option<f64>,
    pub optimum_point: Option<Vec<f64>>,
    /// Penalty weight `λ` for regularized objectives.
    pub regularization: Option<f64>,
}

impl Objective {
    /// `params` lists the parameter roots in the order they are packed into
    /// `θ`; `constants` assigns a fixed value to every other root.
    pub fn new(
        name: impl Into<String>,
        graph: ComputationGraph,
        params: Vec<NodeId>,
        constants: Vec<(NodeId, Vec<f64>)>,
    ) -> Result<Self> {
        let mut offsets = vec![None; graph.len()];
        let mut param_dim = 0;
        for &p in &params {
            if !graph.roots().contains(&p) || offsets[p].is_some() {
                return Err(invalid(format!("node {p} is not a free root")));
            }
            let len = graph.node(p).output_dim();
            offsets[p] = Some(RootSource::Param {
                offset: param_dim,
                len,
            });
            param_dim += len;
        }
        let mut values = Vec::with_capacity(constants.len());
        for (node, value) in constants {
            if !graph.roots().contains(&node) || offsets[node].is_some() {
                return Err(invalid(format!("node {node} is not a free root")));
            }
            let dim = graph.node(node).output_dim();
            if value.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("constant root {node}"),
                    expected: dim,
                    found: value.len(),
                });
            }
            offsets[node] = Some(RootSource::Constant(values.len()));
            values.push(value);
        }
        let sources = graph
            .roots()
            .iter()
            .map(|&r| offsets[r].clone().ok_or_else(|| invalid(format!("root {r} unassigned"))))
            .collect::<Result<Vec<_>>>()?;
        if param_dim == 0 {
            return Err(invalid("objective needs at least one parameter"));
        }
        Ok(Self {
            name: name.into(),
            graph: Arc::new(graph),
            params,
            constants: values,
            sources,
            param_dim,
            lipschitz: None,
            smoothness: None,
            optimum_value: None,
            optimum_point: None,
            regularization: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &ComputationGraph {
        &self.graph
    }

    pub(crate) fn shared_graph(&self) -> Arc<ComputationGraph> {
        self.graph.clone()
    }

    pub fn param_roots(&self) -> &[NodeId] {
        &self.params
    }

    /// Value of each constant root, keyed by node id.
    pub fn constant_roots(&self) -> Vec<(NodeId, &[f64])> {
        self.graph
            .roots()
            .iter()
            .zip(&self.sources)
            .filter_map(|(&r, s)| match s {
                RootSource::Constant(i) => Some((r, self.constants[*i].as_slice())),
                RootSource::Param { .. } => None,
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.param_dim
    }

    pub fn depth(&self) -> usize {
        self.graph.depth()
    }

    /// `R = ‖θ₀ − θ*‖` with `θ₀ = 0`.
    pub fn radius(&self) -> Option<f64> {
        self.optimum_point.as_deref().map(norm)
    }

    /// `D = f(θ₀) − f(θ*)`.
    pub fn initial_gap(&self) -> Option<f64> {
        let f0 = self.value(&vec![0.0; self.param_dim]).ok()?;
        self.optimum_value.map(|f| f0 - f)
    }

    fn root_inputs<'a>(&'a self, theta: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        if theta.len() != self.param_dim {
            return Err(Error::DimensionMismatch {
                context: format!("parameter of '{}'", self.name),
                expected: self.param_dim,
                found: theta.len(),
            });
        }
        Ok(self
            .sources
            .iter()
            .map(|s| match s {
                RootSource::Param { offset, len } => &theta[*offset..offset + len],
                RootSource::Constant(i) => self.constants[*i].as_slice(),
            })
            .collect())
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        let inputs = self.root_inputs(theta)?;
        Ok(self.graph.forward(&inputs)?.output())
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.value_and_gradient(theta).map(|(_, g)| g)
    }

    /// One forward and one backward pass; the gradient is taken with
    /// respect to the parameter roots only.
    pub fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let inputs = self.root_inputs(theta)?;
        let trace = self.graph.forward(&inputs)?;
        let per_root = self.graph.backward(&trace)?;
        let mut grad = vec![0.0; self.param_dim];
        for (g, s) in per_root.iter().zip(&self.sources) {
            if let RootSource::Param { offset, len } = s {
                grad[*offset..offset + len].copy_from_slice(g);
            }
        }
        Ok((trace.output(), grad))
    }

    pub(crate) fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// `f(x, ω) = ln(1 + e^{x/2}) + |x/2 − ω sin x|`, node for node as in the
/// seven-node example graph. Parameters are `θ = (x, ω)`.
pub fn fig1_objective() -> Objective {
    let mut b = GraphBuilder::new();
    let x = b.root("g0", 1);
    let w = b.root("g2", 1);
    let g1 = b.node("g1", Scale::new(0.5, 1), &[x]);
    let g3 = b.node("g3", Sin::new(1), &[x]);
    let g4 = b.node("g4", SubProduct::new(1), &[g1, w, g3]);
    let g5 = b.node("g5", Softplus::new(1), &[g1]);
    let g6 = b.node("g6", Abs::new(1), &[g4]);
    b.node("g7", Add::new(1), &[g5, g6]);
    let graph = b.build().expect("fig1 graph is valid");
    Objective::new("fig1", graph, vec![x, w], vec![]).expect("fig1 roots")
}

/// `f(θ) = L · max_i |θ_i|`, minimized at 0.
pub fn linf_objective(d: usize, lipschitz: f64) -> Result<Objective> {
    linf_objective_centered(lipschitz, vec![0.0; d])
}

/// `f(θ) = L · max_i |θ_i − c_i|`, minimized at `c` with value 0.
pub fn linf_objective_centered(lipschitz: f64, center: Vec<f64>) -> Result<Objective> {
    let d = center.len();
    if d == 0 || !(lipschitz > 0.0) {
        return Err(invalid("linf objective needs d >= 1 and L > 0"));
    }
    let mut b = GraphBuilder::new();
    let theta = b.root("theta", d);
    let shifted = b.node("shift", Shift::new(center.clone()), &[theta]);
    let m = b.node("max_abs", MaxAbs::new(d), &[shifted]);
    b.node("scale", Scale::new(lipschitz, 1), &[m]);
    let mut obj = Objective::new("linf", b.build()?, vec![theta], vec![])?;
    obj.lipschitz = Some(lipschitz);
    obj.optimum_value = Some(0.0);
    obj.optimum_point = Some(center);
    Ok(obj)
}

/// `L · max_i |θ_i − c_i|` with `c = R e₁`, so that `‖θ₀ − θ*‖ = R`.
pub fn linf_objective_with_radius(d: usize, lipschitz: f64, radius: f64) -> Result<Objective> {
    if d == 0 {
        return Err(invalid("d must be >= 1"));
    }
    let mut center = vec![0.0; d];
    center[0] = radius;
    linf_objective_centered(lipschitz, center)
}

/// `f(θ) = (β/2) ‖θ − c‖²` with `c = (1, …, 1)/√d`.
pub fn quadratic_objective(d: usize, beta: f64) -> Result<Objective> {
    if d == 0 {
        return Err(invalid("d must be >= 1"));
    }
    let c = 1.0 / (d as f64).sqrt();
    quadratic_objective_centered(beta, vec![c; d])
}

pub fn quadratic_objective_centered(beta: f64, center: Vec<f64>) -> Result<Objective> {
    let d = center.len();
    if d == 0 || !(beta > 0.0) {
        return Err(invalid("quadratic objective needs d >= 1 and beta > 0"));
    }
    let mut b = GraphBuilder::new();
    let theta = b.root("theta", d);
    let shifted = b.node("shift", Shift::new(center.clone()), &[theta]);
    b.node("half_sq_norm", HalfSquaredNorm::new(beta, d), &[shifted]);
    let mut obj = Objective::new("quadratic", b.build()?, vec![theta], vec![])?;
    obj.smoothness = Some(beta);
    obj.optimum_value = Some(0.0);
    obj.optimum_point = Some(center);
    Ok(obj)
}

/// `f(θ) = aᵀθ + b`. Unbounded below unless `a = 0`.
pub fn affine_objective(a: Vec<f64>, offset: f64) -> Result<Objective> {
    let d = a.len();
    if d == 0 {
        return Err(invalid("d must be >= 1"));
    }
    let l = norm(&a);
    let mut b = GraphBuilder::new();
    let theta = b.root("theta", d);
    b.node("dot", Dense::new(d, 1, a, vec![offset]), &[theta]);
    let mut obj = Objective::new("affine", b.build()?, vec![theta], vec![])?;
    obj.lipschitz = Some(l);
    obj.smoothness = Some(0.0);
    if l == 0.0 {
        obj.optimum_value = Some(offset);
        obj.optimum_point = Some(vec![0.0; d]);
    }
    Ok(obj)
}

/// Lower estimate of the Lipschitz constant: the largest secant slope
/// `|f(a) − f(b)| / ‖a − b‖` over `n_pairs` pairs drawn uniformly from the
/// ball of the given radius around `θ₀ = 0`.
pub fn estimate_lipschitz(objective: &Objective, n_pairs: usize, radius: f64, seed: u64) -> Result<f64> {
    if n_pairs == 0 || !(radius > 0.0) {
        return Err(invalid("need n_pairs >= 1 and radius > 0"));
    }
    let d = objective.dim();
    let center = vec![0.0; d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..n_pairs {
        let a = sample_in_ball(&mut rng, &center, radius);
        let b = sample_in_ball(&mut rng, &center, radius);
        let dist = norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        if dist == 0.0 {
            continue;
        }
        let slope = (objective.value(&a)? - objective.value(&b)?).abs() / dist;
        best = best.max(slope);
    }
    Ok(best)
}
