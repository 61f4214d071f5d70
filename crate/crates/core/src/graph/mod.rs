//! Directed acyclic computation graphs.
//!
//! Roots hold inputs (parameters or constants), every other node applies a
//! [`NodeFunction`] to the outputs of its parents, and a single scalar leaf
//! carries the objective value. A forward pass records every node value in a
//! [`ForwardTrace`]; a backward pass sweeps the trace in reverse topological
//! order, calling each node's vector-Jacobian product exactly once.

pub mod ops;

use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

pub use ops::*;

pub type NodeId = usize;

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// A local function `f_i` housed by one non-root node.
///
/// `vjp` returns one partial adjoint per parent, `∂_p f(u)ᵀ v`, each with the
/// dimension of that parent's output. At non-differentiable points it returns
/// a deterministic subgradient: `sign(0) = 0`, and for maxima the lowest
/// index among ties wins.
pub trait NodeFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    /// Dimension of each parent input, in parent order.
    fn input_dims(&self) -> &[usize];
    fn output_dim(&self) -> usize;
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64>;
    fn vjp(&self, inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>>;

    fn arity(&self) -> usize {
        self.input_dims().len()
    }
}

#[derive(Clone, Debug)]
pub enum NodeKind {
    Root { dim: usize },
    Function(Arc<dyn NodeFunction>),
}

#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub label: String,
    pub kind: NodeKind,
}

impl NodeSpec {
    pub fn root(label: impl Into<String>, dim: usize) -> Self {
        Self {
            label: label.into(),
            kind: NodeKind::Root { dim },
        }
    }

    pub fn function(label: impl Into<String>, f: impl NodeFunction + 'static) -> Self {
        Self {
            label: label.into(),
            kind: NodeKind::Function(Arc::new(f)),
        }
    }

    pub fn shared(label: impl Into<String>, f: Arc<dyn NodeFunction>) -> Self {
        Self {
            label: label.into(),
            kind: NodeKind::Function(f),
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            NodeKind::Root { dim } => *dim,
            NodeKind::Function(f) => f.output_dim(),
        }
    }

    pub fn is_root(&self) -> bool {
        matches!(self.kind, NodeKind::Root { .. })
    }
}

/// A validated computation graph with cached topological order and depth.
#[derive(Clone, Debug)]
pub struct ComputationGraph {
    id: u64,
    nodes: Vec<NodeSpec>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    roots: Vec<NodeId>,
    leaf: NodeId,
    topo: Vec<NodeId>,
    depth: usize,
}

impl ComputationGraph {
    /// Builds and validates a graph from node specs and per-node parent lists.
    ///
    /// Checks run in order: edge references, acyclicity, single leaf, arity,
    /// parent dimensions, scalar leaf.
    pub fn new(nodes: Vec<NodeSpec>, parents: Vec<Vec<NodeId>>) -> Result<Self> {
        let n = nodes.len();
        if parents.len() != n {
            return Err(Error::DimensionMismatch {
                context: "parent lists".into(),
                expected: n,
                found: parents.len(),
            });
        }
        for ps in &parents {
            if let Some(&bad) = ps.iter().find(|&&p| p >= n) {
                return Err(Error::UnknownNode { node: bad });
            }
        }
        if nodes.iter().all(NodeSpec::is_root) {
            return Err(Error::EmptyGraph);
        }

        let mut children = vec![Vec::new(); n];
        for (i, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(i);
            }
        }

        // Kahn's algorithm; nodes left over sit on a cycle.
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<NodeId> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            topo.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if topo.len() != n {
            let node = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
            return Err(Error::CycleDetected { node });
        }

        let leaves: Vec<NodeId> = (0..n).filter(|&i| children[i].is_empty()).collect();
        if leaves.len() != 1 {
            return Err(Error::MultipleLeaves {
                count: leaves.len(),
            });
        }
        let leaf = leaves[0];

        for (i, node) in nodes.iter().enumerate() {
            match &node.kind {
                NodeKind::Root { .. } => {
                    if !parents[i].is_empty() {
                        return Err(Error::ArityMismatch {
                            node: i,
                            expected: 0,
                            found: parents[i].len(),
                        });
                    }
                }
                NodeKind::Function(f) => {
                    if f.arity() == 0 || f.arity() != parents[i].len() {
                        return Err(Error::ArityMismatch {
                            node: i,
                            expected: f.arity(),
                            found: parents[i].len(),
                        });
                    }
                    for (&p, &want) in parents[i].iter().zip(f.input_dims()) {
                        let got = nodes[p].output_dim();
                        if got != want {
                            return Err(Error::DimensionMismatch {
                                context: format!("input of node {i} from node {p}"),
                                expected: want,
                                found: got,
                            });
                        }
                    }
                }
            }
        }

        let leaf_dim = nodes[leaf].output_dim();
        if leaf_dim != 1 || nodes[leaf].is_root() {
            return Err(Error::NonScalarLeaf {
                node: leaf,
                dim: leaf_dim,
            });
        }

        // Longest path counted in non-root nodes.
        let mut level = vec![0usize; n];
        for &i in &topo {
            if !nodes[i].is_root() {
                level[i] = 1 + parents[i].iter().map(|&p| level[p]).max().unwrap_or(0);
            }
        }
        let depth = level.iter().copied().max().unwrap_or(0);

        let roots = (0..n).filter(|&i| nodes[i].is_root()).collect();
        Ok(Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes,
            parents,
            children,
            roots,
            leaf,
            topo,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &NodeSpec {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id]
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn leaf(&self) -> NodeId {
        self.leaf
    }

    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }

    /// Number of non-root nodes.
    pub fn function_count(&self) -> usize {
        self.nodes.len() - self.roots.len()
    }

    /// Maximum number of non-root nodes on any directed path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// If the graph is a single root followed by a path of unary nodes,
    /// returns that path in order (stage 1 first).
    pub fn chain(&self) -> Option<Vec<NodeId>> {
        if self.roots.len() != 1 {
            return None;
        }
        let mut path = Vec::with_capacity(self.function_count());
        let mut cur = self.roots[0];
        loop {
            match self.children[cur].as_slice() {
                [] => break,
                [next] => {
                    if self.parents[*next].len() != 1 {
                        return None;
                    }
                    path.push(*next);
                    cur = *next;
                }
                _ => return None,
            }
        }
        (path.len() == self.function_count()).then_some(path)
    }

    pub fn function(&self, id: NodeId) -> Option<&Arc<dyn NodeFunction>> {
        match &self.nodes[id].kind {
            NodeKind::Function(f) => Some(f),
            NodeKind::Root { .. } => None,
        }
    }

    /// Evaluates every node. `inputs` holds one vector per root, in root order.
    pub fn forward(&self, inputs: &[&[f64]]) -> Result<ForwardTrace> {
        if inputs.len() != self.roots.len() {
            return Err(Error::DimensionMismatch {
                context: "number of root inputs".into(),
                expected: self.roots.len(),
                found: inputs.len(),
            });
        }
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        for (&r, x) in self.roots.iter().zip(inputs) {
            let dim = self.nodes[r].output_dim();
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("root '{}'", self.nodes[r].label),
                    expected: dim,
                    found: x.len(),
                });
            }
            values[r] = x.to_vec();
        }
        for &i in &self.topo {
            if let NodeKind::Function(f) = &self.nodes[i].kind {
                let args: Vec<&[f64]> = self.parents[i].iter().map(|&p| values[p].as_slice()).collect();
                values[i] = f.eval(&args);
            }
        }
        Ok(ForwardTrace {
            graph_id: self.id,
            values,
            leaf: self.leaf,
        })
    }

    /// Reverse-mode sweep seeded with adjoint 1 at the leaf. Returns the
    /// gradient with respect to each root, in root order.
    pub fn backward(&self, trace: &ForwardTrace) -> Result<Vec<Vec<f64>>> {
        if trace.graph_id != self.id || trace.values.len() != self.nodes.len() {
            return Err(Error::StaleTrace);
        }
        let values = &trace.values;
        let mut adjoints: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adjoints[self.leaf] = Some(vec![1.0]);
        for &i in self.topo.iter().rev() {
            let NodeKind::Function(f) = &self.nodes[i].kind else {
                continue;
            };
            let adj = adjoints[i]
                .take()
                .unwrap_or_else(|| vec![0.0; f.output_dim()]);
            let args: Vec<&[f64]> = self.parents[i].iter().map(|&p| values[p].as_slice()).collect();
            let partials = f.vjp(&args, &adj);
            for (&p, part) in self.parents[i].iter().zip(partials) {
                accumulate(&mut adjoints[p], part);
            }
        }
        Ok(self
            .roots
            .iter()
            .map(|&r| {
                adjoints[r]
                    .take()
                    .unwrap_or_else(|| vec![0.0; self.nodes[r].output_dim()])
            })
            .collect())
    }
}

/// Adds `part` into an adjoint slot; the first contribution is moved in
/// as-is so a single-child adjoint is bit-identical to its source.
pub(crate) fn accumulate(slot: &mut Option<Vec<f64>>, part: Vec<f64>) {
    match slot {
        Some(acc) => {
            for (a, p) in acc.iter_mut().zip(&part) {
                *a += p;
            }
        }
        None => *slot = Some(part),
    }
}

/// Per-node values `g_i(x)` from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    graph_id: u64,
    values: Vec<Vec<f64>>,
    leaf: NodeId,
}

impl ForwardTrace {
    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.values[id]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// The scalar `f_G(x)`.
    pub fn output(&self) -> f64 {
        self.values[self.leaf][0]
    }
}

/// Incremental constructor that assigns node ids in insertion order.
#[derive(Default)]
pub struct GraphBuilder {
    nodes: Vec<NodeSpec>,
    parents: Vec<Vec<NodeId>>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn root(&mut self, label: impl Into<String>, dim: usize) -> NodeId {
        self.nodes.push(NodeSpec::root(label, dim));
        self.parents.push(Vec::new());
        self.nodes.len() - 1
    }

    pub fn node(
        &mut self,
        label: impl Into<String>,
        f: impl NodeFunction + 'static,
        parents: &[NodeId],
    ) -> NodeId {
        self.nodes.push(NodeSpec::function(label, f));
        self.parents.push(parents.to_vec());
        self.nodes.len() - 1
    }

    pub fn shared(
        &mut self,
        label: impl Into<String>,
        f: Arc<dyn NodeFunction>,
        parents: &[NodeId],
    ) -> NodeId {
        self.nodes.push(NodeSpec::shared(label, f));
        self.parents.push(parents.to_vec());
        self.nodes.len() - 1
    }

    pub fn into_parts(self) -> (Vec<NodeSpec>, Vec<Vec<NodeId>>) {
        (self.nodes, self.parents)
    }

    pub fn build(self) -> Result<ComputationGraph> {
        ComputationGraph::new(self.nodes, self.parents)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    fn fig1() -> (Vec<NodeSpec>, Vec<Vec<NodeId>>) {
        let mut b = GraphBuilder::new();
        let x = b.root("g0", 1);
        let w = b.root("g2", 1);
        let g1 = b.node("g1", Scale::new(0.5, 1), &[x]);
        let g3 = b.node("g3", Sin::new(1), &[x]);
        let g4 = b.node("g4", SubProduct::new(1), &[g1, w, g3]);
        let g5 = b.node("g5", Softplus::new(1), &[g1]);
        let g6 = b.node("g6", Abs::new(1), &[g4]);
        b.node("g7", Add::new(1), &[g5, g6]);
        b.into_parts()
    }

    fn chain(len: usize) -> ComputationGraph {
        let mut b = GraphBuilder::new();
        let mut cur = b.root("x", 1);
        for i in 0..len {
            cur = b.node(format!("id{i}"), Identity::new(1), &[cur]);
        }
        b.build().unwrap()
    }

    fn fd_grad(g: &ComputationGraph, x: &[f64], w: &[f64]) -> [f64; 2] {
        let h = 1e-6;
        let f = |a: f64, b: f64| g.forward(&[&[a], &[b]]).unwrap().output();
        [
            (f(x[0] + h, w[0]) - f(x[0] - h, w[0])) / (2.0 * h),
            (f(x[0], w[0] + h) - f(x[0], w[0] - h)) / (2.0 * h),
        ]
    }

    #[test]
    fn fig1_structure() {
        let (nodes, parents) = fig1();
        let g = ComputationGraph::new(nodes, parents).unwrap();
        assert_eq!(g.roots().len(), 2);
        assert_eq!(g.function_count(), 6);
        assert_eq!(g.node(g.leaf()).label, "g7");
        assert_eq!(g.depth(), 4);
        assert!(g.chain().is_none());
    }

    /// Brute-force enumeration of every directed path from every node.
    fn longest_path_brute(g: &ComputationGraph) -> usize {
        fn walk(g: &ComputationGraph, i: NodeId) -> usize {
            let own = usize::from(!g.node(i).is_root());
            own + g.children(i).iter().map(|&c| walk(g, c)).max().unwrap_or(0)
        }
        (0..g.len()).map(|i| walk(g, i)).max().unwrap()
    }

    #[test]
    fn fig1_depth_matches_path_enumeration() {
        let (nodes, parents) = fig1();
        let g = ComputationGraph::new(nodes, parents).unwrap();
        assert_eq!(longest_path_brute(&g), 4);
        assert_eq!(g.depth(), longest_path_brute(&g));
    }

    #[test]
    fn back_edge_is_a_cycle() {
        let (nodes, mut parents) = fig1();
        // g7 -> g4
        parents[4].push(7);
        let err = ComputationGraph::new(nodes, parents).unwrap_err();
        assert!(matches!(err, Error::CycleDetected { .. }), "{err:?}");
    }

    #[test]
    fn structural_errors() {
        // two sinks
        let mut b = GraphBuilder::new();
        let x = b.root("x", 1);
        b.node("a", Identity::new(1), &[x]);
        b.node("b", Identity::new(1), &[x]);
        assert!(matches!(b.build(), Err(Error::MultipleLeaves { count: 2 })));

        // wrong parent count
        let nodes = vec![NodeSpec::root("x", 1), NodeSpec::function("s", Add::new(1))];
        let err = ComputationGraph::new(nodes, vec![vec![], vec![0]]).unwrap_err();
        assert!(matches!(err, Error::ArityMismatch { expected: 2, found: 1, .. }));

        // vector leaf
        let mut b = GraphBuilder::new();
        let x = b.root("x", 3);
        b.node("id", Identity::new(3), &[x]);
        assert!(matches!(b.build(), Err(Error::NonScalarLeaf { dim: 3, .. })));

        let mut b = GraphBuilder::new();
        let x = b.root("x", 2);
        b.node("s", Sin::new(3), &[x]);
        assert!(matches!(b.build(), Err(Error::DimensionMismatch { .. })));

        let err = ComputationGraph::new(vec![NodeSpec::root("x", 1)], vec![vec![]]).unwrap_err();
        assert_eq!(err, Error::EmptyGraph);
    }

    #[test]
    fn smallest_graph() {
        let g = chain(1);
        assert_eq!(g.depth(), 1);
        let t = g.forward(&[&[2.5]]).unwrap();
        assert_eq!(t.output(), 2.5);
        assert_eq!(g.backward(&t).unwrap(), vec![vec![1.0]]);
        assert_eq!(g.chain().unwrap(), vec![1]);
    }

    #[test]
    fn chain_depth() {
        for d in 1..=64 {
            assert_eq!(chain(d).depth(), d);
        }
    }

    #[test]
    fn fig1_forward_values() {
        let (nodes, parents) = fig1();
        let g = ComputationGraph::new(nodes, parents).unwrap();
        let out = g.forward(&[&[0.0], &[1.0]]).unwrap().output();
        assert!((out - std::f64::consts::LN_2).abs() < 1e-15);
        let pi = std::f64::consts::PI;
        let out = g.forward(&[&[pi], &[2.0]]).unwrap().output();
        let expected = (1.0 + (pi / 2.0).exp()).ln() + (pi / 2.0 - 2.0 * pi.sin()).abs();
        assert!((out - expected).abs() < 1e-12);
        assert!((out - 3.330_459_059_681_836).abs() < 1e-12);
    }

    #[test]
    fn fig1_backward_matches_finite_differences() {
        let (nodes, parents) = fig1();
        let g = ComputationGraph::new(nodes, parents).unwrap();
        let t = g.forward(&[&[1.0], &[0.3]]).unwrap();
        let grad = g.backward(&t).unwrap();
        let fd = fd_grad(&g, &[1.0], &[0.3]);
        for (a, b) in [grad[0][0], grad[1][0]].iter().zip(fd) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn kink_subgradient_is_zero() {
        let mut b = GraphBuilder::new();
        let x = b.root("x", 1);
        b.node("abs", Abs::new(1), &[x]);
        let g = b.build().unwrap();
        let t = g.forward(&[&[0.0]]).unwrap();
        assert_eq!(g.backward(&t).unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn linear_gradient_is_exact() {
        let a = vec![1.5, -2.0, 0.25];
        let mut b = GraphBuilder::new();
        let x = b.root("x", 3);
        b.node("dot", Dense::new(3, 1, a.clone(), vec![0.0]), &[x]);
        let g = b.build().unwrap();
        let t = g.forward(&[&[0.3, 0.1, -7.0]]).unwrap();
        assert_eq!(g.backward(&t).unwrap()[0], a);
    }

    #[test]
    fn stale_trace_rejected() {
        let g1 = chain(2);
        let g2 = chain(2);
        let t = g1.forward(&[&[1.0]]).unwrap();
        assert_eq!(g2.backward(&t).unwrap_err(), Error::StaleTrace);
        assert!(matches!(g1.forward(&[&[1.0, 2.0]]), Err(Error::DimensionMismatch { .. })));
    }

    #[derive(Debug)]
    struct Counting {
        inner: Identity,
        calls: Arc<AtomicUsize>,
    }

    impl NodeFunction for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        fn input_dims(&self) -> &[usize] {
            self.inner.input_dims()
        }
        fn output_dim(&self) -> usize {
            self.inner.output_dim()
        }
        fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
            self.inner.eval(inputs)
        }
        fn vjp(&self, inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.vjp(inputs, adjoint)
        }
    }

    #[test]
    fn one_vjp_per_node_per_sweep() {
        let calls = Arc::new(AtomicUsize::new(0));
        let mut b = GraphBuilder::new();
        let x = b.root("x", 1);
        let a = b.node("a", Counting { inner: Identity::new(1), calls: calls.clone() }, &[x]);
        let c = b.node("c", Counting { inner: Identity::new(1), calls: calls.clone() }, &[a]);
        let d = b.node("d", Counting { inner: Identity::new(1), calls: calls.clone() }, &[a]);
        b.node("sum", Add::new(1), &[c, d]);
        let g = b.build().unwrap();
        let t = g.forward(&[&[1.0]]).unwrap();
        let grad = g.backward(&t).unwrap();
        assert_eq!(grad[0], vec![2.0]);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }
}
