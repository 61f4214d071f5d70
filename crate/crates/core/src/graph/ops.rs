//! Node function registry.

use super::NodeFunction;

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

macro_rules! elementwise {
    ($(#[$doc:meta])* $name:ident, $label:literal, |$u:ident| $f:expr, |$x:ident| $df:expr) => {
        $(#[$doc])*
        #[derive(Clone, Debug)]
        pub struct $name {
            dims: [usize; 1],
        }

        impl $name {
            pub fn new(dim: usize) -> Self {
                Self { dims: [dim] }
            }
        }

        impl NodeFunction for $name {
            fn name(&self) -> &str {
                $label
            }
            fn input_dims(&self) -> &[usize] {
                &self.dims
            }
            fn output_dim(&self) -> usize {
                self.dims[0]
            }
            fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
                inputs[0].iter().map(|&$u| $f).collect()
            }
            fn vjp(&self, inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
                vec![inputs[0]
                    .iter()
                    .zip(adjoint)
                    .map(|(&$x, &v)| ($df) * v)
                    .collect()]
            }
        }
    };
}

elementwise!(
    /// `u ↦ u`.
    Identity, "identity", |u| u, |_x| 1.0
);
elementwise!(Sin, "sin", |u| u.sin(), |x| x.cos());
elementwise!(
    /// `ln(1 + e^u)`, evaluated without overflow.
    Softplus,
    "softplus",
    |u| if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() },
    |x| if x >= 0.0 { 1.0 / (1.0 + (-x).exp()) } else { let e = x.exp(); e / (1.0 + e) }
);
elementwise!(
    /// `|u|` with subgradient `sign(0) = 0`.
    Abs, "abs", |u| u.abs(), |x| sign(x)
);
elementwise!(
    /// `max(0, u)`; derivative 0 at the kink.
    Relu, "relu", |u| u.max(0.0), |x| if x > 0.0 { 1.0 } else { 0.0 }
);

/// `c · u`.
#[derive(Clone, Debug)]
pub struct Scale {
    factor: f64,
    dims: [usize; 1],
}

impl Scale {
    pub fn new(factor: f64, dim: usize) -> Self {
        Self {
            factor,
            dims: [dim],
        }
    }
}

impl NodeFunction for Scale {
    fn name(&self) -> &str {
        "scale"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        self.dims[0]
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        inputs[0].iter().map(|u| self.factor * u).collect()
    }
    fn vjp(&self, _inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        vec![adjoint.iter().map(|v| self.factor * v).collect()]
    }
}

/// `u − c` for a fixed offset `c`.
#[derive(Clone, Debug)]
pub struct Shift {
    offset: Vec<f64>,
    dims: [usize; 1],
}

impl Shift {
    pub fn new(offset: Vec<f64>) -> Self {
        let dims = [offset.len()];
        Self { offset, dims }
    }
}

impl NodeFunction for Shift {
    fn name(&self) -> &str {
        "shift"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        self.dims[0]
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        inputs[0].iter().zip(&self.offset).map(|(u, c)| u - c).collect()
    }
    fn vjp(&self, _inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        vec![adjoint.to_vec()]
    }
}

/// `a + b`.
#[derive(Clone, Debug)]
pub struct Add {
    dims: [usize; 2],
}

impl Add {
    pub fn new(dim: usize) -> Self {
        Self { dims: [dim, dim] }
    }
}

impl NodeFunction for Add {
    fn name(&self) -> &str {
        "add"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        self.dims[0]
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        inputs[0].iter().zip(inputs[1]).map(|(a, b)| a + b).collect()
    }
    fn vjp(&self, _inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        vec![adjoint.to_vec(), adjoint.to_vec()]
    }
}

/// `a − b`.
#[derive(Clone, Debug)]
pub struct Sub {
    dims: [usize; 2],
}

impl Sub {
    pub fn new(dim: usize) -> Self {
        Self { dims: [dim, dim] }
    }
}

impl NodeFunction for Sub {
    fn name(&self) -> &str {
        "sub"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        self.dims[0]
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        inputs[0].iter().zip(inputs[1]).map(|(a, b)| a - b).collect()
    }
    fn vjp(&self, _inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        vec![adjoint.to_vec(), adjoint.iter().map(|v| -v).collect()]
    }
}

/// `a − b ⊙ c`, the three-parent node of the Fig. 1 style example.
#[derive(Clone, Debug)]
pub struct SubProduct {
    dims: [usize; 3],
}

impl SubProduct {
    pub fn new(dim: usize) -> Self {
        Self {
            dims: [dim, dim, dim],
        }
    }
}

impl NodeFunction for SubProduct {
    fn name(&self) -> &str {
        "sub_product"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        self.dims[0]
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        (0..self.dims[0])
            .map(|j| inputs[0][j] - inputs[1][j] * inputs[2][j])
            .collect()
    }
    fn vjp(&self, inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        let (b, c) = (inputs[1], inputs[2]);
        vec![
            adjoint.to_vec(),
            adjoint.iter().zip(c).map(|(v, c)| -v * c).collect(),
            adjoint.iter().zip(b).map(|(v, b)| -v * b).collect(),
        ]
    }
}

/// `max_i |u_i|`. The subgradient picks the lowest index among maximal
/// entries and uses `sign(0) = 0`.
#[derive(Clone, Debug)]
pub struct MaxAbs {
    dims: [usize; 1],
}

impl MaxAbs {
    pub fn new(dim: usize) -> Self {
        Self { dims: [dim] }
    }

    fn argmax(u: &[f64]) -> usize {
        let mut best = 0;
        for (i, x) in u.iter().enumerate().skip(1) {
            if x.abs() > u[best].abs() {
                best = i;
            }
        }
        best
    }
}

impl NodeFunction for MaxAbs {
    fn name(&self) -> &str {
        "max_abs"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        let u = inputs[0];
        vec![u[Self::argmax(u)].abs()]
    }
    fn vjp(&self, inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        let u = inputs[0];
        let mut g = vec![0.0; u.len()];
        let k = Self::argmax(u);
        g[k] = sign(u[k]) * adjoint[0];
        vec![g]
    }
}

/// `(s/2) ‖u‖²`.
#[derive(Clone, Debug)]
pub struct HalfSquaredNorm {
    scale: f64,
    dims: [usize; 1],
}

impl HalfSquaredNorm {
    pub fn new(scale: f64, dim: usize) -> Self {
        Self { scale, dims: [dim] }
    }
}

impl NodeFunction for HalfSquaredNorm {
    fn name(&self) -> &str {
        "half_squared_norm"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        vec![0.5 * self.scale * inputs[0].iter().map(|u| u * u).sum::<f64>()]
    }
    fn vjp(&self, inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        vec![inputs[0].iter().map(|u| self.scale * u * adjoint[0]).collect()]
    }
}

/// Affine map `W u + b` with row-major `W` of shape `out × in`.
#[derive(Clone, Debug)]
pub struct Dense {
    weights: Vec<f64>,
    bias: Vec<f64>,
    dims: [usize; 1],
}

impl Dense {
    pub fn new(input: usize, output: usize, weights: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(weights.len(), input * output, "weight shape");
        assert_eq!(bias.len(), output, "bias shape");
        Self {
            weights,
            bias,
            dims: [input],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.dims[0];
        self.weights
            .chunks_exact(n)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(u).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

impl NodeFunction for Dense {
    fn name(&self) -> &str {
        "dense"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        self.bias.len()
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        self.apply(inputs[0])
    }
    fn vjp(&self, _inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dims[0];
        let mut g = vec![0.0; n];
        for (row, v) in self.weights.chunks_exact(n).zip(adjoint) {
            for (gi, w) in g.iter_mut().zip(row) {
                *gi += w * v;
            }
        }
        vec![g]
    }
}

/// Multi-class hinge loss `Σ_{i≠y} max{0, 1 − z_y + z_i}` for a fixed target `y`.
/// An inactive-at-zero hinge contributes no gradient.
#[derive(Clone, Debug)]
pub struct MultiMargin {
    target: usize,
    dims: [usize; 1],
}

impl MultiMargin {
    pub fn new(classes: usize, target: usize) -> Self {
        assert!(target < classes, "target label out of range");
        Self {
            target,
            dims: [classes],
        }
    }
}

impl NodeFunction for MultiMargin {
    fn name(&self) -> &str {
        "multi_margin"
    }
    fn input_dims(&self) -> &[usize] {
        &self.dims
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval(&self, inputs: &[&[f64]]) -> Vec<f64> {
        let z = inputs[0];
        let zy = z[self.target];
        let total = z
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.target)
            .map(|(_, zi)| (1.0 - zy + zi).max(0.0))
            .sum();
        vec![total]
    }
    fn vjp(&self, inputs: &[&[f64]], adjoint: &[f64]) -> Vec<Vec<f64>> {
        let z = inputs[0];
        let zy = z[self.target];
        let mut g = vec![0.0; z.len()];
        for (i, zi) in z.iter().enumerate() {
            if i != self.target && 1.0 - zy + zi > 0.0 {
                g[i] += adjoint[0];
                g[self.target] -= adjoint[0];
            }
        }
        vec![g]
    }
}
