//! Desk-scale adversarial attack objective.
//!
//! A small fixed-weight ReLU network stands in for a pre-trained image
//! classifier. The optimization variable is the attacked input `x̃`:
//!
//! `f(x̃) = Σ_{i≠y} max{0, 1 − z_y(x̃) + z_i(x̃)} + λ ‖x̃ − x‖∞`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Objective;
use crate::error::{invalid, Error, Result};
use crate::graph::{Add, Dense, GraphBuilder, MaxAbs, MultiMargin, NodeFunction as _, Relu, Scale, Sub};

/// Shape and initialization of a [`PiecewiseLinearNet`].
#[derive(Clone, Debug, PartialEq)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    /// Weight scale relative to He initialization.
    pub gain: f64,
    pub seed: u64,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            input_dim: 32,
            hidden: vec![32, 32],
            classes: 10,
            gain: 4.0,
            seed: 2024,
        }
    }
}

/// Dense layers with ReLU between them and linear logits at the end.
#[derive(Clone, Debug)]
pub struct PiecewiseLinearNet {
    layers: Vec<Dense>,
}

impl PiecewiseLinearNet {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].bias().len() != pair[1].input_dims()[0] {
                return Err(invalid("consecutive layer widths disagree"));
            }
        }
        if layers
            .iter()
            .any(|l| l.weights().iter().chain(l.bias()).any(|w| !w.is_finite()))
        {
            return Err(invalid("network weights must be finite"));
        }
        Ok(Self { layers })
    }

    pub fn seeded(spec: &NetSpec) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut widths = vec![spec.input_dim];
        widths.extend(&spec.hidden);
        widths.push(spec.classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = spec.gain * (2.0 / fan_in as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let bias = (0..fan_out)
                    .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Dense::new(fan_in, fan_out, weights, bias)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dims()[0]
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map(|l| l.bias().len()).unwrap_or(0)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(&h);
            if i + 1 < self.layers.len() {
                h.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        h
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = 0;
        for (i, v) in z.iter().enumerate() {
            if *v > z[best] {
                best = i;
            }
        }
        best
    }
}

/// A seeded network, a synthetic base input in `[0, 1]^n`, and a target
/// label one class past the network's prediction.
pub fn desk_attack_instance(spec: &NetSpec) -> Result<(PiecewiseLinearNet, Vec<f64>, usize)> {
    let net = PiecewiseLinearNet::seeded(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let x: Vec<f64> = (0..spec.input_dim).map(|_| rng.gen::<f64>()).collect();
    let y = (net.predict(&x) + 1) % spec.classes;
    Ok((net, x, y))
}

/// Multi-margin attack loss with an `ℓ∞` penalty; the parameter is the
/// attacked input `x̃` itself.
pub fn margin_attack_objective(
    net: &PiecewiseLinearNet,
    x: &[f64],
    target: usize,
    lambda: f64,
) -> Result<Objective> {
    build_attack(net, x, target, lambda, false)
}

/// The same loss parameterized by the perturbation `θ = x̃ − x`, so that
/// `θ₀ = 0` is the unperturbed input.
pub fn margin_attack_perturbation_objective(
    net: &PiecewiseLinearNet,
    x: &[f64],
    target: usize,
    lambda: f64,
) -> Result<Objective> {
    build_attack(net, x, target, lambda, true)
}

fn build_attack(
    net: &PiecewiseLinearNet,
    x: &[f64],
    target: usize,
    lambda: f64,
    perturbation: bool,
) -> Result<Objective> {
    let classes = net.classes();
    if target >= classes {
        return Err(Error::LabelOutOfRange {
            label: target,
            classes,
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda must be finite and >= 0"));
    }
    let n = net.input_dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "attack base input".into(),
            expected: n,
            found: x.len(),
        });
    }

    let mut b = GraphBuilder::new();
    let param = b.root(if perturbation { "perturbation" } else { "x_adv" }, n);
    let base = b.root("x_base", n);
    let (adv, delta) = if perturbation {
        (b.node("x_adv", Add::new(n), &[base, param]), param)
    } else {
        (param, b.node("perturbation", Sub::new(n), &[param, base]))
    };
    let linf = b.node("linf", MaxAbs::new(n), &[delta]);
    let reg = b.node("penalty", Scale::new(lambda, 1), &[linf]);
    let mut h = adv;
    let depth = net.layers.len();
    for (i, layer) in net.layers.iter().enumerate() {
        let width = layer.output_dim();
        h = b.node(format!("dense{}", i + 1), layer.clone(), &[h]);
        if i + 1 < depth {
            h = b.node(format!("relu{}", i + 1), Relu::new(width), &[h]);
        }
    }
    let margin = b.node("multi_margin", MultiMargin::new(classes, target), &[h]);
    b.node("loss", Add::new(1), &[margin, reg]);

    let mut obj = Objective::new("margin_attack", b.build()?, vec![param], vec![(base, x.to_vec())])?;
    obj.regularization = Some(lambda);
    Ok(obj)
}
