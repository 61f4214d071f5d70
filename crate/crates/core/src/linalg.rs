//! Small dense-vector helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform sample from the closed Euclidean ball: a normalized Gaussian
/// direction scaled by `radius · U^{1/d}`.
pub fn sample_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let mut dir = gaussian(rng, d);
    let mut n = norm(&dir);
    while n == 0.0 {
        dir = gaussian(rng, d);
        n = norm(&dir);
    }
    let u: f64 = rng.gen();
    let r = radius * u.powf(1.0 / d as f64);
    center.iter().zip(&dir).map(|(c, x)| c + r * x / n).collect()
}

/// Coordinate-wise mean, summing in slice order.
pub fn average(vectors: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vectors[0].clone();
    for v in &vectors[1..] {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let m = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    acc
}

/// Independent random stream for one `(seed, iteration, index)` draw. The
/// domain tag separates unrelated uses of the same master seed.
pub fn stream(seed: u64, iteration: u64, index: u64, domain: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, iteration, index, domain]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
