//! Minimum-norm point of the convex hull of a finite point set.
//!
//! Minimizes `½‖Σ_j w_j g_j‖²` over the probability simplex with pairwise
//! Frank-Wolfe steps and exact line search.

use crate::linalg::dot;

const MAX_ITERS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct MinNormPoint {
    pub weights: Vec<f64>,
    pub point: Vec<f64>,
    pub norm: f64,
    /// Frank-Wolfe duality gap at termination.
    pub gap: f64,
}

/// Stops once the duality gap is at most `1e-10`, scaled by the largest
/// squared point norm when that exceeds one.
pub fn min_norm_point(points: &[Vec<f64>]) -> MinNormPoint {
    assert!(!points.is_empty(), "min_norm_point needs at least one point");
    let n = points.len();
    let sq: Vec<f64> = points.iter().map(|g| dot(g, g)).collect();
    let tol = 1e-10 * sq.iter().cloned().fold(1.0, f64::max);

    let start = (0..n).min_by(|&a, &b| sq[a].total_cmp(&sq[b])).unwrap();
    let mut w = vec![0.0; n];
    w[start] = 1.0;
    let mut x = points[start].clone();
    let mut gap = f64::INFINITY;

    for it in 0..MAX_ITERS {
        let scores: Vec<f64> = points.iter().map(|g| dot(g, &x)).collect();
        let xx = dot(&x, &x);
        let s = (0..n).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        gap = xx - scores[s];
        if gap <= tol {
            break;
        }
        let a = (0..n)
            .filter(|&j| w[j] > 0.0)
            .max_by(|&i, &j| scores[i].total_cmp(&scores[j]))
            .unwrap();
        // move weight from the away vertex to the Frank-Wolfe vertex
        let d: Vec<f64> = points[s].iter().zip(&points[a]).map(|(p, q)| p - q).collect();
        let dd = dot(&d, &d);
        if dd == 0.0 {
            break;
        }
        let step = (-dot(&x, &d) / dd).clamp(0.0, w[a]);
        if step == 0.0 {
            break;
        }
        w[s] += step;
        w[a] -= step;
        if it % 64 == 63 {
            x = combine(points, &w);
        } else {
            x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += step * di);
        }
    }
    let point = combine(points, &w);
    MinNormPoint {
        norm: dot(&point, &point).sqrt(),
        weights: w,
        point,
        gap,
    }
}

fn combine(points: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (g, &wj) in points.iter().zip(w) {
        if wj != 0.0 {
            x.iter_mut().zip(g).for_each(|(xi, gi)| *xi += wj * gi);
        }
    }
    x
}
