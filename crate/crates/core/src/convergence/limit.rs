//! Limit estimation for sequences sampled on a finite index window.
//!
//! The primary estimator extrapolates the tail of the window to `h = 1/n -> 0`
//! with a least-squares polynomial and accepts the value when the estimate is
//! stable under dropping the latest third of the nodes. Sequences that do not
//! extrapolate cleanly (oscillating or jumping ones) fall back to searching for
//! a cluster of indices along which the values agree within the tolerance.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::linalg::{c, Mat};

const MAX_NODES: usize = 12;
const MAX_DEGREE: usize = 6;

/// How a limit estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    /// Polynomial extrapolation in `1/n` over the tail of the window.
    Extrapolated,
    /// A subsequence of values agreeing within the tolerance.
    Cluster,
    /// The tail is flat (or too short to extrapolate); the last value is used.
    LastValue,
    /// No estimate could be certified.
    None,
}

/// Estimated limit of a vector-valued sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    pub value: Vec<f64>,
    pub converged: bool,
    pub method: LimitMethod,
    /// Disagreement between the two extrapolations (or cluster diameter).
    pub spread: f64,
    /// Positions (into the input) of the subsequence supporting the estimate.
    pub members: Vec<usize>,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Cap on `sum |w_s|`, the factor by which extrapolation amplifies noise.
const MAX_AMPLIFICATION: f64 = 1e4;

fn chebyshev_row(x: f64, deg: usize) -> Vec<f64> {
    let mut t = vec![1.0; deg + 1];
    if deg >= 1 {
        t[1] = x;
    }
    for p in 2..=deg {
        t[p] = 2.0 * x * t[p - 1] - t[p - 2];
    }
    t
}

/// Weights `w` with `sum_s w_s f(h_s) ~ f(0)` from a least-squares
/// polynomial fit in a Chebyshev basis. The degree starts at `min(len-1, 6)`
/// and is lowered until the noise amplification `sum |w_s|` is acceptable.
fn extrapolation_weights(h: &[f64]) -> Vec<f64> {
    let k = h.len();
    let (lo, hi) = h
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if hi - lo <= f64::EPSILON * hi {
        return vec![1.0 / k as f64; k];
    }
    let map = |x: f64| (2.0 * x - (lo + hi)) / (hi - lo);
    let x0 = map(0.0);
    let mut deg = (k - 1).min(MAX_DEGREE);
    loop {
        let v = DMatrix::<f64>::from_fn(k, deg + 1, |s, p| chebyshev_row(map(h[s]), deg)[p]);
        let pinv = v
            .svd(true, true)
            .pseudo_inverse(1e-13)
            .expect("SVD with both factors computed");
        let t0 = chebyshev_row(x0, deg);
        let w: Vec<f64> = (0..k)
            .map(|s| (0..=deg).map(|p| t0[p] * pinv[(p, s)]).sum())
            .collect();
        let amp: f64 = w.iter().map(|x| x.abs()).sum();
        if amp <= MAX_AMPLIFICATION || deg == 0 {
            return w;
        }
        deg -= 1;
    }
}

fn extrapolate(indices: &[usize], values: &[Vec<f64>], nodes: &[usize]) -> Vec<f64> {
    let h: Vec<f64> = nodes.iter().map(|&p| 1.0 / indices[p] as f64).collect();
    let w = extrapolation_weights(&h);
    let len = values[nodes[0]].len();
    let mut out = vec![0.0; len];
    for (&p, &ws) in nodes.iter().zip(&w) {
        for (o, x) in out.iter_mut().zip(&values[p]) {
            *o += ws * x;
        }
    }
    out
}

/// Evenly spaced (by position) subset of `lo..hi` of at most `MAX_NODES`
/// positions, always containing both ends.
fn subsample(lo: usize, hi: usize) -> Vec<usize> {
    let len = hi - lo;
    if len <= MAX_NODES {
        return (lo..hi).collect();
    }
    let mut out: Vec<usize> = (0..MAX_NODES)
        .map(|i| lo + (i * (len - 1) + (MAX_NODES - 1) / 2) / (MAX_NODES - 1))
        .collect();
    out.dedup();
    out
}

/// Largest group of positions within `eps / 2` of a common anchor; ties go to
/// the earliest anchor.
fn cluster(values: &[Vec<f64>], eps: f64) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::new();
    for a in 0..values.len() {
        let group: Vec<usize> = (0..values.len())
            .filter(|&b| max_diff(&values[a], &values[b]) <= eps / 2.0)
            .collect();
        if group.len() > best.len() {
            best = group;
        }
    }
    best
}

/// Estimates the limit of `values[k]` sampled at increasing `indices[k]`,
/// declaring convergence at entrywise tolerance `eps`.
pub fn estimate_limit(indices: &[usize], values: &[Vec<f64>], eps: f64) -> LimitEstimate {
    assert_eq!(indices.len(), values.len(), "one value per index");
    let k = values.len();
    if k == 0 {
        return LimitEstimate {
            value: Vec::new(),
            converged: false,
            method: LimitMethod::None,
            spread: f64::INFINITY,
            members: Vec::new(),
        };
    }
    if k <= 2 {
        let spread = max_diff(&values[0], &values[k - 1]);
        return LimitEstimate {
            value: values[k - 1].clone(),
            converged: spread <= eps,
            method: LimitMethod::LastValue,
            spread,
            members: (0..k).collect(),
        };
    }

    let tail: Vec<usize> = subsample(k / 2, k)
        .into_iter()
        .filter(|&p| indices[p] >= 1)
        .collect();
    if tail.len() >= 2 {
        // Two candidates: the extrapolated value, whose error is gauged by
        // its stability under dropping the latest nodes, and the last value,
        // whose error is gauged by the variation over the tail. The one with
        // the smaller gauge wins.
        let last = &values[k - 1];
        let variation = tail
            .iter()
            .map(|&p| max_diff(&values[p], last))
            .fold(0.0, f64::max);
        let shorter = &tail[..tail.len() - tail.len() / 3];
        let full = extrapolate(indices, values, &tail);
        let partial = extrapolate(indices, values, shorter);
        let spread = max_diff(&full, &partial);
        let finite = full.iter().all(|x| x.is_finite());
        let (value, gauge, method) = if variation <= spread || !finite {
            (last.clone(), variation, LimitMethod::LastValue)
        } else {
            (full, spread, LimitMethod::Extrapolated)
        };
        if gauge <= eps {
            return LimitEstimate {
                value,
                converged: true,
                method,
                spread: gauge,
                members: (0..k).collect(),
            };
        }
    }

    let group = cluster(values, eps);
    if group.len() >= (k / 4).max(3) {
        let last = *group.last().expect("non-empty cluster");
        let spread = group
            .iter()
            .map(|&p| max_diff(&values[p], &values[last]))
            .fold(0.0, f64::max);
        return LimitEstimate {
            value: values[last].clone(),
            converged: true,
            method: LimitMethod::Cluster,
            spread,
            members: group,
        };
    }
    LimitEstimate {
        value: values[k - 1].clone(),
        converged: false,
        method: LimitMethod::None,
        spread: f64::INFINITY,
        members: Vec::new(),
    }
}

/// Flattens a complex matrix to `[re, im, re, im, ...]` in row-major order.
pub fn flatten(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

pub fn unflatten(v: &[f64], rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |i, j| {
        let p = 2 * (i * cols + j);
        c(v[p], v[p + 1])
    })
}

/// Matrix-valued version of [`estimate_limit`].
pub fn estimate_matrix_limit(indices: &[usize], mats: &[Mat], eps: f64) -> (Mat, LimitEstimate) {
    let (r, cl) = mats.first().map_or((0, 0), |m| m.shape());
    let flat: Vec<Vec<f64>> = mats.iter().map(flatten).collect();
    let est = estimate_limit(indices, &flat, eps);
    let m = if est.value.is_empty() {
        crate::linalg::zeros(r, cl)
    } else {
        unflatten(&est.value, r, cl)
    };
    (m, est)
}
