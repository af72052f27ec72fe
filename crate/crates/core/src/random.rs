//! Seeded random fixtures: Haar unitaries and isometries, Ginibre states,
//! random channels and operations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{Kind, QuantumOperation};
use crate::linalg::{c, CVec, Mat};
use crate::operator::State;

pub type FixtureRng = ChaCha8Rng;

pub fn rng(seed: u64) -> FixtureRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| c(gaussian(rng), gaussian(rng)))
}

/// Haar-distributed isometry `C^cols -> C^rows` (`rows >= cols`).
pub fn isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix column phases so the distribution is Haar
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn unitary(d: usize, rng: &mut impl Rng) -> Mat {
    isometry(d, d, rng)
}

pub fn pure_vector(d: usize, rng: &mut impl Rng) -> CVec {
    let v = CVec::from_fn(d, |_, _| c(gaussian(rng), gaussian(rng)));
    let n = v.norm();
    v.unscale(n)
}

/// Mixed state `G G* / Tr G G*` with Ginibre `G` of shape `d x d`.
pub fn state(d: usize, rng: &mut impl Rng) -> State {
    let g = ginibre(d, d, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    State::from_trusted(m.unscale(tr))
}

/// Random state mixed with white noise: `(1 - w) rho + w I/d`, so that its
/// spectrum is bounded below by `w / d`.
pub fn faithful_state(d: usize, white: f64, rng: &mut impl Rng) -> State {
    let rho = state(d, rng);
    let m = rho.matrix().scale(1.0 - white) + Mat::identity(d, d).scale(white / d as f64);
    State::from_trusted(m)
}

/// Random channel with `kraus_count` Kraus operators, cut from a Haar isometry.
pub fn channel(d_in: usize, d_out: usize, kraus_count: usize, rng: &mut impl Rng) -> QuantumOperation {
    let v = isometry(d_out * kraus_count, d_in, rng);
    let kraus = (0..kraus_count)
        .map(|k| v.rows(k * d_out, d_out).into_owned())
        .collect();
    QuantumOperation::from_kraus_unchecked(d_in, d_out, kraus, Kind::Channel)
}

/// Random trace-non-increasing operation: a random channel precomposed with
/// a random contraction.
pub fn operation(d_in: usize, d_out: usize, kraus_count: usize, rng: &mut impl Rng) -> QuantumOperation {
    let ch = channel(d_in, d_out, kraus_count, rng);
    let u = unitary(d_in, rng);
    let shrink: Vec<f64> = (0..d_in).map(|_| rng.random_range(0.2..1.0)).collect();
    let contraction = crate::linalg::diag(&shrink) * u;
    let kraus = ch.kraus().iter().map(|k| k * &contraction).collect();
    QuantumOperation::from_kraus_unchecked(d_in, d_out, kraus, Kind::Operation)
}

/// Random Hermitian matrix with Gaussian entries (GUE up to scale).
pub fn hermitian(d: usize, rng: &mut impl Rng) -> Mat {
    let g = ginibre(d, d, rng);
    (&g + g.adjoint()).scale(0.5)
}
