//! Limit-point arguments with hypotheses checked on the window: limits
//! under a faithful dominating input, limits under operator domination, and
//! the two-step strong-convergence argument.

use rayon::prelude::*;
use serde::Serialize;

use super::diagnose::{extract_limit_point, Extraction, Window};
use super::limit::estimate_matrix_limit;
use super::metric::{output_distance, strong_distance};
use crate::channel::QuantumOperation;
use crate::error::{Error, Result};
use crate::family::ChannelSequence;
use crate::linalg::{lambda_min, Mat};
use crate::operator::State;
use crate::tolerance::Tolerances;

/// Three-valued outcome of a finite-window argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Holds,
    Fails,
    Inconclusive,
}

/// Estimated limit of a matrix sequence and its distance to a target.
fn limit_residual(indices: &[usize], mats: &[Mat], target: &Mat, eps: f64) -> Result<Option<f64>> {
    let (lim, est) = estimate_matrix_limit(indices, mats, eps);
    if !est.converged {
        return Ok(None);
    }
    output_distance(&lim, target).map(Some)
}

#[derive(Debug, Clone, Serialize)]
pub struct DominatedVerdict {
    pub has_limit_point: bool,
    /// `||lim rho_n - rho_0||_1`.
    pub input_residual: f64,
    /// `||lim Phi_n(rho_n) - sigma_0||_1`.
    pub output_residual: f64,
    /// `||Phi_0(rho_0) - sigma_0||_1` for the extracted limit.
    pub image_residual: Option<f64>,
    pub kraus_count: Option<usize>,
    /// Largest Choi rank over the second half of the window.
    pub kraus_limsup: usize,
    pub rank_bound_holds: Option<bool>,
    pub subsequence: Vec<usize>,
    pub window: Window,
    #[serde(skip)]
    pub limit: Option<QuantumOperation>,
}

fn tail_rank_bound(ops: &[QuantumOperation], eps: f64) -> usize {
    ops[ops.len() / 2..]
        .par_iter()
        .map(|op| op.choi_rank(eps))
        .max()
        .unwrap_or(0)
}

/// Given `rho_n -> rho_0` faithful and `Phi_n(rho_n) -> sigma_0`, extracts a
/// partial limit `Phi_0` and checks `Phi_0(rho_0) = sigma_0` together with
/// the Choi-rank bound.
pub fn dominated_limit_check(
    seq: &ChannelSequence,
    inputs: &[State],
    rho0: &State,
    sigma0: &Mat,
    indices: &[usize],
    tol: &Tolerances,
) -> Result<DominatedVerdict> {
    Error::check_dim(indices.len(), inputs.len())?;
    if !rho0.is_faithful(tol.supp) {
        return Err(Error::precondition("limit input state is not faithful"));
    }
    let ops = seq.evaluate(indices)?;
    let in_mats: Vec<Mat> = inputs.iter().map(|s| s.matrix().clone()).collect();
    let out_mats: Vec<Mat> = ops
        .par_iter()
        .zip(inputs)
        .map(|(op, rho)| op.act(rho.matrix()))
        .collect();
    let input_residual = limit_residual(indices, &in_mats, rho0.matrix(), tol.cauchy)?;
    let output_residual = limit_residual(indices, &out_mats, sigma0, tol.cauchy)?;
    match (input_residual, output_residual) {
        (Some(a), Some(b)) if a <= tol.convergence && b <= tol.convergence => {}
        (a, b) => {
            return Err(Error::precondition(format!(
                "hypotheses fail on the window: input residual {a:?}, output residual {b:?}"
            )))
        }
    }
    let kraus_limsup = tail_rank_bound(&ops, tol.rank);
    let window = Window::of(indices);
    let mut verdict = DominatedVerdict {
        has_limit_point: false,
        input_residual: input_residual.unwrap_or(f64::INFINITY),
        output_residual: output_residual.unwrap_or(f64::INFINITY),
        image_residual: None,
        kraus_count: None,
        kraus_limsup,
        rank_bound_holds: None,
        subsequence: Vec::new(),
        window,
        limit: None,
    };
    match extract_limit_point(seq, indices, None, tol.cauchy) {
        Ok(Extraction {
            operation,
            subsequence,
            ..
        }) => {
            let image = operation.act(rho0.matrix());
            let count = operation.kraus_count();
            verdict.has_limit_point = true;
            verdict.image_residual = Some(output_distance(&image, sigma0)?);
            verdict.kraus_count = Some(count);
            verdict.rank_bound_holds = Some(count <= kraus_limsup);
            verdict.subsequence = subsequence;
            verdict.limit = Some(operation);
        }
        Err(Error::NoLimitDetected { .. } | Error::NotAnOperation(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(verdict)
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationVerdict {
    pub has_limit_point: bool,
    /// `min_n lambda_min(Phi_n(sigma) - c Psi_n(sigma))`.
    pub domination_margin: f64,
    /// `lambda_min(Phi_0(sigma) - c Psi_0(sigma))` at the extracted limits.
    pub limit_margin: Option<f64>,
    pub subsequence: Vec<usize>,
    pub window: Window,
    #[serde(skip)]
    pub limits: Option<(QuantumOperation, QuantumOperation)>,
}

/// Domination variant: `c Psi_n(sigma) <= Phi_n(sigma)` with `Phi_n`
/// convergent yields a limit point `Psi_0` with `c Psi_0(sigma) <= Phi_0(sigma)`.
pub fn domination_limit_check(
    phi: &ChannelSequence,
    psi: &ChannelSequence,
    sigma: &State,
    c: f64,
    indices: &[usize],
    tol: &Tolerances,
) -> Result<DominationVerdict> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("domination constant must be positive"));
    }
    if !sigma.is_faithful(tol.supp) {
        return Err(Error::precondition("reference state is not faithful"));
    }
    Error::check_dim(phi.dim_in(), psi.dim_in())?;
    Error::check_dim(phi.dim_out(), psi.dim_out())?;
    let a = phi.evaluate(indices)?;
    let b = psi.evaluate(indices)?;
    let margin = a
        .par_iter()
        .zip(&b)
        .map(|(x, y)| lambda_min(&(x.act(sigma.matrix()) - y.act(sigma.matrix()) .scale(c))))
        .reduce(|| f64::INFINITY, f64::min);
    if margin < -tol.psd {
        return Err(Error::precondition(format!(
            "domination fails on the window (witness eigenvalue {margin:.3e})"
        )));
    }
    let phi_limit = extract_limit_point(phi, indices, None, tol.cauchy).map_err(|e| {
        Error::precondition(format!("dominating sequence does not converge: {e}"))
    })?;
    let window = Window::of(indices);
    match extract_limit_point(psi, &phi_limit.subsequence, None, tol.cauchy) {
        Ok(psi_limit) => {
            let lm = lambda_min(
                &(phi_limit.operation.act(sigma.matrix())
                    - psi_limit.operation.act(sigma.matrix()) .scale(c)),
            );
            Ok(DominationVerdict {
                has_limit_point: true,
                domination_margin: margin,
                limit_margin: Some(lm),
                subsequence: psi_limit.subsequence,
                window,
                limits: Some((phi_limit.operation, psi_limit.operation)),
            })
        }
        Err(Error::NoLimitDetected { .. } | Error::NotAnOperation(_)) => Ok(DominationVerdict {
            has_limit_point: false,
            domination_margin: margin,
            limit_margin: None,
            subsequence: Vec::new(),
            window,
            limits: None,
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoStepVerdict {
    pub outcome: Outcome,
    /// Step 1: `Phi_n(sigma) -> Phi_0(sigma)`.
    pub step1_holds: bool,
    pub step1_residual: Option<f64>,
    /// Step 2: strong distance of each extracted limit point to `Phi_0`.
    pub limit_distances: Vec<f64>,
    pub window: Window,
}

/// Two-step strong-convergence argument: `Phi_n(sigma) -> Phi_0(sigma)` for a
/// faithful `sigma`, and every limit point extracted on the window (from the
/// whole window and from its even and odd halves) coincides with `Phi_0`.
pub fn two_step_limit_proof(
    seq: &ChannelSequence,
    candidate: &QuantumOperation,
    sigma: &State,
    probes: &[State],
    indices: &[usize],
    tol: &Tolerances,
) -> Result<TwoStepVerdict> {
    if !sigma.is_faithful(tol.supp) {
        return Err(Error::precondition("reference state is not faithful"));
    }
    Error::check_dim(seq.dim_in(), candidate.dim_in())?;
    Error::check_dim(seq.dim_out(), candidate.dim_out())?;
    let ops = seq.evaluate(indices)?;
    let outputs: Vec<Mat> = ops.par_iter().map(|op| op.act(sigma.matrix())).collect();
    let target = candidate.act(sigma.matrix());
    let step1_residual = limit_residual(indices, &outputs, &target, tol.cauchy)?;
    let step1_holds = step1_residual.is_some_and(|r| r <= tol.convergence);

    let mut windows = vec![indices.to_vec()];
    if indices.len() >= 6 {
        windows.push(indices.iter().step_by(2).copied().collect());
        windows.push(indices.iter().skip(1).step_by(2).copied().collect());
    }
    let mut limit_distances = Vec::new();
    for w in &windows {
        match extract_limit_point(seq, w, None, tol.cauchy) {
            Ok(ex) => limit_distances.push(strong_distance(&ex.operation, candidate, probes)?),
            Err(Error::NoLimitDetected { .. } | Error::NotAnOperation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let outcome = if limit_distances.iter().any(|&d| d > tol.convergence)
        || step1_residual.is_some_and(|r| r > tol.convergence)
    {
        Outcome::Fails
    } else if step1_holds && !limit_distances.is_empty() {
        Outcome::Holds
    } else {
        Outcome::Inconclusive
    };
    Ok(TwoStepVerdict {
        outcome,
        step1_holds,
        step1_residual,
        limit_distances,
        window: Window::of(indices),
    })
}
