//! Degradability and anti-degradability certificates by channel fitting, and
//! the closure harness for convergent sequences of degradable channels.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::fit::{fit_channel, FitOptions, FitProblem, FitResult, RestartSummary};
use crate::channel::QuantumOperation;
use crate::convergence::{extract_limit_point, strong_distance_default};
use crate::error::{Error, Result};
use crate::family::ChannelSequence;
use crate::linalg::{self, matrix_unit, Mat};
use crate::operator::State;
use crate::spec::ChannelSpec;
use crate::tolerance::Tolerances;

/// Fit of `Theta` with `Theta o first = second` on all matrix units.
fn fit_post_processing(
    first: &QuantumOperation,
    second: &QuantumOperation,
    opts: &FitOptions,
) -> Result<FitResult> {
    let d = first.dim_in();
    let mut data = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let e = matrix_unit(d, i, j);
            data.push((first.act(&e), second.act(&e)));
        }
    }
    let problem = FitProblem::new(first.dim_out(), second.dim_out(), data)?;
    fit_channel(&problem, opts)
}

/// Both fits with their residuals (Frobenius norm of the Choi difference)
/// and the re-measured strong distances.
#[derive(Debug, Clone, Serialize)]
pub struct DegradabilityCertificate {
    /// `min_Theta ||J(Theta o Phi) - J(Phi^c)||_F`.
    pub deg_residual: f64,
    /// `min_Theta' ||J(Theta' o Phi^c) - J(Phi)||_F`.
    pub antideg_residual: f64,
    pub deg_strong_distance: f64,
    pub antideg_strong_distance: f64,
    pub degradable: bool,
    pub anti_degradable: bool,
    pub tau: f64,
    pub environment_dim: usize,
    pub degrading_map: ChannelSpec,
    pub antidegrading_map: ChannelSpec,
    pub degrading_restarts: Vec<RestartSummary>,
    pub antidegrading_restarts: Vec<RestartSummary>,
    pub seeds: Vec<u64>,
    pub options: FitOptions,
    #[serde(skip)]
    pub degrading: Option<QuantumOperation>,
}

/// Fits degrading and anti-degrading maps against the canonical complement
/// (the complement built from a minimal Kraus list).
pub fn degradability_certificate(
    phi: &QuantumOperation,
    opts: &FitOptions,
    tol: &Tolerances,
) -> Result<DegradabilityCertificate> {
    if !phi.is_channel() {
        return Err(Error::precondition("degradability is defined for channels"));
    }
    let phi = if phi.kraus_count() > phi.choi_rank(tol.rank) {
        phi.canonical(tol.rank)
    } else {
        phi.clone()
    };
    let comp = phi.complementary();
    let (deg, anti) = rayon::join(
        || fit_post_processing(&phi, &comp, opts),
        || fit_post_processing(&comp, &phi, opts),
    );
    let (deg, anti) = (deg?, anti?);
    for (name, fit) in [("degrading", &deg), ("anti-degrading", &anti)] {
        if !fit.any_converged() {
            return Err(Error::Inconclusive(format!(
                "{name} fit did not converge on any of {} restarts (best residual {:.3e})",
                fit.restarts.len(),
                fit.residual
            )));
        }
    }
    let deg_strong_distance = strong_distance_default(&phi.then(&deg.map)?, &comp)?;
    let antideg_strong_distance = strong_distance_default(&comp.then(&anti.map)?, &phi)?;
    let tau = tol.certificate;
    Ok(DegradabilityCertificate {
        deg_residual: deg.residual,
        antideg_residual: anti.residual,
        deg_strong_distance,
        antideg_strong_distance,
        degradable: deg.residual <= tau,
        anti_degradable: anti.residual <= tau,
        tau,
        environment_dim: comp.dim_out(),
        degrading_map: ChannelSpec::from_operation(&deg.map),
        antidegrading_map: ChannelSpec::from_operation(&anti.map),
        degrading_restarts: deg.restarts,
        antidegrading_restarts: anti.restarts,
        seeds: (0..opts.restarts as u64).map(|r| opts.seed.wrapping_add(r)).collect(),
        options: *opts,
        degrading: Some(deg.map),
    })
}

/// Outcome of the closure harness.
#[derive(Debug, Clone, Serialize)]
pub struct ClosureVerdict {
    pub limit: Option<ChannelSpec>,
    pub extraction_residual: Option<f64>,
    pub extraction_error: Option<String>,
    /// Degradability residual of the extracted limit.
    pub limit_residual: Option<f64>,
    pub certified: bool,
    /// Optimizer or extraction states that prevented a verdict.
    pub inconclusive: Vec<String>,
    /// `(n, deg_residual)` on the sampled indices.
    pub samples: Vec<(usize, f64)>,
    /// Every sampled element was certified degradable.
    pub hypothesis_holds: bool,
    /// Rank of the support of `Phi_0(rho_0)`.
    pub support_rank: usize,
    /// Limit of the degrading maps restricted to that support.
    pub degrading_limit: Option<ChannelSpec>,
    pub degrading_extraction_error: Option<String>,
}

/// Up to `k` indices spread evenly over the window, always including its end.
fn spread(indices: &[usize], k: usize) -> Vec<usize> {
    let n = indices.len();
    if k == 0 || n == 0 {
        return Vec::new();
    }
    if k >= n {
        return indices.to_vec();
    }
    let mut out: Vec<usize> = (0..k).map(|i| indices[(n - 1) - (k - 1 - i) * (n - 1) / (k - 1).max(1)]).collect();
    out.dedup();
    out
}

/// Extracts the strong limit of a sequence of degradable channels, certifies
/// it, and extracts the limit of the degrading maps restricted to the support
/// of `Phi_0(rho_0)` (`rho_0` defaults to the maximally mixed state).
pub fn degradable_closure_harness(
    seq: &ChannelSequence,
    indices: &[usize],
    rho0: Option<&State>,
    samples: usize,
    opts: &FitOptions,
    tol: &Tolerances,
) -> Result<ClosureVerdict> {
    let mut verdict = ClosureVerdict {
        limit: None,
        extraction_residual: None,
        extraction_error: None,
        limit_residual: None,
        certified: false,
        inconclusive: Vec::new(),
        samples: Vec::new(),
        hypothesis_holds: false,
        support_rank: 0,
        degrading_limit: None,
        degrading_extraction_error: None,
    };
    let rho0 = match rho0 {
        Some(r) => {
            Error::check_dim(seq.dim_in(), r.dim())?;
            r.clone()
        }
        None => State::maximally_mixed(seq.dim_in()),
    };

    let sampled = spread(indices, samples);
    let mut degrading = BTreeMap::new();
    let mut all_ok = !sampled.is_empty();
    for &n in &sampled {
        match degradability_certificate(&seq.get(n)?, opts, tol) {
            Ok(cert) => {
                all_ok &= cert.degradable;
                verdict.samples.push((n, cert.deg_residual));
                if let Some(map) = cert.degrading {
                    degrading.insert(n, map);
                }
            }
            Err(e) => {
                all_ok = false;
                verdict.inconclusive.push(format!("n = {n}: {e}"));
            }
        }
    }
    verdict.hypothesis_holds = all_ok;

    let extraction = match extract_limit_point(seq, indices, None, tol.cauchy) {
        Ok(ex) => ex,
        Err(e) => {
            verdict.extraction_error = Some(e.to_string());
            return Ok(verdict);
        }
    };
    verdict.limit = Some(ChannelSpec::from_operation(&extraction.operation));
    verdict.extraction_residual = Some(extraction.final_residual());
    match degradability_certificate(&extraction.operation, opts, tol) {
        Ok(cert) => {
            verdict.limit_residual = Some(cert.deg_residual);
            verdict.certified = cert.degradable;
        }
        Err(e) => verdict.inconclusive.push(format!("limit: {e}")),
    }

    let out = extraction.operation.act(rho0.matrix());
    let eig = linalg::HermitianEigen::new(&out);
    let rank = eig.rank(tol.supp);
    verdict.support_rank = rank;
    let embed: Mat = eig.vectors.columns(0, rank).into_owned();
    let restricted: Result<Vec<(usize, QuantumOperation)>> = degrading
        .into_iter()
        .map(|(n, map)| Ok((n, map.restrict_input(&embed)?)))
        .collect();
    let restricted = restricted?;
    let dims: Vec<(usize, usize)> = restricted.iter().map(|(_, m)| (m.dim_in(), m.dim_out())).collect();
    if restricted.len() < 2 || dims.windows(2).any(|p| p[0] != p[1]) {
        verdict.degrading_extraction_error =
            Some("degrading maps are too few or have varying dimensions".into());
        return Ok(verdict);
    }
    let (d_in, d_out) = dims[0];
    let keys: Vec<usize> = restricted.iter().map(|(n, _)| *n).collect();
    let table: Arc<BTreeMap<usize, QuantumOperation>> = Arc::new(restricted.into_iter().collect());
    let (first, last) = (keys[0], keys[keys.len() - 1]);
    let deg_seq = ChannelSequence::from_fn("degrading_maps", d_in, d_out, first, Some(last), move |n| {
        table
            .get(&n)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("no degrading map sampled at n = {n}")))
    });
    match extract_limit_point(&deg_seq, &keys, None, tol.certificate) {
        Ok(ex) => verdict.degrading_limit = Some(ChannelSpec::from_operation(&ex.operation)),
        Err(e) => verdict.degrading_extraction_error = Some(e.to_string()),
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn opts(seed: u64) -> FitOptions {
        FitOptions {
            seed,
            ..FitOptions::default()
        }
    }

    fn ad(g: f64) -> QuantumOperation {
        QuantumOperation::amplitude_damping(g).unwrap()
    }

    /// Grid over damping-type post-processings `AD(g)`.
    fn grid_minimum(first: &QuantumOperation, second: &QuantumOperation) -> (f64, f64) {
        (0..=3000)
            .map(|k| {
                let g = k as f64 / 3000.0;
                let r = frobenius(&(first.then(&ad(g)).unwrap().choi_matrix() - second.choi_matrix()));
                (g, r)
            })
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    #[test]
    fn identity_is_degradable() {
        let cert = degradability_certificate(&QuantumOperation::identity(2), &opts(0), &tol()).unwrap();
        assert_eq!(cert.environment_dim, 1);
        assert!(cert.deg_residual <= 1e-8);
        assert!(cert.degradable);
    }

    #[test]
    fn weak_damping_is_degradable() {
        let phi = ad(0.25);
        let (g, r) = grid_minimum(&phi, &phi.complementary());
        assert!((g - 2.0 / 3.0).abs() < 1e-3 && r < 1e-3);
        let cert = degradability_certificate(&phi, &opts(0), &tol()).unwrap();
        assert!(cert.degradable, "{}", cert.deg_residual);
        assert!(!cert.anti_degradable);
        let theta = cert.degrading.unwrap();
        assert!(strong_distance_default(&theta, &ad(2.0 / 3.0)).unwrap() < 1e-5);
    }

    #[test]
    fn strong_damping_is_anti_degradable() {
        let phi = ad(0.75);
        let cert = degradability_certificate(&phi, &opts(0), &tol()).unwrap();
        assert!(cert.anti_degradable, "{}", cert.antideg_residual);
        assert!(!cert.degradable);
        assert!(cert.degrading_restarts.iter().all(|r| r.residual > 1e-2));
    }

    #[test]
    fn non_channels_are_rejected() {
        let op = crate::random::operation(2, 2, 2, &mut crate::random::rng(1));
        assert!(degradability_certificate(&op, &opts(0), &tol()).is_err());
    }

    #[test]
    fn spread_keeps_the_window_end() {
        assert_eq!(spread(&[1, 2, 3, 4, 5, 6, 7], 3), vec![1, 4, 7]);
        assert_eq!(spread(&[5, 6], 4), vec![5, 6]);
    }

    #[test]
    fn constant_sequence_closure() {
        let seq = ChannelSequence::constant(ad(0.3), 1, None);
        let idx: Vec<usize> = (1..=10).collect();
        let fast = FitOptions { restarts: 4, ..FitOptions::default() };
        let v = degradable_closure_harness(&seq, &idx, None, 3, &fast, &tol()).unwrap();
        assert!(v.hypothesis_holds && v.certified, "{v:?}");
        assert_eq!(v.support_rank, 2);
        assert!(v.degrading_limit.is_some(), "{v:?}");
    }
}
