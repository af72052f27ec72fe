//! Compactness diagnostics on a finite index window: tail-mass profiles, the
//! dual ladder `Phi_n*(P_m)`, limit-point extraction by the diagonal method
//! and the combined per-criterion verdict.

use rayon::prelude::*;
use serde::Serialize;

use super::limit::{estimate_limit, estimate_matrix_limit, flatten, unflatten, LimitMethod};
use super::metric::strong_distance_default;
use crate::channel::{kraus_from_choi, Kind, QuantumOperation};
use crate::error::{Error, Result};
use crate::family::ChannelSequence;
use crate::linalg::{self, identity, kron, lambda_max, lambda_min, max_abs, Mat};
use crate::operator::{State, TruncationLadder};
use crate::spec::ChannelSpec;
use crate::tolerance::Tolerances;

/// The index window a verdict refers to. Verdicts are finite-window
/// evidence, not proofs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub n_min: usize,
    pub n_max: usize,
    pub count: usize,
}

impl Window {
    pub fn of(indices: &[usize]) -> Self {
        Window {
            n_min: indices.first().copied().unwrap_or(0),
            n_max: indices.last().copied().unwrap_or(0),
            count: indices.len(),
        }
    }
}

fn check_indices(indices: &[usize]) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::invalid("index window is empty"));
    }
    if indices.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("window indices must be strictly increasing"));
    }
    Ok(())
}

fn check_faithful(sigma: &State, tol: &Tolerances) -> Result<()> {
    if sigma.is_faithful(tol.supp) {
        Ok(())
    } else {
        Err(Error::precondition("reference state is not faithful at the truncation"))
    }
}

/// `t(m) = max_n Tr (I - P_m) Phi_n(sigma)` over the window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProfile {
    pub ranks: Vec<usize>,
    pub values: Vec<f64>,
}

impl TailProfile {
    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn tail_mass_profile(
    seq: &ChannelSequence,
    sigma: &State,
    ladder: &TruncationLadder,
    indices: &[usize],
    tol: &Tolerances,
) -> Result<TailProfile> {
    check_indices(indices)?;
    check_faithful(sigma, tol)?;
    Error::check_dim(seq.dim_in(), sigma.dim())?;
    Error::check_dim(seq.dim_out(), ladder.dim())?;
    let outputs: Vec<Mat> = seq
        .evaluate(indices)?
        .par_iter()
        .map(|op| op.act(sigma.matrix()))
        .collect();
    let values = ladder
        .projectors()
        .iter()
        .map(|p| {
            outputs
                .iter()
                .map(|out| linalg::real_trace(out) - linalg::real_trace(&(p.matrix() * out)))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(TailProfile {
        ranks: ladder.ranks(),
        values,
    })
}

/// Estimated weak-operator limits `A_m` of `Phi_n*(P_m)` and `A_*` of
/// `Phi_n*(I)`.
#[derive(Debug, Clone, Serialize)]
pub struct DualLadder {
    pub ranks: Vec<usize>,
    /// `Phi_n*(P_m)` per rung and window index.
    #[serde(skip)]
    pub entries: Vec<Vec<Mat>>,
    #[serde(skip)]
    pub limits: Vec<Mat>,
    #[serde(skip)]
    pub top: Mat,
    /// `lambda_max(A_* - A_last)`.
    pub gap: f64,
    /// All rungs and the top passed the Cauchy test.
    pub converged: bool,
    pub unconverged_rungs: Vec<usize>,
    /// `a_m = Tr A_m sigma`.
    pub a: Vec<f64>,
    pub a_star: f64,
    /// `min_m lambda_min(A_{m+1} - A_m)`, including `A_* - A_last`.
    pub monotonicity: f64,
}

pub fn dual_ladder(
    seq: &ChannelSequence,
    sigma: &State,
    ladder: &TruncationLadder,
    indices: &[usize],
    tol: &Tolerances,
) -> Result<DualLadder> {
    check_indices(indices)?;
    check_faithful(sigma, tol)?;
    Error::check_dim(seq.dim_in(), sigma.dim())?;
    Error::check_dim(seq.dim_out(), ladder.dim())?;
    let ops = seq.evaluate(indices)?;
    let id_out = identity(seq.dim_out());
    let per_index: Vec<(Vec<Mat>, Mat)> = ops
        .par_iter()
        .map(|op| {
            let rungs = ladder
                .projectors()
                .iter()
                .map(|p| op.dual_act(p.matrix()))
                .collect();
            (rungs, op.dual_act(&id_out))
        })
        .collect();
    let mut entries = vec![Vec::with_capacity(indices.len()); ladder.len()];
    let mut tops = Vec::with_capacity(indices.len());
    for (rungs, top) in per_index {
        for (m, a) in rungs.into_iter().enumerate() {
            entries[m].push(a);
        }
        tops.push(top);
    }
    let mut unconverged = Vec::new();
    let mut limits = Vec::with_capacity(ladder.len());
    for (m, series) in entries.iter().enumerate() {
        let (a, est) = estimate_matrix_limit(indices, series, tol.cauchy);
        if !est.converged {
            unconverged.push(m);
        }
        limits.push(linalg::hermitian_part(&a));
    }
    let (top, top_est) = estimate_matrix_limit(indices, &tops, tol.cauchy);
    let top = linalg::hermitian_part(&top);
    let last = limits.last().expect("ladder is non-empty");
    let gap = lambda_max(&(&top - last));
    let mut monotonicity = lambda_min(&(&top - last));
    for w in limits.windows(2) {
        monotonicity = monotonicity.min(lambda_min(&(&w[1] - &w[0])));
    }
    if let Some(first) = limits.first() {
        monotonicity = monotonicity.min(lambda_min(first));
    }
    let expect = |a: &Mat| linalg::real_trace(&(a * sigma.matrix()));
    Ok(DualLadder {
        ranks: ladder.ranks(),
        a: limits.iter().map(expect).collect(),
        a_star: expect(&top),
        entries,
        gap,
        converged: unconverged.is_empty() && top_est.converged,
        unconverged_rungs: unconverged,
        monotonicity,
        limits,
        top,
    })
}

/// Result of the diagonal-method limit extraction.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub operation: QuantumOperation,
    pub subsequence: Vec<usize>,
    /// `(n_k, strong_distance(extracted, Phi_{n_k}))` along the subsequence.
    pub residuals: Vec<(usize, f64)>,
    /// Matrix units whose limit came from a cluster rather than extrapolation.
    pub clustered_units: Vec<(usize, usize)>,
}

impl Extraction {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().map_or(f64::INFINITY, |r| r.1)
    }
}

/// Builds an operation from an estimated Choi matrix on `OUT (x) IN`,
/// absorbing estimation noise of size `slack` and dropping eigenvalues below
/// `cut`.
pub(crate) fn operation_from_estimated_choi(
    j: &Mat,
    d_out: usize,
    d_in: usize,
    slack: f64,
    cut: f64,
) -> Result<QuantumOperation> {
    let j = linalg::hermitian_part(j);
    let low = lambda_min(&j);
    if low < -slack {
        return Err(Error::NotAnOperation(format!(
            "estimated Choi matrix has eigenvalue {low:.3e}"
        )));
    }
    let mut kraus = kraus_from_choi(&j, d_out, d_in, cut);
    let s = kraus
        .iter()
        .fold(linalg::zeros(d_in, d_in), |acc, k| acc + k.adjoint() * k);
    let top = lambda_max(&s);
    if top > 1.0 + slack {
        return Err(Error::NotAnOperation(format!(
            "estimated map increases trace (sum K*K has eigenvalue {top})"
        )));
    }
    let kind = if max_abs(&(&s - identity(d_in))) <= slack && !kraus.is_empty() {
        let fix = linalg::pinv_sqrt(&s, 1e-12);
        kraus = kraus.into_iter().map(|k| k * &fix).collect();
        Kind::Channel
    } else {
        if top > 1.0 {
            kraus = kraus.into_iter().map(|k| k.unscale(top.sqrt())).collect();
        }
        Kind::Operation
    };
    QuantumOperation::with_tolerance(d_in, d_out, kraus, kind, 1e-9, 1e-9)
}

/// Diagonal-method extraction: for each matrix unit `|b_i><b_j|` in
/// lexicographic order, the current subsequence is filtered until
/// `Phi_n(|b_i><b_j|)` converges; the limits assemble the Choi matrix of the
/// limit map, which is then validated as an operation.
pub fn extract_limit_point(
    seq: &ChannelSequence,
    indices: &[usize],
    basis: Option<&Mat>,
    eps_cauchy: f64,
) -> Result<Extraction> {
    check_indices(indices)?;
    let (d_in, d_out) = (seq.dim_in(), seq.dim_out());
    let basis = match basis {
        Some(b) => {
            Error::check_dim(d_in, linalg::ensure_square(b)?)?;
            if max_abs(&(b.adjoint() * b - identity(d_in))) > 1e-9 {
                return Err(Error::invalid("extraction basis is not orthonormal"));
            }
            b.clone()
        }
        None => identity(d_in),
    };
    let ops = seq.evaluate(indices)?;
    // outputs[k][i * d_in + j] = Phi_{n_k}(|b_i><b_j|), flattened
    let outputs: Vec<Vec<Vec<f64>>> = ops
        .par_iter()
        .map(|op| {
            let mut units = Vec::with_capacity(d_in * d_in);
            for i in 0..d_in {
                for j in 0..d_in {
                    let unit = linalg::outer(
                        &basis.column(i).into_owned(),
                        &basis.column(j).into_owned(),
                    );
                    units.push(flatten(&op.act(&unit)));
                }
            }
            units
        })
        .collect();

    let mut sub: Vec<usize> = (0..indices.len()).collect();
    let mut limits = vec![Vec::new(); d_in * d_in];
    let mut clustered = Vec::new();
    for i in 0..d_in {
        for j in 0..d_in {
            let u = i * d_in + j;
            let idx: Vec<usize> = sub.iter().map(|&p| indices[p]).collect();
            let vals: Vec<Vec<f64>> = sub.iter().map(|&p| outputs[p][u].clone()).collect();
            let est = estimate_limit(&idx, &vals, eps_cauchy);
            if !est.converged {
                return Err(Error::NoLimitDetected { i, j });
            }
            if est.method == LimitMethod::Cluster {
                clustered.push((i, j));
                sub = est.members.iter().map(|&m| sub[m]).collect();
            }
            limits[u] = est.value;
        }
    }

    let mut choi = linalg::zeros(d_out * d_in, d_out * d_in);
    for i in 0..d_in {
        for j in 0..d_in {
            let omega = unflatten(&limits[i * d_in + j], d_out, d_out);
            choi += kron(&omega, &linalg::matrix_unit(d_in, i, j));
        }
    }
    let slack = (d_in * d_out) as f64 * eps_cauchy;
    let coeff_map = operation_from_estimated_choi(&choi, d_out, d_in, slack, eps_cauchy)?;
    let kraus = coeff_map
        .kraus()
        .iter()
        .map(|k| k * basis.adjoint())
        .collect();
    let operation = QuantumOperation::from_kraus_unchecked(d_in, d_out, kraus, coeff_map.kind());

    let subsequence: Vec<usize> = sub.iter().map(|&p| indices[p]).collect();
    let residuals = sub
        .par_iter()
        .map(|&p| Ok((indices[p], strong_distance_default(&operation, &ops[p])?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Extraction {
        operation,
        subsequence,
        residuals,
        clustered_units: clustered,
    })
}

/// Limit-point criteria reported separately at the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criterion {
    /// `Phi_n(sigma)` has a limit point.
    #[serde(rename = "(ii)")]
    OutputLimit,
    /// Uniform tail decay along the ladder.
    #[serde(rename = "(iii)")]
    UniformTail,
    /// `A_* = sup_m A_m` in the weak operator sense.
    #[serde(rename = "(iv)")]
    DualLadder,
    /// `a_* = sup_m a_m` for the expectations in `sigma`.
    #[serde(rename = "(v)")]
    Expectations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CriteriaReport {
    #[serde(rename = "(ii)")]
    pub output_limit: bool,
    #[serde(rename = "(iii)")]
    pub uniform_tail: bool,
    #[serde(rename = "(iv)")]
    pub dual_ladder: bool,
    #[serde(rename = "(v)")]
    pub expectations: bool,
}

impl CriteriaReport {
    pub fn first(&self) -> Option<Criterion> {
        [
            (self.output_limit, Criterion::OutputLimit),
            (self.uniform_tail, Criterion::UniformTail),
            (self.dual_ladder, Criterion::DualLadder),
            (self.expectations, Criterion::Expectations),
        ]
        .into_iter()
        .find(|(ok, _)| *ok)
        .map(|(_, c)| c)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceVerdict {
    pub has_limit_point: bool,
    pub criterion: Option<Criterion>,
    pub criteria: CriteriaReport,
    pub subsequence: Vec<usize>,
    /// Strong distance of the extracted limit to the last subsequence element.
    pub residual: Option<f64>,
    pub window: Window,
}

/// Full diagnostics of a sequence on a window.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnosis {
    pub verdict: ConvergenceVerdict,
    pub tail_profile: TailProfile,
    pub dual_ladder: DualLadder,
    pub extracted_channel: Option<ChannelSpec>,
    pub extraction_error: Option<String>,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub extraction: Option<Extraction>,
}

/// Default ladder for a sequence: for `orthogonal_isometries` the first `m`
/// blocks for `m = 1..=n_max/2` (so unevaluated blocks remain beyond every
/// rung), otherwise all canonical prefixes of the output space.
pub fn default_ladder(seq: &ChannelSequence) -> Result<TruncationLadder> {
    let d_out = seq.dim_out();
    if seq.tag() == "orthogonal_isometries" {
        let d_a = seq.dim_in();
        let n_max = seq.last_index().unwrap_or(d_out / d_a);
        let ranks: Vec<usize> = (1..=(n_max / 2).max(1)).map(|m| m * d_a).collect();
        return TruncationLadder::coordinate(d_out, &ranks);
    }
    Ok(TruncationLadder::full(d_out))
}

pub fn diagnose(
    seq: &ChannelSequence,
    sigma: &State,
    ladder: &TruncationLadder,
    indices: &[usize],
    tol: &Tolerances,
) -> Result<Diagnosis> {
    let tail = tail_mass_profile(seq, sigma, ladder, indices, tol)?;
    let ladder_report = dual_ladder(seq, sigma, ladder, indices, tol)?;

    let outputs: Vec<Mat> = seq
        .evaluate(indices)?
        .par_iter()
        .map(|op| op.act(sigma.matrix()))
        .collect();
    let (_, output_est) = estimate_matrix_limit(indices, &outputs, tol.cauchy);
    let a_sup = ladder_report.a.last().copied().unwrap_or(0.0);
    let criteria = CriteriaReport {
        output_limit: output_est.converged,
        uniform_tail: tail.last() <= tol.tail,
        dual_ladder: ladder_report.converged && ladder_report.gap <= tol.gap,
        expectations: ladder_report.converged && (ladder_report.a_star - a_sup).abs() <= tol.gap,
    };

    let extraction = extract_limit_point(seq, indices, None, tol.cauchy);
    let (extraction, extraction_error) = match extraction {
        Ok(e) => (Some(e), None),
        Err(e @ (Error::NoLimitDetected { .. } | Error::NotAnOperation(_))) => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let verdict = ConvergenceVerdict {
        has_limit_point: extraction.is_some(),
        criterion: criteria.first(),
        criteria,
        subsequence: extraction
            .as_ref()
            .map(|e| e.subsequence.clone())
            .unwrap_or_default(),
        residual: extraction.as_ref().map(Extraction::final_residual),
        window: Window::of(indices),
    };
    Ok(Diagnosis {
        verdict,
        tail_profile: tail,
        dual_ladder: ladder_report,
        extracted_channel: extraction
            .as_ref()
            .map(|e| ChannelSpec::from_operation(&e.operation)),
        extraction_error,
        tolerances: *tol,
        extraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::metric::strong_distance_default;
    use crate::family::{make_family, FamilySpec, Rate};
    use crate::operator::default_faithful_state;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn constant_sequence_diagnostics() {
        let ch = crate::random::channel(2, 3, 2, &mut crate::random::rng(3));
        let seq = ChannelSequence::constant(ch.clone(), 1, Some(10));
        let idx = seq.window(1, 10);
        let sigma = default_faithful_state(2);
        let ladder = TruncationLadder::full(3);
        let tail = tail_mass_profile(&seq, &sigma, &ladder, &idx, &tol()).unwrap();
        assert!(tail.last().abs() < 1e-12);
        assert!(tail.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));

        let ex = extract_limit_point(&seq, &idx, None, 1e-7).unwrap();
        assert_eq!(ex.subsequence, idx);
        assert!(strong_distance_default(&ex.operation, &ch).unwrap() < 1e-10);
        assert!(ex.operation.is_channel());
    }

    #[test]
    fn orthogonal_isometries_tail_is_one() {
        let seq = make_family(&FamilySpec::OrthogonalIsometries {
            d_a: 2,
            n_max: 8,
            d_b: None,
        })
        .unwrap();
        let ladder = default_ladder(&seq).unwrap();
        assert_eq!(ladder.ranks(), vec![2, 4, 6, 8]);
        let idx = seq.window(1, 8);
        let tail = tail_mass_profile(&seq, &default_faithful_state(2), &ladder, &idx, &tol()).unwrap();
        assert!(tail.values.iter().all(|t| (t - 1.0).abs() < 1e-12));
    }

    #[test]
    fn non_faithful_reference_is_rejected() {
        let seq = ChannelSequence::constant(QuantumOperation::identity(2), 1, Some(3));
        let err = tail_mass_profile(&seq, &State::basis(2, 0), &TruncationLadder::full(2), &[1, 2], &tol())
            .unwrap_err();
        assert!(matches!(err, Error::PreconditionViolated(_)));
    }

    #[test]
    fn constant_output_geometric_extraction_is_consistent() {
        let spec = FamilySpec::ConstantOutput {
            d: 3,
            sigma0: None,
            tau: None,
            rate: Rate::Geometric { ratio: 0.5 },
        };
        let seq = make_family(&spec).unwrap();
        let idx = seq.window(1, 60);
        let ex = extract_limit_point(&seq, &idx, None, 1e-7).unwrap();
        assert!(ex.final_residual() <= 1e-6);
        let want = crate::family::known_limit(&spec).unwrap().unwrap();
        assert!(strong_distance_default(&ex.operation, &want).unwrap() < 1e-8);
    }

    #[test]
    fn extraction_in_rotated_basis() {
        let u = crate::random::unitary(3, &mut crate::random::rng(8));
        let ch = crate::random::channel(3, 2, 3, &mut crate::random::rng(9));
        let seq = ChannelSequence::constant(ch.clone(), 1, Some(4));
        let ex = extract_limit_point(&seq, &[1, 2, 3, 4], Some(&u), 1e-7).unwrap();
        assert!(strong_distance_default(&ex.operation, &ch).unwrap() < 1e-10);
    }

    #[test]
    fn alternating_sequence_extracts_a_cluster() {
        let a = QuantumOperation::identity(2);
        let b = QuantumOperation::dephasing(1.0).unwrap();
        let ops: Vec<_> = (0..20).map(|n| if n % 2 == 0 { a.clone() } else { b.clone() }).collect();
        let seq = ChannelSequence::explicit(ops).unwrap();
        let ex = extract_limit_point(&seq, &seq.window(1, 20), None, 1e-7).unwrap();
        assert_eq!(ex.subsequence.len(), 10);
        assert!(ex.final_residual() < 1e-10);
        assert!(!ex.clustered_units.is_empty());
    }
}
