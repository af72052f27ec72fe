//! Operator-level limits: Kraus-list extraction, phase alignment of
//! single-Kraus sequences and tail tests for families of contractions.

use rayon::prelude::*;
use serde::Serialize;

use super::diagnose::{extract_limit_point, Window};
use super::limit::{estimate_limit, flatten, unflatten};
use super::metric::strong_distance_default;
use crate::channel::QuantumOperation;
use crate::error::{Error, Result};
use crate::family::ChannelSequence;
use crate::linalg::{self, c, max_abs, Mat};
use crate::operator::{default_faithful_state, State, TruncationLadder};
use crate::tolerance::Tolerances;

/// `min_phi max|a - e^{i phi} b|`, the distance up to a global phase.
pub fn phase_distance(a: &Mat, b: &Mat) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c(1.0, 0.0)
    };
    max_abs(&(a - b * phase))
}

/// Kraus limits `A_i^0` along a subsequence.
#[derive(Debug, Clone)]
pub struct KrausExtraction {
    pub kraus: Vec<Mat>,
    pub subsequence: Vec<usize>,
    /// Whether the Kraus lists had to be rotated onto a common reference.
    pub aligned: bool,
    /// `max_i max_phi ||(A_i^{n_k} - A_i^0) phi||` over basis probes at the
    /// last subsequence element.
    pub final_probe_error: f64,
    /// Strong distance between `sum_i A_i^0 (.) A_i^0*` and the limit
    /// obtained by the diagonal method.
    pub reproduction_residual: f64,
}

impl KrausExtraction {
    pub fn operation(&self, d_in: usize, d_out: usize) -> Result<QuantumOperation> {
        QuantumOperation::from_kraus_auto(d_in, d_out, self.kraus.clone(), 1e-8, 1e-8)
    }
}

/// Unitary `U` maximizing `Re sum_i <ref_i, sum_j U_ij a_j>`, applied to `a`.
fn procrustes(reference: &[Mat], a: &[Mat]) -> Vec<Mat> {
    let m = a.len();
    // M_ji = <ref_i, a_j>, objective Re Tr(U M)
    let mm = Mat::from_fn(m, m, |j, i| (reference[i].adjoint() * &a[j]).trace());
    let svd = mm.svd(true, true);
    let (w, zt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let u = zt.adjoint() * w.adjoint();
    (0..m)
        .map(|i| {
            (0..m).fold(linalg::zeros(a[0].nrows(), a[0].ncols()), |acc, j| {
                acc + &a[j] * u[(i, j)]
            })
        })
        .collect()
}

fn concat(kraus: &[Mat]) -> Vec<f64> {
    kraus.iter().flat_map(flatten).collect()
}

/// Extracts converging Kraus lists from a sequence whose Kraus counts are
/// bounded by `bound`.
pub fn extract_kraus_subsequence(
    seq: &ChannelSequence,
    indices: &[usize],
    bound: usize,
    tol: &Tolerances,
) -> Result<KrausExtraction> {
    if indices.is_empty() || bound == 0 {
        return Err(Error::invalid("empty window or zero Kraus bound"));
    }
    let (d_in, d_out) = (seq.dim_in(), seq.dim_out());
    let ops = seq.evaluate(indices)?;
    let lists: Vec<Vec<Mat>> = ops
        .iter()
        .zip(indices)
        .map(|(op, &n)| {
            let mut list = if op.kraus_count() <= bound {
                op.kraus().to_vec()
            } else {
                let canon = op.canonical(tol.rank);
                if canon.kraus_count() > bound {
                    return Err(Error::Unsupported(format!(
                        "element {n} has Choi rank {} above the Kraus bound {bound}",
                        canon.kraus_count()
                    )));
                }
                canon.kraus().to_vec()
            };
            list.resize(bound, linalg::zeros(d_out, d_in));
            Ok(list)
        })
        .collect::<Result<_>>()?;

    let mut aligned = false;
    let mut est = estimate_limit(
        indices,
        &lists.iter().map(|l| concat(l)).collect::<Vec<_>>(),
        tol.cauchy,
    );
    let mut used = lists.clone();
    if !est.converged {
        let reference = lists.last().expect("non-empty window").clone();
        used = lists.par_iter().map(|l| procrustes(&reference, l)).collect();
        est = estimate_limit(
            indices,
            &used.iter().map(|l| concat(l)).collect::<Vec<_>>(),
            tol.cauchy,
        );
        aligned = true;
    }
    if !est.converged {
        return Err(Error::Inconclusive(
            "Kraus lists have no converging subsequence on the window".into(),
        ));
    }
    let block = 2 * d_out * d_in;
    let kraus: Vec<Mat> = (0..bound)
        .map(|i| unflatten(&est.value[i * block..(i + 1) * block], d_out, d_in))
        .filter(|k| max_abs(k) > 1e-14)
        .collect();
    let subsequence: Vec<usize> = est.members.iter().map(|&p| indices[p]).collect();
    let last = *est.members.last().expect("converged estimate has members");
    let final_probe_error = kraus
        .iter()
        .zip(&used[last])
        .map(|(a0, an)| linalg::operator_norm(&(an - a0)))
        .fold(0.0, f64::max);

    let limit_op = QuantumOperation::from_kraus_auto(d_in, d_out, kraus.clone(), 1e-8, 1e-8)?;
    let diagonal = extract_limit_point(seq, &subsequence, None, tol.cauchy)?;
    let reproduction_residual = strong_distance_default(&limit_op, &diagonal.operation)?;
    Ok(KrausExtraction {
        kraus,
        subsequence,
        aligned,
        final_probe_error,
        reproduction_residual,
    })
}

/// Single-Kraus limit `V_0` of a sequence `V_n (.) V_n*`.
#[derive(Debug, Clone)]
pub struct RankOneAlignment {
    pub v0: Mat,
    pub subsequence: Vec<usize>,
    /// Phase `theta_n` removed from each `V_n`.
    pub phases: Vec<(usize, f64)>,
    /// Strong distance of `V_0 (.) V_0*` to the supplied limit, if any.
    pub residual: Option<f64>,
    pub window: Window,
}

fn single_kraus(op: &QuantumOperation, n: usize, tol: &Tolerances) -> Result<Mat> {
    match op.kraus_count() {
        0 => Ok(linalg::zeros(op.dim_out(), op.dim_in())),
        1 => Ok(op.kraus()[0].clone()),
        _ => {
            let canon = op.canonical(tol.rank);
            match canon.kraus_count() {
                0 => Ok(linalg::zeros(op.dim_out(), op.dim_in())),
                1 => Ok(canon.kraus()[0].clone()),
                r => Err(Error::invalid(format!(
                    "element {n} has Choi rank {r}, expected a single Kraus operator"
                ))),
            }
        }
    }
}

/// Aligns the phases of `V_n` to the limit's Kraus operator `U` (or to the
/// window-end element when no limit is supplied) by maximizing the real
/// overlap `<U (x) I Omega | V_n (x) I Omega> = Tr U* V_n sigma`, then
/// estimates the limit of the aligned operators.
pub fn align_rank_one(
    seq: &ChannelSequence,
    limit: Option<&QuantumOperation>,
    indices: &[usize],
    sigma: Option<&State>,
    tol: &Tolerances,
) -> Result<RankOneAlignment> {
    if indices.is_empty() {
        return Err(Error::invalid("index window is empty"));
    }
    let d_in = seq.dim_in();
    let default_sigma;
    let sigma = match sigma {
        Some(s) => s,
        None => {
            default_sigma = default_faithful_state(d_in);
            &default_sigma
        }
    };
    Error::check_dim(d_in, sigma.dim())?;
    let ops = seq.evaluate(indices)?;
    let vs: Vec<Mat> = ops
        .iter()
        .zip(indices)
        .map(|(op, &n)| single_kraus(op, n, tol))
        .collect::<Result<_>>()?;
    let reference = match limit {
        Some(l) => {
            let rank = l.choi_rank(tol.rank);
            if rank > 1 {
                return Err(Error::RankOneContradiction { rank });
            }
            single_kraus(l, 0, tol)?
        }
        None => vs.last().expect("non-empty window").clone(),
    };
    let ref_adj = reference.adjoint();
    let mut phases = Vec::with_capacity(vs.len());
    let aligned: Vec<Vec<f64>> = vs
        .iter()
        .zip(indices)
        .map(|(v, &n)| {
            let z = (&ref_adj * v * sigma.matrix()).trace();
            let theta = if z.norm() > 1e-14 { z.arg() } else { 0.0 };
            phases.push((n, theta));
            flatten(&(v * c(theta.cos(), -theta.sin())))
        })
        .collect();
    let est = estimate_limit(indices, &aligned, tol.cauchy);
    if !est.converged {
        return Err(Error::Inconclusive(
            "phase-aligned operators do not converge on the window".into(),
        ));
    }
    let v0 = unflatten(&est.value, seq.dim_out(), d_in);
    let residual = match limit {
        Some(l) => {
            let op = QuantumOperation::from_kraus_auto(d_in, seq.dim_out(), vec![v0.clone()], 1e-8, 1e-8)?;
            Some(strong_distance_default(&op, l)?)
        }
        None => None,
    };
    Ok(RankOneAlignment {
        v0,
        subsequence: est.members.iter().map(|&p| indices[p]).collect(),
        phases,
        residual,
        window: Window::of(indices),
    })
}

/// `s(m) = max_A sum_i p_i ||(I - P_m) A phi_i||^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorTailProfile {
    pub ranks: Vec<usize>,
    pub values: Vec<f64>,
}

impl OperatorTailProfile {
    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Tail test for a family of contractions; `basis` holds the vectors
/// `phi_i` as columns and `weights` the distribution `p_i`.
pub fn operator_family_tail_test(
    ops: &[Mat],
    basis: &Mat,
    weights: &[f64],
    ladder: &TruncationLadder,
) -> Result<OperatorTailProfile> {
    if ops.is_empty() {
        return Err(Error::invalid("operator family is empty"));
    }
    Error::check_dim(basis.ncols(), weights.len())?;
    if weights.iter().any(|&p| p < 0.0 || !p.is_finite())
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-10
    {
        return Err(Error::invalid("weights are not a probability distribution"));
    }
    for (k, a) in ops.iter().enumerate() {
        linalg::ensure_finite(a)?;
        Error::check_dim(basis.nrows(), a.ncols())?;
        Error::check_dim(ladder.dim(), a.nrows())?;
        let norm = linalg::operator_norm(a);
        if norm > 1.0 + 1e-10 {
            return Err(Error::precondition(format!(
                "operator {k} has norm {norm} outside the unit ball"
            )));
        }
    }
    let images: Vec<Mat> = ops.iter().map(|a| a * basis).collect();
    let d = ladder.dim();
    let values = ladder
        .projectors()
        .iter()
        .map(|p| {
            let comp = linalg::identity(d) - p.matrix();
            images
                .iter()
                .map(|img| {
                    let out = &comp * img;
                    (0..weights.len())
                        .map(|i| weights[i] * out.column(i).norm_squared())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(OperatorTailProfile {
        ranks: ladder.ranks(),
        values,
    })
}
