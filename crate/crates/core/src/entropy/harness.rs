//! Window-level harnesses: preservation of relative-entropy convergence under
//! fixed or convergent maps, and marginal domination of bipartite outputs.

use rayon::prelude::*;
use serde::Serialize;

use super::relative_entropy_raw;
use crate::channel::QuantumOperation;
use crate::convergence::{estimate_limit, estimate_matrix_limit, extract_limit_point};
use crate::error::{Error, Result};
use crate::family::ChannelSequence;
use crate::linalg::{self, lambda_min, ptrace, Mat, Subsystem};
use crate::operator::{PositiveOperator, State};
use crate::spec::ChannelSpec;
use crate::tolerance::Tolerances;

/// The maps applied along the window.
#[derive(Debug, Clone, Copy)]
pub enum MapSequence<'a> {
    Fixed(&'a QuantumOperation),
    /// A sequence of maps, optionally with a known strong limit. Without one
    /// the output limits are estimated from the window.
    Sequence {
        seq: &'a ChannelSequence,
        limit: Option<&'a QuantumOperation>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessRow {
    pub n: usize,
    pub input: f64,
    pub output: f64,
    /// `|output - limit_output|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PreservationReport {
    pub rows: Vec<HarnessRow>,
    /// `D(rho_0 || sigma_0)`.
    pub limit_input: f64,
    /// Relative entropy of the limit outputs.
    pub limit_output: f64,
    /// "fixed", "supplied" or "estimated".
    pub output_limit_source: &'static str,
    pub terminal_deviation: f64,
    pub converged: bool,
    pub unit: &'static str,
    pub tolerances: Tolerances,
}

impl PreservationReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("rows serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }
}

fn finite_or(d: super::ExtendedReal, what: impl FnOnce() -> String) -> Result<f64> {
    d.as_finite().ok_or_else(|| {
        Error::precondition(format!(
            "{} is infinite (support defect {:.3e})",
            what(),
            d.support_defect
        ))
    })
}

/// Tabulates `D(Phi_n(rho_n) || Phi_n(sigma_n))` against the relative entropy
/// of the limit outputs. The inputs must satisfy
/// `D(rho_n || sigma_n) -> D(rho_0 || sigma_0) < inf` on the window.
#[allow(clippy::too_many_arguments)]
pub fn convergence_preservation_harness(
    indices: &[usize],
    rho: &[PositiveOperator],
    sigma: &[PositiveOperator],
    rho0: &PositiveOperator,
    sigma0: &PositiveOperator,
    maps: MapSequence<'_>,
    tol: &Tolerances,
) -> Result<PreservationReport> {
    if indices.is_empty() || rho.len() != indices.len() || sigma.len() != indices.len() {
        return Err(Error::invalid("window and input sequences must be non-empty and aligned"));
    }
    if indices.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::invalid("window indices must be strictly increasing"));
    }
    let d = rho0.dim();
    Error::check_dim(d, sigma0.dim())?;
    for (r, s) in rho.iter().zip(sigma) {
        Error::check_dim(d, r.dim())?;
        Error::check_dim(d, s.dim())?;
    }

    let limit_input = finite_or(relative_entropy_raw(rho0.matrix(), sigma0.matrix(), tol), || {
        "limit input relative entropy".into()
    })?;
    let inputs: Vec<f64> = indices
        .par_iter()
        .enumerate()
        .map(|(k, n)| {
            finite_or(relative_entropy_raw(rho[k].matrix(), sigma[k].matrix(), tol), || {
                format!("input relative entropy at n = {n}")
            })
        })
        .collect::<Result<_>>()?;
    // either the window tail already sits at the limit, or the sequence has
    // a detectable limit and that limit is D(rho_0 || sigma_0)
    let tail = &inputs[inputs.len() - inputs.len().div_ceil(4)..];
    let tail_ok = tail.iter().all(|v| (v - limit_input).abs() <= tol.convergence);
    let est = estimate_limit(indices, &inputs.iter().map(|v| vec![*v]).collect::<Vec<_>>(), tol.convergence);
    let est_ok = est.converged && (est.value[0] - limit_input).abs() <= tol.convergence;
    if !tail_ok && !est_ok {
        let profile: Vec<String> = indices
            .iter()
            .zip(&inputs)
            .map(|(n, v)| format!("{n}:{:.3e}", (v - limit_input).abs()))
            .collect();
        return Err(Error::precondition(format!(
            "input relative entropies do not converge to {limit_input:.6e}; deviations [{}]",
            profile.join(", ")
        )));
    }

    let ops: Vec<QuantumOperation> = match maps {
        MapSequence::Fixed(phi) => vec![phi.clone(); indices.len()],
        MapSequence::Sequence { seq, .. } => seq.evaluate(indices)?,
    };
    for op in &ops {
        Error::check_dim(d, op.dim_in())?;
    }
    let outputs: Vec<(Mat, Mat)> = ops
        .par_iter()
        .enumerate()
        .map(|(k, op)| (op.act(rho[k].matrix()), op.act(sigma[k].matrix())))
        .collect();

    let (out_rho0, out_sigma0, source) = match maps {
        MapSequence::Fixed(phi) => (phi.act(rho0.matrix()), phi.act(sigma0.matrix()), "fixed"),
        MapSequence::Sequence { limit: Some(l), .. } => {
            Error::check_dim(d, l.dim_in())?;
            (l.act(rho0.matrix()), l.act(sigma0.matrix()), "supplied")
        }
        MapSequence::Sequence { limit: None, .. } => {
            let (xs, ys): (Vec<Mat>, Vec<Mat>) = outputs.iter().cloned().unzip();
            let (x0, ex) = estimate_matrix_limit(indices, &xs, tol.cauchy);
            let (y0, ey) = estimate_matrix_limit(indices, &ys, tol.cauchy);
            if !ex.converged || !ey.converged {
                return Err(Error::precondition(format!(
                    "output sequences do not converge on the window (spreads {:.3e}, {:.3e})",
                    ex.spread, ey.spread
                )));
            }
            (linalg::psd_projection(&x0), linalg::psd_projection(&y0), "estimated")
        }
    };
    let limit_output = finite_or(relative_entropy_raw(&out_rho0, &out_sigma0, tol), || {
        "limit output relative entropy".into()
    })?;

    let rows: Vec<HarnessRow> = indices
        .par_iter()
        .enumerate()
        .map(|(k, &n)| {
            let out = relative_entropy_raw(&outputs[k].0, &outputs[k].1, tol);
            let output = finite_or(out, || format!("output relative entropy at n = {n}"))?;
            Ok(HarnessRow {
                n,
                input: inputs[k],
                output,
                deviation: (output - limit_output).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let terminal_deviation = rows[rows.len() - 1].deviation;
    Ok(PreservationReport {
        rows,
        limit_input,
        limit_output,
        output_limit_source: source,
        terminal_deviation,
        converged: terminal_deviation <= tol.convergence,
        unit: "nats",
        tolerances: *tol,
    })
}

/// Outcome of the marginal domination test `[Phi_n(rho)]_B <= beta`,
/// `[Phi_n(rho)]_C <= gamma` over the window.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalDomination {
    pub holds: bool,
    /// Smallest `lambda_min(beta - [Phi_n(rho)]_B)` and the index attaining it.
    pub witness_b: (usize, f64),
    pub witness_c: (usize, f64),
    /// Limit point extracted when the domination holds.
    pub extracted: Option<ChannelSpec>,
    pub extraction_residual: Option<f64>,
    pub extraction_error: Option<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn marginal_domination_check(
    seq: &ChannelSequence,
    rho: &State,
    d_b: usize,
    d_c: usize,
    beta: &Mat,
    gamma: &Mat,
    indices: &[usize],
    tol: &Tolerances,
) -> Result<MarginalDomination> {
    if indices.is_empty() {
        return Err(Error::invalid("empty window"));
    }
    Error::check_dim(seq.dim_in(), rho.dim())?;
    Error::check_dim(d_b * d_c, seq.dim_out())?;
    Error::check_dim(d_b, linalg::ensure_square(beta)?)?;
    Error::check_dim(d_c, linalg::ensure_square(gamma)?)?;
    if !rho.is_faithful(tol.supp) {
        return Err(Error::precondition("reference state is not faithful"));
    }
    let ops = seq.evaluate(indices)?;
    let gaps: Vec<(f64, f64)> = ops
        .par_iter()
        .map(|op| {
            let out = op.act(rho.matrix());
            let b = ptrace(&out, d_b, d_c, Subsystem::First);
            let c = ptrace(&out, d_b, d_c, Subsystem::Second);
            (lambda_min(&(beta - b)), lambda_min(&(gamma - c)))
        })
        .collect();
    let worst = |pick: fn(&(f64, f64)) -> f64| {
        indices
            .iter()
            .zip(&gaps)
            .map(|(&n, g)| (n, pick(g)))
            .fold((indices[0], f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    };
    let witness_b = worst(|g| g.0);
    let witness_c = worst(|g| g.1);
    let holds = witness_b.1 >= -tol.psd && witness_c.1 >= -tol.psd;
    let mut report = MarginalDomination {
        holds,
        witness_b,
        witness_c,
        extracted: None,
        extraction_residual: None,
        extraction_error: None,
    };
    if holds {
        match extract_limit_point(seq, indices, None, tol.cauchy) {
            Ok(ex) => {
                report.extracted = Some(ChannelSpec::from_operation(&ex.operation));
                report.extraction_residual = Some(ex.final_residual());
            }
            Err(e) => report.extraction_error = Some(e.to_string()),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Kind;
    use crate::convergence::strong_distance_default;
    use crate::family::{make_family, FamilySpec};
    use crate::linalg::diag;
    use crate::random;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn log_window() -> Vec<usize> {
        (1..=7).map(|k| 10usize.pow(k)).collect()
    }

    fn mix(a: &Mat, b: &Mat, n: usize) -> PositiveOperator {
        let t = 1.0 / n as f64;
        PositiveOperator::new(a.scale(1.0 - t) + b.scale(t), &tol()).unwrap()
    }

    #[test]
    fn constant_inputs_have_zero_deviation() {
        let mut r = random::rng(1);
        let rho0 = random::state(3, &mut r);
        let sigma0 = random::faithful_state(3, 0.4, &mut r);
        let phi = random::channel(3, 2, 2, &mut r);
        let idx = vec![1, 2, 3];
        let rho = vec![rho0.operator().clone(); 3];
        let sigma = vec![sigma0.operator().clone(); 3];
        let rep = convergence_preservation_harness(
            &idx, &rho, &sigma, rho0.operator(), sigma0.operator(), MapSequence::Fixed(&phi), &tol(),
        )
        .unwrap();
        assert!(rep.terminal_deviation < 1e-14);
        assert!(rep.converged);
        let csv = rep.to_csv();
        assert!(csv.starts_with("n,input,output,deviation"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn mixed_inputs_under_fixed_channel() {
        let mut r = random::rng(2);
        let rho0 = random::faithful_state(3, 0.2, &mut r);
        let sigma0 = random::faithful_state(3, 0.5, &mut r);
        let phi = random::channel(3, 3, 2, &mut r);
        let idx = log_window();
        let rho: Vec<_> = idx.iter().map(|&n| mix(rho0.matrix(), sigma0.matrix(), n)).collect();
        let sigma = vec![sigma0.operator().clone(); idx.len()];
        let rep = convergence_preservation_harness(
            &idx, &rho, &sigma, rho0.operator(), sigma0.operator(), MapSequence::Fixed(&phi), &tol(),
        )
        .unwrap();
        assert!(rep.converged, "{:?}", rep.rows);
        for pair in rep.rows.windows(2) {
            assert!(pair[1].deviation <= pair[0].deviation + 1e-12);
        }
    }

    #[test]
    fn rotating_basis_with_commuting_inputs() {
        let spec: FamilySpec = serde_json::from_str(
            r#"{"family":"rotating_basis","params":{"d":4}}"#,
        )
        .unwrap();
        let seq = make_family(&spec).unwrap();
        let rho0 = diag(&[0.4, 0.3, 0.2, 0.1]);
        let sigma0 = diag(&[0.1, 0.2, 0.3, 0.4]);
        let flat = diag(&[0.25; 4]);
        let idx = log_window();
        let rho: Vec<_> = idx.iter().map(|&n| mix(&rho0, &flat, n)).collect();
        let sigma: Vec<_> = idx.iter().map(|&n| mix(&sigma0, &flat, n)).collect();
        let (r0, s0) = (
            PositiveOperator::new(rho0, &tol()).unwrap(),
            PositiveOperator::new(sigma0, &tol()).unwrap(),
        );
        let pinched = super::super::relative_entropy(&r0, &s0, &tol()).unwrap().value;
        for limit in [None, Some(&QuantumOperation::pinching(&linalg::identity(4)))] {
            let rep = convergence_preservation_harness(
                &idx, &rho, &sigma, &r0, &s0, MapSequence::Sequence { seq: &seq, limit }, &tol(),
            )
            .unwrap();
            assert!((rep.limit_output - pinched).abs() < 1e-8, "{}", rep.limit_output);
            assert!(rep.converged, "{:?}", rep.rows);
        }
    }

    #[test]
    fn non_convergent_inputs_are_rejected() {
        let rho0 = diag(&[0.5, 0.5]);
        let sigma0 = diag(&[0.25, 0.75]);
        let idx: Vec<usize> = (1..=20).collect();
        let rho: Vec<_> = idx
            .iter()
            .map(|&n| {
                let p = if n % 2 == 0 { 0.5 } else { 0.9 };
                PositiveOperator::new(diag(&[p, 1.0 - p]), &tol()).unwrap()
            })
            .collect();
        let sigma = vec![PositiveOperator::new(sigma0.clone(), &tol()).unwrap(); idx.len()];
        let err = convergence_preservation_harness(
            &idx,
            &rho,
            &sigma,
            &PositiveOperator::new(rho0, &tol()).unwrap(),
            &PositiveOperator::new(sigma0, &tol()).unwrap(),
            MapSequence::Fixed(&QuantumOperation::identity(2)),
            &tol(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PreconditionViolated(_)));
    }

    fn marginals(op: &QuantumOperation, rho: &State) -> (Mat, Mat) {
        let out = op.act(rho.matrix());
        (ptrace(&out, 2, 2, Subsystem::First), ptrace(&out, 2, 2, Subsystem::Second))
    }

    #[test]
    fn constant_sequence_is_dominated() {
        let phi = random::channel(3, 4, 2, &mut random::rng(4));
        let rho = random::faithful_state(3, 0.5, &mut random::rng(5));
        let (b, c) = marginals(&phi, &rho);
        let seq = ChannelSequence::constant(phi.clone(), 1, None);
        let idx: Vec<usize> = (1..=10).collect();
        let rep = marginal_domination_check(&seq, &rho, 2, 2, &b, &c, &idx, &tol()).unwrap();
        assert!(rep.holds);
        assert!(rep.extraction_residual.unwrap() < 1e-9);
        let rep = marginal_domination_check(&seq, &rho, 2, 2, &b.scale(0.5), &c, &idx, &tol()).unwrap();
        assert!(!rep.holds);
        assert!(rep.witness_b.1 < 0.0);
        assert!(rep.extracted.is_none());
    }

    #[test]
    fn mixing_family_is_dominated_and_extracted() {
        let mut r = random::rng(6);
        let phi = random::channel(2, 4, 2, &mut r);
        let alt = random::channel(2, 4, 3, &mut r);
        let rho = random::faithful_state(2, 0.5, &mut r);
        let (b1, c1) = marginals(&phi, &rho);
        let (b2, c2) = marginals(&alt, &rho);
        let (p, q) = (phi.clone(), alt.clone());
        let seq = ChannelSequence::from_fn("mixing", 2, 4, 1, None, move |n| {
            let t = 1.0 / n as f64;
            let mut kraus: Vec<Mat> = p.kraus().iter().map(|k| k.scale((1.0 - t).sqrt())).collect();
            kraus.extend(q.kraus().iter().map(|k| k.scale(t.sqrt())));
            QuantumOperation::with_tolerance(2, 4, kraus, Kind::Channel, 1e-9, 1e-9)
        });
        let idx: Vec<usize> = (1..=200).collect();
        let rep = marginal_domination_check(&seq, &rho, 2, 2, &(b1 + b2), &(c1 + c2), &idx, &tol()).unwrap();
        assert!(rep.holds);
        let limit = rep.extracted.expect("extraction succeeds").to_operation().unwrap();
        assert!(strong_distance_default(&limit, &phi).unwrap() < 1e-6);
    }
}
