//! Limits of reversing channels along a convergent sequence.

use serde::Serialize;

use crate::convergence::metric::herm_trace_norm;
use crate::convergence::{extract_limit_point, Extraction};
use crate::error::{Error, Result};
use crate::family::ChannelSequence;
use crate::linalg::{self, Mat};
use crate::operator::State;
use crate::spec::ChannelSpec;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Serialize)]
pub struct ReversingVerdict {
    /// Largest `|| Psi_n(Phi_n(rho)) - rho ||_1` over the window and family.
    pub window_residual: f64,
    pub limit_forward: Option<ChannelSpec>,
    /// Rank of the support of `Phi_0(rho_0)`.
    pub support_rank: usize,
    /// Limit of the reversing maps restricted to that support.
    pub limit_reversal: Option<ChannelSpec>,
    /// `|| Psi_*(Phi_0(rho)) - rho ||_1` per family member.
    pub reversal_residuals: Vec<f64>,
    pub holds: bool,
    pub error: Option<String>,
}

/// Restricts the reversing maps `Psi_n` to the support of `Phi_0(rho_0)`,
/// extracts their limit and checks that it reverses `Phi_0` on the family.
pub fn reversing_sequence_harness(
    phi: &ChannelSequence,
    psi: &ChannelSequence,
    family: &[State],
    rho0: &State,
    indices: &[usize],
    tol: &Tolerances,
) -> Result<ReversingVerdict> {
    if family.is_empty() || indices.is_empty() {
        return Err(Error::invalid("family and window must be non-empty"));
    }
    Error::check_dim(phi.dim_out(), psi.dim_in())?;
    Error::check_dim(phi.dim_in(), psi.dim_out())?;
    Error::check_dim(phi.dim_in(), rho0.dim())?;
    if !rho0.is_faithful(tol.supp) {
        return Err(Error::precondition("reference state is not faithful"));
    }
    let (fw, bw) = (phi.evaluate(indices)?, psi.evaluate(indices)?);
    let mut window_residual = 0.0f64;
    for (k, n) in indices.iter().enumerate() {
        for rho in family {
            Error::check_dim(phi.dim_in(), rho.dim())?;
            let r = herm_trace_norm(&(bw[k].act(&fw[k].act(rho.matrix())) - rho.matrix()));
            if r > tol.reversibility {
                return Err(Error::precondition(format!(
                    "Psi_{n} does not reverse Phi_{n} on the family (residual {r:.3e})"
                )));
            }
            window_residual = window_residual.max(r);
        }
    }

    let mut verdict = ReversingVerdict {
        window_residual,
        limit_forward: None,
        support_rank: 0,
        limit_reversal: None,
        reversal_residuals: Vec::new(),
        holds: false,
        error: None,
    };
    let forward: Extraction = match extract_limit_point(phi, indices, None, tol.cauchy) {
        Ok(ex) => ex,
        Err(e) => {
            verdict.error = Some(format!("forward limit: {e}"));
            return Ok(verdict);
        }
    };
    let phi0 = forward.operation;
    verdict.limit_forward = Some(ChannelSpec::from_operation(&phi0));
    let eig = linalg::HermitianEigen::new(&phi0.act(rho0.matrix()));
    let rank = eig.rank(tol.supp);
    verdict.support_rank = rank;
    let embed: Mat = eig.vectors.columns(0, rank).into_owned();
    let e2 = embed.clone();
    let restricted = psi.map("restricted_reversal", move |op| op.restrict_input(&e2))?;
    let reversal = match extract_limit_point(&restricted, indices, None, tol.cauchy) {
        Ok(ex) => ex.operation,
        Err(e) => {
            verdict.error = Some(format!(
                "reversing maps have no detectable limit ({e}); this contradicts the hypotheses"
            ));
            return Ok(verdict);
        }
    };
    verdict.limit_reversal = Some(ChannelSpec::from_operation(&reversal));
    verdict.reversal_residuals = family
        .iter()
        .map(|rho| {
            let compressed = embed.adjoint() * phi0.act(rho.matrix()) * &embed;
            herm_trace_norm(&(reversal.act(&compressed) - rho.matrix()))
        })
        .collect();
    verdict.holds = verdict.reversal_residuals.iter().all(|&r| r <= tol.reversibility);
    Ok(verdict)
}
