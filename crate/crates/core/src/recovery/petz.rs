//! The Petz recovery map, its interpolated family, the reversibility test and
//! Donald's identity.

use serde::Serialize;

use crate::channel::QuantumOperation;
use crate::convergence::metric::herm_trace_norm;
use crate::entropy::{relative_entropy_raw, ExtendedReal};
use crate::error::{Error, Result};
use crate::linalg::{self, pinv_sqrt, sqrt_psd, support_projector, Mat};
use crate::operator::State;
use crate::spec::ChannelSpec;
use crate::tolerance::Tolerances;

/// Accepted deviation of `sum R*R` from the support projector of `Phi(sigma)`.
const PETZ_TOL: f64 = 1e-9;

/// `Theta(w) = sigma^{1/2} Phi*(Phi(sigma)^{-1/2} w Phi(sigma)^{-1/2}) sigma^{1/2}`
/// with the inverse square root taken on the numerical support.
#[derive(Debug, Clone)]
pub struct PetzMap {
    operation: QuantumOperation,
    reference: State,
    forward: QuantumOperation,
    eps_supp: f64,
    /// Rank of `Phi(sigma)` at `eps_supp`.
    support_rank: usize,
}

impl PetzMap {
    /// The recovery map itself, `B -> A`.
    pub fn operation(&self) -> &QuantumOperation {
        &self.operation
    }

    pub fn reference(&self) -> &State {
        &self.reference
    }

    pub fn forward(&self) -> &QuantumOperation {
        &self.forward
    }

    pub fn eps_supp(&self) -> f64 {
        self.eps_supp
    }

    pub fn support_rank(&self) -> usize {
        self.support_rank
    }

    pub fn apply_mat(&self, w: &Mat) -> Result<Mat> {
        self.operation.apply_mat(w)
    }

    /// Dual map `A -> X Phi(sigma^{1/2} A sigma^{1/2}) X`, `X = Phi(sigma)^{-1/2}`.
    pub fn dual_apply(&self, a: &Mat) -> Result<Mat> {
        self.operation.dual_apply(a)
    }

    /// Projector onto the numerical support of `Phi(sigma)`.
    pub fn output_support(&self) -> Mat {
        support_projector(&self.forward.act(self.reference.matrix()), self.eps_supp)
    }

    /// `|| Theta(Phi(sigma)) - sigma ||_1`.
    pub fn fixed_point_residual(&self) -> f64 {
        let back = self.operation.act(&self.forward.act(self.reference.matrix()));
        herm_trace_norm(&(back - self.reference.matrix()))
    }
}

/// Petz recovery map of `phi` with respect to the faithful state `sigma`.
pub fn petz_map(phi: &QuantumOperation, sigma: &State, tol: &Tolerances) -> Result<PetzMap> {
    Error::check_dim(phi.dim_in(), sigma.dim())?;
    if !sigma.is_faithful(tol.supp) {
        return Err(Error::precondition(format!(
            "reference state is not faithful (minimum eigenvalue {:.3e})",
            sigma.eigen().min()
        )));
    }
    let out = phi.act(sigma.matrix());
    let eig = linalg::HermitianEigen::new(&out);
    let support_rank = eig.rank(tol.supp);
    let x = pinv_sqrt(&out, tol.supp);
    let root = sqrt_psd(sigma.matrix());
    let kraus: Vec<Mat> = phi.kraus().iter().map(|v| &root * v.adjoint() * &x).collect();
    let operation = QuantumOperation::from_kraus_auto(phi.dim_out(), phi.dim_in(), kraus, PETZ_TOL, PETZ_TOL)?;
    Ok(PetzMap {
        operation,
        reference: sigma.clone(),
        forward: phi.clone(),
        eps_supp: tol.supp,
        support_rank,
    })
}

/// Petz map with respect to `sigma_t = t rho + (1 - t) sigma`, `t` in `(0, 1)`.
pub fn petz_interpolated(
    phi: &QuantumOperation,
    rho: &State,
    sigma: &State,
    t: f64,
    tol: &Tolerances,
) -> Result<PetzMap> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("interpolation parameter {t} must lie in (0, 1)")));
    }
    Error::check_dim(rho.dim(), sigma.dim())?;
    if !sigma.is_faithful(tol.supp) {
        return Err(Error::precondition("reference state is not faithful"));
    }
    let mixed = State::normalized(rho.matrix().scale(t) + sigma.matrix().scale(1.0 - t), tol)?;
    petz_map(phi, &mixed, tol)
}

/// Relative entropies before and after `phi` and the Petz recovery error;
/// the two sides of the reversibility equivalence.
#[derive(Debug, Clone, Serialize)]
pub struct ReversibilityReport {
    pub d_in: ExtendedReal,
    pub d_out: ExtendedReal,
    /// `D_in - D_out`; absent when the test is vacuous.
    pub gap: Option<f64>,
    /// `|| Theta_sigma(Phi(rho)) - rho ||_1`.
    pub recovery_error: f64,
    /// `gap <= tau`.
    pub sufficient: Option<bool>,
    /// `recovery_error <= tau`.
    pub recovered: bool,
    /// Both sides agree at `tau`.
    pub consistent: Option<bool>,
    pub vacuous: bool,
    pub tau: f64,
    pub petz_map: ChannelSpec,
    pub note: &'static str,
}

pub fn reversibility_test(
    phi: &QuantumOperation,
    rho: &State,
    sigma: &State,
    tol: &Tolerances,
) -> Result<ReversibilityReport> {
    Error::check_dim(phi.dim_in(), rho.dim())?;
    let petz = petz_map(phi, sigma, tol)?;
    let d_in = relative_entropy_raw(rho.matrix(), sigma.matrix(), tol);
    let d_out = relative_entropy_raw(&phi.act(rho.matrix()), &phi.act(sigma.matrix()), tol);
    let back = petz.operation.act(&phi.act(rho.matrix()));
    let recovery_error = herm_trace_norm(&(back - rho.matrix()));
    let gap = match (d_in.as_finite(), d_out.as_finite()) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    let tau = tol.reversibility;
    let recovered = recovery_error <= tau;
    let sufficient = gap.map(|g| g <= tau);
    Ok(ReversibilityReport {
        d_in,
        d_out,
        gap,
        recovery_error,
        sufficient,
        recovered,
        consistent: sufficient.map(|s| s == recovered),
        vacuous: gap.is_none(),
        tau,
        petz_map: ChannelSpec::from_operation(&petz.operation),
        note: "verified on the numerical supports at this truncation",
    })
}

/// The four terms of
/// `t D(rho||sigma) = t D(rho||sigma_t) + (1-t) D(sigma||sigma_t) + D(sigma_t||sigma)`.
#[derive(Debug, Clone, Serialize)]
pub struct DonaldReport {
    pub t: f64,
    pub rho_sigma: ExtendedReal,
    pub rho_mix: ExtendedReal,
    pub sigma_mix: ExtendedReal,
    pub mix_sigma: ExtendedReal,
    /// Absent when a term is infinite.
    pub residual: Option<f64>,
}

pub fn donald_identity_check(rho: &State, sigma: &State, t: f64, tol: &Tolerances) -> Result<DonaldReport> {
    Error::check_dim(rho.dim(), sigma.dim())?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("weight {t} must lie in [0, 1]")));
    }
    let mix = rho.matrix().scale(t) + sigma.matrix().scale(1.0 - t);
    let rho_sigma = relative_entropy_raw(rho.matrix(), sigma.matrix(), tol);
    let rho_mix = relative_entropy_raw(rho.matrix(), &mix, tol);
    let sigma_mix = relative_entropy_raw(sigma.matrix(), &mix, tol);
    let mix_sigma = relative_entropy_raw(&mix, sigma.matrix(), tol);
    let residual = match (
        rho_sigma.as_finite(),
        rho_mix.as_finite(),
        sigma_mix.as_finite(),
        mix_sigma.as_finite(),
    ) {
        (Some(a), Some(b), Some(c), Some(d)) => Some((t * a - (t * b + (1.0 - t) * c + d)).abs()),
        _ => None,
    };
    Ok(DonaldReport {
        t,
        rho_sigma,
        rho_mix,
        sigma_mix,
        mix_sigma,
        residual,
    })
}
