//! Relative entropy with Lindblad's extension to positive operators, mutual
//! information, conditional mutual information over projector ladders and
//! entropic verification helpers. All quantities are in nats unless a field
//! name says otherwise.

pub mod energy;
pub mod harness;
pub mod qcmi;

use serde::{Serialize, Serializer};

use crate::channel::QuantumOperation;
use crate::error::{Error, Result};
use crate::linalg::{self, ptrace, real_trace, HermitianEigen, Mat, Subsystem};
use crate::operator::{PositiveOperator, State};
use crate::tolerance::Tolerances;

pub use energy::{energy_amplification, energy_constraint, EnergyConstraint, EnergyModel, EnergyReport, ProbeEnergy};
pub use harness::{
    convergence_preservation_harness, marginal_domination_check, HarnessRow, MapSequence,
    MarginalDomination, PreservationReport,
};
pub use qcmi::{eigenbasis_ladders, fr_verify, qcmi, qcmi_direct, FrReport, QcmiReport, Tripartite};

/// A real number or `+inf`, together with the mass of the first argument
/// found outside the support of the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedReal {
    /// `f64::INFINITY` when `infinite` is set.
    pub value: f64,
    pub infinite: bool,
    pub support_defect: f64,
}

impl ExtendedReal {
    pub fn finite(value: f64) -> Self {
        ExtendedReal {
            value,
            infinite: false,
            support_defect: 0.0,
        }
    }

    pub fn as_finite(&self) -> Option<f64> {
        (!self.infinite).then_some(self.value)
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            value: Option<f64>,
            infinite: bool,
            support_defect: f64,
            unit: &'static str,
        }
        Repr {
            value: self.as_finite(),
            infinite: self.infinite,
            support_defect: self.support_defect,
            unit: "nats",
        }
        .serialize(s)
    }
}

/// `x ln x` with the `0 ln 0 = 0` convention below `eps`.
fn xlogx(x: f64, eps: f64) -> f64 {
    if x > eps {
        x * x.ln()
    } else {
        0.0
    }
}

/// Von Neumann entropy `-Tr rho ln rho` of a positive matrix (not necessarily
/// normalized), with eigenvalues at or below `eps` treated as zero.
pub(crate) fn entropy_raw(m: &Mat, eps: f64) -> f64 {
    -HermitianEigen::new(m)
        .values
        .iter()
        .map(|&v| xlogx(v, eps))
        .sum::<f64>()
}

pub fn von_neumann_entropy(rho: &PositiveOperator, tol: &Tolerances) -> f64 {
    entropy_raw(rho.matrix(), tol.supp)
}

/// `Tr rho ln rho - Tr rho ln sigma + Tr sigma - Tr rho` on the support of
/// `sigma`; the mass `Tr rho (I - P_sigma)` is the support defect.
pub(crate) fn relative_entropy_raw(rho: &Mat, sigma: &Mat, tol: &Tolerances) -> ExtendedReal {
    let se = HermitianEigen::new(sigma);
    let mut cross = 0.0;
    let mut defect = 0.0;
    for k in 0..se.dim() {
        let v = se.vector(k);
        let weight = (v.adjoint() * rho * &v)[(0, 0)].re;
        if se.values[k] > tol.supp {
            cross += weight * se.values[k].ln();
        } else {
            defect += weight;
        }
    }
    let defect = defect.max(0.0);
    if defect > tol.inf_supp {
        return ExtendedReal {
            value: f64::INFINITY,
            infinite: true,
            support_defect: defect,
        };
    }
    let self_term = -entropy_raw(rho, tol.supp);
    let value = self_term - cross + real_trace(sigma) - real_trace(rho);
    ExtendedReal {
        value,
        infinite: false,
        support_defect: defect,
    }
}

/// Relative entropy `D(rho || sigma)` in nats, extended to arbitrary positive
/// operators. `D(0 || sigma) = Tr sigma`.
pub fn relative_entropy(
    rho: &PositiveOperator,
    sigma: &PositiveOperator,
    tol: &Tolerances,
) -> Result<ExtendedReal> {
    Error::check_dim(rho.dim(), sigma.dim())?;
    Ok(relative_entropy_raw(rho.matrix(), sigma.matrix(), tol))
}

pub fn relative_entropy_states(rho: &State, sigma: &State, tol: &Tolerances) -> Result<ExtendedReal> {
    relative_entropy(rho.operator(), sigma.operator(), tol)
}

/// `I(X:Y) = D(omega || omega_X (x) omega_Y)` with the scaling rule
/// `I(X:Y)_w = [Tr w] I(X:Y)_{w / Tr w}` for non-normalized `w`.
pub(crate) fn mutual_information_raw(omega: &Mat, dx: usize, dy: usize, tol: &Tolerances) -> f64 {
    let t = real_trace(omega);
    if t <= tol.supp {
        return 0.0;
    }
    let w = omega.unscale(t);
    let wx = ptrace(&w, dx, dy, Subsystem::First);
    let wy = ptrace(&w, dx, dy, Subsystem::Second);
    let d = relative_entropy_raw(&w, &linalg::kron(&wx, &wy), tol);
    // supp w lies inside supp w_X (x) w_Y, so the value is always finite
    t * d.value
}

/// Mutual information of a positive operator on `X (x) Y`.
pub fn mutual_information(
    omega: &PositiveOperator,
    dx: usize,
    dy: usize,
    tol: &Tolerances,
) -> Result<f64> {
    linalg::partial_trace(omega.matrix(), dx, dy, Subsystem::First)?;
    Ok(mutual_information_raw(omega.matrix(), dx, dy, tol))
}

/// Outcome of the data-processing check `D(Phi rho || Phi sigma) <= D(rho || sigma)`.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub d_in: ExtendedReal,
    pub d_out: ExtendedReal,
    /// `D_in - D_out`; absent when the input divergence is infinite.
    pub slack: Option<f64>,
    /// Set when `D_in` is infinite and the inequality says nothing.
    pub vacuous: bool,
}

pub fn monotonicity_check(
    phi: &QuantumOperation,
    rho: &State,
    sigma: &State,
    tol: &Tolerances,
) -> Result<MonotonicityReport> {
    Error::check_dim(phi.dim_in(), rho.dim())?;
    Error::check_dim(phi.dim_in(), sigma.dim())?;
    let d_in = relative_entropy_raw(rho.matrix(), sigma.matrix(), tol);
    let d_out = relative_entropy_raw(&phi.act(rho.matrix()), &phi.act(sigma.matrix()), tol);
    let slack = match (d_in.as_finite(), d_out.as_finite()) {
        (Some(a), Some(b)) => Some(a - b),
        (Some(_), None) => Some(f64::NEG_INFINITY),
        (None, _) => None,
    };
    Ok(MonotonicityReport {
        d_in,
        d_out,
        slack,
        vacuous: d_in.infinite,
    })
}
