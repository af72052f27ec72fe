//! The strong-convergence metric on operations.

use crate::channel::QuantumOperation;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CVec, HermitianEigen, Mat};
use crate::operator::State;

/// Probes beyond this position carry weight below `2^-60` and are dropped.
pub const MAX_PROBES: usize = 60;

/// Trace norm of a Hermitian matrix via its spectrum.
pub(crate) fn herm_trace_norm(m: &Mat) -> f64 {
    HermitianEigen::new(m).values.iter().map(|l| l.abs()).sum()
}

/// Default probe list on `C^d`, ordered by level: for `j = 0, 1, ...` the
/// basis projector `|j><j|` (an eigenprojector of the default faithful
/// state), followed by `(|i>+|j>)/sqrt2` and `(|i>+i|j>)/sqrt2` for `i < j`.
pub fn default_probes(d: usize) -> Vec<State> {
    let mut probes = Vec::new();
    'outer: for j in 0..d {
        probes.push(State::basis(d, j));
        for i in 0..j {
            if probes.len() + 2 > MAX_PROBES {
                break 'outer;
            }
            for phase in [c(1.0, 0.0), c(0.0, 1.0)] {
                let mut v = CVec::zeros(d);
                v[i] = c(1.0, 0.0);
                v[j] = phase;
                probes.push(State::pure(&v).expect("nonzero probe vector"));
            }
        }
        if probes.len() >= MAX_PROBES {
            break;
        }
    }
    probes
}

/// `sum_i 2^-i ||(Phi - Psi)(rho_i)||_1` over the probe list (`i` from 1).
pub fn strong_distance(
    phi: &QuantumOperation,
    psi: &QuantumOperation,
    probes: &[State],
) -> Result<f64> {
    Error::check_dim(phi.dim_in(), psi.dim_in())?;
    Error::check_dim(phi.dim_out(), psi.dim_out())?;
    if probes.is_empty() {
        return Err(Error::invalid("probe list is empty"));
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for rho in probes {
        Error::check_dim(phi.dim_in(), rho.dim())?;
        weight *= 0.5;
        let diff = phi.act(rho.matrix()) - psi.act(rho.matrix());
        total += weight * herm_trace_norm(&diff);
    }
    Ok(total)
}

/// [`strong_distance`] over [`default_probes`].
pub fn strong_distance_default(phi: &QuantumOperation, psi: &QuantumOperation) -> Result<f64> {
    strong_distance(phi, psi, &default_probes(phi.dim_in()))
}

/// Trace-norm distance of two positive operators of equal size.
pub fn output_distance(a: &Mat, b: &Mat) -> Result<f64> {
    Error::check_dim(a.nrows(), b.nrows())?;
    Ok(herm_trace_norm(&linalg::hermitian_part(&(a - b))))
}
