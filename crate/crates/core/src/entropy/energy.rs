//! Energy amplification factors and energy-constrained input sets.

use serde::Serialize;

use crate::channel::QuantumOperation;
use crate::error::{Error, Result};
use crate::linalg::{self, real_trace, Mat};
use crate::operator::State;
use crate::tolerance::Tolerances;

/// Probes whose input energy is at or below this are excluded.
const ZERO_ENERGY: f64 = 1e-12;

/// A truncated positive Hamiltonian `H + shift I`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    h: Mat,
    ground_shift: f64,
}

impl EnergyModel {
    /// Requires `H` Hermitian and positive with non-decreasing diagonal in
    /// the canonical basis (levels listed from the ground state up).
    pub fn new(h: Mat, tol: &Tolerances) -> Result<Self> {
        let op = crate::operator::PositiveOperator::new(h, tol)?;
        let h = op.into_matrix();
        for k in 1..h.nrows() {
            if h[(k, k)].re < h[(k - 1, k - 1)].re - tol.herm {
                return Err(Error::invalid(format!(
                    "energy levels are not ordered at level {k}"
                )));
            }
        }
        Ok(EnergyModel { h, ground_shift: 0.0 })
    }

    /// `diag(0, 1, ..., d-1)`.
    pub fn number_operator(d: usize) -> Self {
        let levels: Vec<f64> = (0..d).map(|k| k as f64).collect();
        EnergyModel {
            h: linalg::diag(&levels),
            ground_shift: 0.0,
        }
    }

    /// Adds `shift >= 0` to every level.
    pub fn with_shift(mut self, shift: f64) -> Result<Self> {
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::invalid(format!("ground shift {shift} must be finite and >= 0")));
        }
        self.ground_shift = shift;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn ground_shift(&self) -> f64 {
        self.ground_shift
    }

    pub fn hamiltonian(&self) -> Mat {
        &self.h + linalg::identity(self.dim()).scale(self.ground_shift)
    }

    /// `Tr (H + shift) x`.
    pub fn energy(&self, x: &Mat) -> f64 {
        real_trace(&(&self.h * x)) + self.ground_shift * real_trace(x)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeEnergy {
    pub probe: usize,
    pub input_energy: f64,
    pub output_energy: f64,
    /// Absent for excluded zero-energy probes.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// Largest ratio over the admitted probes; absent if none was admitted.
    pub k_hat: Option<f64>,
    pub probes: Vec<ProbeEnergy>,
    pub excluded: Vec<usize>,
    pub notices: Vec<String>,
}

/// `K = max_probes Tr H_B Phi(rho) / Tr H_A rho`.
pub fn energy_amplification(
    phi: &QuantumOperation,
    h_a: &EnergyModel,
    h_b: &EnergyModel,
    probes: &[State],
) -> Result<EnergyReport> {
    Error::check_dim(phi.dim_in(), h_a.dim())?;
    Error::check_dim(phi.dim_out(), h_b.dim())?;
    let mut rows = Vec::with_capacity(probes.len());
    let mut excluded = Vec::new();
    let mut notices = Vec::new();
    for (k, rho) in probes.iter().enumerate() {
        Error::check_dim(phi.dim_in(), rho.dim())?;
        let input_energy = h_a.energy(rho.matrix());
        let output_energy = h_b.energy(&phi.act(rho.matrix()));
        let ratio = if input_energy > ZERO_ENERGY {
            Some(output_energy / input_energy)
        } else {
            excluded.push(k);
            notices.push(format!("probe {k} has zero input energy and is excluded"));
            None
        };
        rows.push(ProbeEnergy {
            probe: k,
            input_energy,
            output_energy,
            ratio,
        });
    }
    let k_hat = rows.iter().filter_map(|r| r.ratio).reduce(f64::max);
    Ok(EnergyReport {
        k_hat,
        probes: rows,
        excluded,
        notices,
    })
}

/// Membership of `Phi(sigma)` in the set `{Tr H_B x <= E}`.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyConstraint {
    pub output_energy: f64,
    pub budget: f64,
    pub holds: bool,
}

pub fn energy_constraint(
    phi: &QuantumOperation,
    h_b: &EnergyModel,
    sigma: &State,
    budget: f64,
) -> Result<EnergyConstraint> {
    Error::check_dim(phi.dim_in(), sigma.dim())?;
    Error::check_dim(phi.dim_out(), h_b.dim())?;
    let output_energy = h_b.energy(&phi.act(sigma.matrix()));
    Ok(EnergyConstraint {
        output_energy,
        budget,
        holds: output_energy <= budget,
    })
}
