//! Validated operator types: positive operators, states, projectors,
//! truncation ladders and purifications.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    self, basis_vector, ensure_finite, ensure_square, hermitian_part, hermiticity_defect,
    kron_vec, max_abs, ptrace, real_trace, singular_values, sqrt_psd, CVec, HermitianEigen, Mat,
    Subsystem,
};
use crate::tolerance::Tolerances;

/// Trace-class positive operator truncated to a finite dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveOperator {
    matrix: Mat,
}

impl PositiveOperator {
    /// Validates Hermiticity and positivity, then stores the symmetrized matrix.
    pub fn new(m: Mat, tol: &Tolerances) -> Result<Self> {
        ensure_finite(&m)?;
        ensure_square(&m)?;
        let defect = hermiticity_defect(&m);
        if defect > tol.herm {
            return Err(Error::invalid(format!(
                "operator is not Hermitian (defect {defect:.3e})"
            )));
        }
        let h = hermitian_part(&m);
        let lmin = linalg::lambda_min(&h);
        if lmin < -tol.psd {
            return Err(Error::invalid(format!(
                "operator is not positive (minimum eigenvalue {lmin:.3e})"
            )));
        }
        Ok(PositiveOperator { matrix: h })
    }

    /// Symmetrizes and clips tiny negative eigenvalues produced by rounding.
    pub(crate) fn from_trusted(m: Mat) -> Self {
        PositiveOperator {
            matrix: hermitian_part(&m),
        }
    }

    pub fn zero(d: usize) -> Self {
        PositiveOperator {
            matrix: linalg::zeros(d, d),
        }
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        real_trace(&self.matrix)
    }

    pub fn eigen(&self) -> HermitianEigen {
        HermitianEigen::new(&self.matrix)
    }
}

/// Unit-trace positive operator.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    op: PositiveOperator,
}

impl State {
    pub fn new(m: Mat, tol: &Tolerances) -> Result<Self> {
        let op = PositiveOperator::new(m, tol)?;
        let tr = op.trace();
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::invalid(format!("state trace is {tr}, expected 1")));
        }
        Ok(State { op })
    }

    /// Rescales a nonzero positive operator to unit trace.
    pub fn normalized(m: Mat, tol: &Tolerances) -> Result<Self> {
        let op = PositiveOperator::new(m, tol)?;
        let tr = op.trace();
        if tr <= tol.supp {
            return Err(Error::invalid("cannot normalize a zero operator"));
        }
        Ok(State {
            op: PositiveOperator {
                matrix: op.matrix.unscale(tr),
            },
        })
    }

    pub(crate) fn from_trusted(m: Mat) -> Self {
        State {
            op: PositiveOperator::from_trusted(m),
        }
    }

    pub fn pure(psi: &CVec) -> Result<Self> {
        let norm = psi.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("state vector must be nonzero and finite"));
        }
        let u = psi.unscale(norm);
        Ok(State::from_trusted(linalg::projector_onto(&u)))
    }

    /// Diagonal state with the given probabilities (renormalized).
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("probabilities sum to zero"));
        }
        let scaled: Vec<f64> = probs.iter().map(|p| p / total).collect();
        Ok(State::from_trusted(linalg::diag(&scaled)))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        State::from_trusted(linalg::identity(d).unscale(d as f64))
    }

    pub fn basis(d: usize, i: usize) -> Self {
        State::from_trusted(linalg::matrix_unit(d, i, i))
    }

    pub fn matrix(&self) -> &Mat {
        &self.op.matrix
    }

    pub fn operator(&self) -> &PositiveOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn eigen(&self) -> HermitianEigen {
        self.op.eigen()
    }

    /// `true` iff every eigenvalue exceeds `eps`.
    pub fn is_faithful(&self, eps: f64) -> bool {
        self.eigen().min() > eps
    }

    pub fn tensor(&self, other: &State) -> State {
        State::from_trusted(linalg::kron(self.matrix(), other.matrix()))
    }
}

/// The default faithful state at truncation `d`: diagonal with geometric
/// spectrum `lambda_i` proportional to `2^{-i}`.
pub fn default_faithful_state(d: usize) -> State {
    let probs: Vec<f64> = (0..d).map(|i| 0.5f64.powi(i as i32 + 1)).collect();
    State::diagonal(&probs).expect("geometric spectrum is a valid distribution")
}

/// `|| sqrt(rho) sqrt(sigma) ||_1`.
pub fn fidelity(rho: &State, sigma: &State) -> Result<f64> {
    Error::check_dim(rho.dim(), sigma.dim())?;
    Ok(fidelity_raw(rho.matrix(), sigma.matrix()))
}

pub(crate) fn fidelity_raw(rho: &Mat, sigma: &Mat) -> f64 {
    let prod = sqrt_psd(rho) * sqrt_psd(sigma);
    singular_values(&prod).iter().sum::<f64>().min(1.0 + 1e-12)
}

/// Partial trace of a positive operator, preserving positivity.
pub fn partial_trace(
    omega: &PositiveOperator,
    dx: usize,
    dy: usize,
    keep: Subsystem,
) -> Result<PositiveOperator> {
    linalg::partial_trace(omega.matrix(), dx, dy, keep).map(PositiveOperator::from_trusted)
}

/// Orthogonal projector.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: Mat,
    rank: usize,
}

impl Projector {
    pub fn new(m: Mat, tol: &Tolerances) -> Result<Self> {
        ensure_finite(&m)?;
        ensure_square(&m)?;
        if hermiticity_defect(&m) > tol.herm {
            return Err(Error::invalid("projector is not Hermitian"));
        }
        let idem = max_abs(&(&m * &m - &m));
        if idem > tol.herm.max(1e-9) {
            return Err(Error::invalid(format!(
                "projector is not idempotent (defect {idem:.3e})"
            )));
        }
        let tr = real_trace(&m);
        let rank = tr.round() as usize;
        if (tr - rank as f64).abs() > 1e-8 {
            return Err(Error::invalid(format!("projector trace {tr} is not an integer")));
        }
        Ok(Projector {
            matrix: hermitian_part(&m),
            rank,
        })
    }

    /// Projector onto the span of the first `rank` columns of the unitary `basis`.
    pub fn from_basis_prefix(basis: &Mat, rank: usize) -> Self {
        let d = basis.nrows();
        let cols = basis.columns(0, rank);
        Projector {
            matrix: if rank == 0 {
                linalg::zeros(d, d)
            } else {
                &cols * cols.adjoint()
            },
            rank,
        }
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Strictly increasing family of projectors inside an ambient truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationLadder {
    projectors: Vec<Projector>,
    dim: usize,
}

impl TruncationLadder {
    pub fn new(projectors: Vec<Projector>, dim: usize) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::invalid("ladder must contain at least one projector"));
        }
        for p in &projectors {
            Error::check_dim(dim, p.dim())?;
        }
        for w in projectors.windows(2) {
            if w[1].rank <= w[0].rank {
                return Err(Error::invalid("ladder ranks must be strictly increasing"));
            }
            let nest = max_abs(&(w[0].matrix() * w[1].matrix() - w[0].matrix()));
            if nest > 1e-9 {
                return Err(Error::invalid(format!(
                    "ladder projectors are not nested (defect {nest:.3e})"
                )));
            }
        }
        Ok(TruncationLadder { projectors, dim })
    }

    /// Prefix projectors of the columns of a unitary basis, at the given ranks.
    pub fn from_basis(basis: &Mat, ranks: &[usize]) -> Result<Self> {
        let d = ensure_square(basis)?;
        if ranks.iter().any(|&r| r > d) {
            return Err(Error::invalid("ladder rank exceeds ambient dimension"));
        }
        let projectors = ranks
            .iter()
            .map(|&r| Projector::from_basis_prefix(basis, r))
            .collect();
        TruncationLadder::new(projectors, d)
    }

    /// Canonical-basis prefixes at the given ranks.
    pub fn coordinate(d: usize, ranks: &[usize]) -> Result<Self> {
        TruncationLadder::from_basis(&linalg::identity(d), ranks)
    }

    /// Canonical-basis prefixes of every rank `1..=d`.
    pub fn full(d: usize) -> Self {
        let ranks: Vec<usize> = (1..=d).collect();
        TruncationLadder::coordinate(d, &ranks).expect("full ladder is valid")
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.projectors.iter().map(|p| p.rank).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    /// Whether the top rung is the identity of the ambient space.
    pub fn reaches_identity(&self) -> bool {
        self.projectors.last().is_some_and(|p| p.rank == self.dim)
    }
}

/// Purification `sum_i sqrt(lambda_i) |phi_i> (x) |e_i>` of a state on `A`.
#[derive(Debug, Clone)]
pub struct Purification {
    pub vector: CVec,
    pub reduced_a: State,
    pub reduced_r: State,
    /// Eigenvalues of the purified state, non-increasing.
    pub spectrum: Vec<f64>,
    /// Eigenvectors `phi_i` of the purified state as columns.
    pub eigenvectors: Mat,
    pub dim_a: usize,
    pub dim_r: usize,
}

impl Purification {
    /// The unnormalized "canonical" purification direction of the reference:
    /// diagonal of `reduced_r` in the canonical basis.
    pub fn reference_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim_r];
        w[..self.spectrum.len()].copy_from_slice(&self.spectrum);
        w
    }
}

/// Purifies `sigma` into `A (x) R` with `dim R = d_r`, pairing eigenvectors of
/// `sigma` (non-increasing eigenvalue order) with the canonical basis of `R`.
pub fn purify(sigma: &State, d_r: usize, tol: &Tolerances) -> Result<Purification> {
    let d_a = sigma.dim();
    let eig = sigma.eigen();
    let rank = eig.rank(tol.supp);
    if d_r < rank {
        return Err(Error::Infeasible(format!(
            "reference dimension {d_r} is smaller than rank {rank}"
        )));
    }
    let kept = d_a.min(d_r);
    let spectrum: Vec<f64> = eig.values[..kept].iter().map(|v| v.max(0.0)).collect();
    let mut vector = CVec::zeros(d_a * d_r);
    for (i, lam) in spectrum.iter().enumerate() {
        let term = kron_vec(&eig.vector(i), &basis_vector(d_r, i)).scale(lam.sqrt());
        vector += term;
    }
    let norm = vector.norm();
    vector.unscale_mut(norm);
    let rho = linalg::projector_onto(&vector);
    let reduced_a = State::from_trusted(ptrace(&rho, d_a, d_r, Subsystem::First));
    let reduced_r = State::from_trusted(ptrace(&rho, d_a, d_r, Subsystem::Second));
    let spectrum = spectrum.iter().map(|l| l / (norm * norm)).collect();
    Ok(Purification {
        vector,
        reduced_a,
        reduced_r,
        spectrum,
        eigenvectors: eig.vectors,
        dim_a: d_a,
        dim_r: d_r,
    })
}

/// Spectrum summary used in reports.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub min: f64,
    pub max: f64,
    pub rank: usize,
}

impl SpectrumSummary {
    pub fn of(m: &Mat, eps: f64) -> Self {
        let eig = HermitianEigen::new(m);
        SpectrumSummary {
            min: eig.min(),
            max: eig.max(),
            rank: eig.rank(eps),
        }
    }
}
