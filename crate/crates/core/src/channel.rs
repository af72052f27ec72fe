//! Quantum operations in Kraus, Choi and Stinespring form, and the
//! Choi-Jamiolkowski correspondence relative to a purification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, ensure_finite, identity, kron, max_abs, ptrace, unvec, vec_of, HermitianEigen, Mat,
    Subsystem,
};
use crate::operator::{PositiveOperator, Purification, State};
use crate::tolerance::Tolerances;

/// Whether an operation is trace preserving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Trace non-increasing.
    Operation,
    /// Trace preserving.
    Channel,
}

/// Completely positive trace-non-increasing map held as a Kraus list
/// (`dim_out x dim_in` matrices).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumOperation {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<Mat>,
    kind: Kind,
}

impl QuantumOperation {
    /// Validates shapes and `sum V*V <= I` (`= I` for channels) at the default
    /// tolerances.
    pub fn new(dim_in: usize, dim_out: usize, kraus: Vec<Mat>, kind: Kind) -> Result<Self> {
        let tol = Tolerances::default();
        Self::with_tolerance(dim_in, dim_out, kraus, kind, tol.channel, tol.psd)
    }

    pub fn with_tolerance(
        dim_in: usize,
        dim_out: usize,
        kraus: Vec<Mat>,
        kind: Kind,
        channel_tol: f64,
        psd_tol: f64,
    ) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::invalid("operation dimensions must be positive"));
        }
        for (k, v) in kraus.iter().enumerate() {
            ensure_finite(v)?;
            if v.nrows() != dim_out || v.ncols() != dim_in {
                return Err(Error::invalid(format!(
                    "Kraus operator {k} has shape {}x{}, expected {dim_out}x{dim_in}",
                    v.nrows(),
                    v.ncols()
                )));
            }
        }
        let op = QuantumOperation {
            dim_in,
            dim_out,
            kraus,
            kind,
        };
        let s = op.kraus_sum();
        match kind {
            Kind::Channel => {
                let dev = max_abs(&(&s - identity(dim_in)));
                if dev > channel_tol {
                    return Err(Error::NotAnOperation(format!(
                        "sum V*V deviates from the identity by {dev:.3e}"
                    )));
                }
            }
            Kind::Operation => {
                let top = linalg::lambda_max(&s);
                if top > 1.0 + psd_tol {
                    return Err(Error::NotAnOperation(format!(
                        "sum V*V has eigenvalue {top} > 1"
                    )));
                }
            }
        }
        Ok(op)
    }

    pub(crate) fn from_kraus_unchecked(
        dim_in: usize,
        dim_out: usize,
        kraus: Vec<Mat>,
        kind: Kind,
    ) -> Self {
        QuantumOperation {
            dim_in,
            dim_out,
            kraus,
            kind,
        }
    }

    /// Classifies as a channel when `sum V*V = I` within `channel_tol`.
    pub fn from_kraus_auto(
        dim_in: usize,
        dim_out: usize,
        kraus: Vec<Mat>,
        channel_tol: f64,
        psd_tol: f64,
    ) -> Result<Self> {
        let probe = QuantumOperation::from_kraus_unchecked(dim_in, dim_out, kraus, Kind::Operation);
        let dev = max_abs(&(probe.kraus_sum() - identity(dim_in)));
        let kind = if dev <= channel_tol {
            Kind::Channel
        } else {
            Kind::Operation
        };
        Self::with_tolerance(dim_in, dim_out, probe.kraus, kind, channel_tol, psd_tol)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[Mat] {
        &self.kraus
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn is_channel(&self) -> bool {
        self.kind == Kind::Channel
    }

    pub fn kraus_count(&self) -> usize {
        self.kraus.len()
    }

    /// `sum_k V_k* V_k`.
    pub fn kraus_sum(&self) -> Mat {
        self.kraus
            .iter()
            .fold(linalg::zeros(self.dim_in, self.dim_in), |acc, v| {
                acc + v.adjoint() * v
            })
    }

    // ----- standard maps -----

    pub fn identity(d: usize) -> Self {
        Self::from_kraus_unchecked(d, d, vec![identity(d)], Kind::Channel)
    }

    /// `rho -> U rho U*` for a unitary (or isometry) `U`.
    pub fn isometric(u: Mat) -> Result<Self> {
        let (d_out, d_in) = u.shape();
        Self::new(d_in, d_out, vec![u], Kind::Channel)
    }

    /// Single-Kraus operation `rho -> A rho A*` for a contraction `A`.
    pub fn conjugation(a: Mat) -> Result<Self> {
        let (d_out, d_in) = a.shape();
        Self::from_kraus_auto(d_in, d_out, vec![a], 1e-10, 1e-10)
    }

    /// Qubit dephasing `rho -> (1-p) rho + p Z rho Z`.
    pub fn dephasing(p: f64) -> Result<Self> {
        check_probability(p)?;
        let z = linalg::diag(&[1.0, -1.0]);
        Self::new(
            2,
            2,
            vec![identity(2).scale((1.0 - p).sqrt()), z.scale(p.sqrt())],
            Kind::Channel,
        )
    }

    /// Complete dephasing (pinching) in the orthonormal basis given by the
    /// columns of `basis`.
    pub fn pinching(basis: &Mat) -> Self {
        let d = basis.nrows();
        let kraus = (0..d)
            .map(|k| {
                let v = basis.column(k).into_owned();
                linalg::projector_onto(&v)
            })
            .collect();
        Self::from_kraus_unchecked(d, d, kraus, Kind::Channel)
    }

    /// `rho -> (1-p) rho + p [Tr rho] I/d`.
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        check_probability(p)?;
        let mut kraus = Vec::new();
        if p < 1.0 {
            kraus.push(identity(d).scale((1.0 - p).sqrt()));
        }
        if p > 0.0 {
            let w = (p / d as f64).sqrt();
            for i in 0..d {
                for j in 0..d {
                    kraus.push(linalg::matrix_unit(d, i, j).scale(w));
                }
            }
        }
        Self::new(d, d, kraus, Kind::Channel)
    }

    /// Qubit amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_probability(gamma)?;
        let k0 = linalg::diag(&[1.0, (1.0 - gamma).sqrt()]);
        let mut k1 = linalg::zeros(2, 2);
        k1[(0, 1)] = c(gamma.sqrt(), 0.0);
        Self::new(2, 2, vec![k0, k1], Kind::Channel)
    }

    /// `rho -> [Tr rho] sigma`.
    pub fn constant_output(d_in: usize, sigma: &State) -> Self {
        let eig = sigma.eigen();
        let d_out = sigma.dim();
        let mut kraus = Vec::new();
        for k in 0..d_out {
            let lam = eig.values[k];
            if lam <= 0.0 {
                continue;
            }
            let v = eig.vector(k).scale(lam.sqrt());
            for j in 0..d_in {
                let e = linalg::basis_vector(d_in, j);
                kraus.push(linalg::outer(&v, &e));
            }
        }
        Self::from_kraus_unchecked(d_in, d_out, kraus, Kind::Channel)
    }

    /// Partial trace `X (x) Y -> kept factor`.
    pub fn partial_trace(dx: usize, dy: usize, keep: Subsystem) -> Self {
        let mut kraus = Vec::new();
        match keep {
            Subsystem::First => {
                for j in 0..dy {
                    let bra = linalg::basis_vector(dy, j).adjoint();
                    kraus.push(kron(&identity(dx), &Mat::from_iterator(1, dy, bra.iter().copied())));
                }
                Self::from_kraus_unchecked(dx * dy, dx, kraus, Kind::Channel)
            }
            Subsystem::Second => {
                for i in 0..dx {
                    let bra = linalg::basis_vector(dx, i).adjoint();
                    kraus.push(kron(&Mat::from_iterator(1, dx, bra.iter().copied()), &identity(dy)));
                }
                Self::from_kraus_unchecked(dx * dy, dy, kraus, Kind::Channel)
            }
        }
    }

    /// `rho -> rho (x) sigma`.
    pub fn append_state(d_in: usize, sigma: &State) -> Self {
        let eig = sigma.eigen();
        let ds = sigma.dim();
        let mut kraus = Vec::new();
        for k in 0..ds {
            let lam = eig.values[k];
            if lam <= 0.0 {
                continue;
            }
            let col = eig.vector(k).scale(lam.sqrt());
            let colm = Mat::from_iterator(ds, 1, col.iter().copied());
            kraus.push(kron(&identity(d_in), &colm));
        }
        Self::from_kraus_unchecked(d_in, d_in * ds, kraus, Kind::Channel)
    }

    // ----- action -----

    /// `sum_k V_k X V_k*` on an arbitrary (not necessarily positive) input.
    pub fn apply_mat(&self, x: &Mat) -> Result<Mat> {
        linalg::ensure_square(x)?;
        Error::check_dim(self.dim_in, x.nrows())?;
        Ok(self.act(x))
    }

    pub(crate) fn act(&self, x: &Mat) -> Mat {
        self.kraus
            .iter()
            .fold(linalg::zeros(self.dim_out, self.dim_out), |acc, v| {
                acc + v * x * v.adjoint()
            })
    }

    pub fn apply(&self, rho: &PositiveOperator) -> Result<PositiveOperator> {
        Error::check_dim(self.dim_in, rho.dim())?;
        Ok(PositiveOperator::from_trusted(self.act(rho.matrix())))
    }

    /// Output of a state; for channels the result is again a state.
    pub fn apply_state(&self, rho: &State) -> Result<PositiveOperator> {
        self.apply(rho.operator())
    }

    /// `sum_k V_k* B V_k`.
    pub fn dual_apply(&self, b: &Mat) -> Result<Mat> {
        linalg::ensure_square(b)?;
        Error::check_dim(self.dim_out, b.nrows())?;
        Ok(self.dual_act(b))
    }

    pub(crate) fn dual_act(&self, b: &Mat) -> Mat {
        self.kraus
            .iter()
            .fold(linalg::zeros(self.dim_in, self.dim_in), |acc, v| {
                acc + v.adjoint() * b * v
            })
    }

    // ----- structure -----

    /// Stinespring contraction `V: A -> B (x) E`, `V|phi> = sum_k V_k|phi> (x) |k>`.
    pub fn stinespring(&self) -> Mat {
        let d_e = self.kraus.len().max(1);
        let mut v = linalg::zeros(self.dim_out * d_e, self.dim_in);
        for (k, vk) in self.kraus.iter().enumerate() {
            for b in 0..self.dim_out {
                for a in 0..self.dim_in {
                    v[(b * d_e + k, a)] = vk[(b, a)];
                }
            }
        }
        v
    }

    /// Complementary operation `rho -> Tr_B V rho V*` into the environment
    /// spanned by the Kraus index: its output has entries
    /// `(k, l) -> Tr V_k rho V_l*`.
    pub fn complementary(&self) -> QuantumOperation {
        let d_e = self.kraus.len().max(1);
        let kraus = (0..self.dim_out)
            .map(|j| {
                Mat::from_fn(d_e, self.dim_in, |k, a| {
                    self.kraus.get(k).map_or(linalg::ZERO, |vk| vk[(j, a)])
                })
            })
            .collect();
        QuantumOperation::from_kraus_unchecked(self.dim_in, d_e, kraus, self.kind)
    }

    /// Unnormalized Choi matrix `sum_ij Phi(|i><j|) (x) |i><j|` on `OUT (x) IN`.
    pub fn choi_matrix(&self) -> Mat {
        let n = self.dim_out * self.dim_in;
        self.kraus.iter().fold(linalg::zeros(n, n), |acc, v| {
            let w = vec_of(v);
            acc + &w * w.adjoint()
        })
    }

    /// Choi rank: the number of Kraus operators in a minimal representation.
    pub fn choi_rank(&self, eps: f64) -> usize {
        let j = self.choi_matrix().unscale(self.dim_in as f64);
        HermitianEigen::new(&j).rank(eps)
    }

    /// Minimal Kraus list from the eigendecomposition of the Choi matrix,
    /// keeping eigenvalues above `eps` (relative to the normalized Choi).
    pub fn canonical(&self, eps: f64) -> QuantumOperation {
        let kraus = kraus_from_choi(&self.choi_matrix(), self.dim_out, self.dim_in, eps * self.dim_in as f64);
        QuantumOperation::from_kraus_unchecked(self.dim_in, self.dim_out, kraus, self.kind)
    }

    /// `Phi (x) Psi`.
    pub fn tensor(&self, other: &QuantumOperation) -> QuantumOperation {
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(kron(a, b));
            }
        }
        let kind = if self.is_channel() && other.is_channel() {
            Kind::Channel
        } else {
            Kind::Operation
        };
        QuantumOperation::from_kraus_unchecked(
            self.dim_in * other.dim_in,
            self.dim_out * other.dim_out,
            kraus,
            kind,
        )
    }

    /// `next o self`: apply `self` first.
    pub fn then(&self, next: &QuantumOperation) -> Result<QuantumOperation> {
        Error::check_dim(next.dim_in, self.dim_out)?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * next.kraus.len());
        for w in &next.kraus {
            for v in &self.kraus {
                kraus.push(w * v);
            }
        }
        let kind = if self.is_channel() && next.is_channel() {
            Kind::Channel
        } else {
            Kind::Operation
        };
        Ok(QuantumOperation::from_kraus_unchecked(
            self.dim_in,
            next.dim_out,
            kraus,
            kind,
        ))
    }

    /// Restriction to the subspace spanned by the columns of the isometry
    /// `embed` (`dim_in x k`): `X -> Phi(embed X embed*)`.
    pub fn restrict_input(&self, embed: &Mat) -> Result<QuantumOperation> {
        Error::check_dim(self.dim_in, embed.nrows())?;
        let kraus = self.kraus.iter().map(|v| v * embed).collect();
        Ok(QuantumOperation::from_kraus_unchecked(
            embed.ncols(),
            self.dim_out,
            kraus,
            self.kind,
        ))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("parameter {p} must lie in [0, 1]")))
    }
}

/// `Psi o Phi`.
pub fn compose(phi: &QuantumOperation, psi: &QuantumOperation) -> Result<QuantumOperation> {
    phi.then(psi)
}

pub fn tensor(phi: &QuantumOperation, psi: &QuantumOperation) -> QuantumOperation {
    phi.tensor(psi)
}

/// Kraus operators `sqrt(mu_k) unvec(c_k)` from the eigenpairs of a Choi-type
/// matrix on `OUT (x) IN`, dropping eigenvalues at or below `eps`.
pub(crate) fn kraus_from_choi(j: &Mat, d_out: usize, d_in: usize, eps: f64) -> Vec<Mat> {
    let eig = HermitianEigen::new(j);
    (0..eig.dim())
        .filter(|&k| eig.values[k] > eps)
        .map(|k| unvec(&eig.vector(k), d_out, d_in).scale(eig.values[k].sqrt()))
        .collect()
}

/// `(Phi (x) id_R)(|omega><omega|)` together with the purification used.
#[derive(Debug, Clone)]
pub struct ChoiOperator {
    pub operator: PositiveOperator,
    pub purification: Purification,
    pub rank: usize,
    pub dim_out: usize,
}

impl ChoiOperator {
    /// Reduced operator on the reference system.
    pub fn reference_marginal(&self) -> Mat {
        ptrace(
            self.operator.matrix(),
            self.dim_out,
            self.purification.dim_r,
            Subsystem::Second,
        )
    }

    /// Reduced operator on the output system.
    pub fn output_marginal(&self) -> Mat {
        ptrace(
            self.operator.matrix(),
            self.dim_out,
            self.purification.dim_r,
            Subsystem::First,
        )
    }
}

/// Result of the CJ membership test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Largest eigenvalue of `M_ij = <psi_i|rho_R|psi_j> / sqrt(lambda_i lambda_j)`.
    pub witness: f64,
    /// `M` equals the identity (the marginal of a channel).
    pub unital: bool,
}

/// Tests whether `rho_r` is the reference marginal of some operation's Choi
/// operator relative to the reference state `omega_r`.
pub fn cj_membership(rho_r: &Mat, omega_r: &State, tol: &Tolerances) -> Result<Membership> {
    Error::check_dim(omega_r.dim(), rho_r.nrows())?;
    let eig = omega_r.eigen();
    if eig.min() <= tol.supp {
        return Err(Error::precondition(
            "reference marginal of the purification is not faithful",
        ));
    }
    let m = membership_matrix(rho_r, &eig.values, &eig.vectors);
    let witness = linalg::lambda_max(&m);
    let d = m.nrows();
    Ok(Membership {
        member: witness <= 1.0 + tol.membership,
        witness,
        unital: max_abs(&(&m - identity(d))) <= 1e-8,
    })
}

fn membership_matrix(rho_r: &Mat, lambdas: &[f64], vectors: &Mat) -> Mat {
    let in_basis = vectors.adjoint() * rho_r * vectors;
    let d = lambdas.len();
    Mat::from_fn(d, d, |i, j| in_basis[(i, j)] / (lambdas[i] * lambdas[j]).sqrt())
}

/// Maps an operation to its Choi operator relative to the purification.
pub fn cj_forward(
    phi: &QuantumOperation,
    omega: &Purification,
    tol: &Tolerances,
) -> Result<ChoiOperator> {
    Error::check_dim(phi.dim_in, omega.dim_a)?;
    let faithful = omega.spectrum.len() == omega.dim_a
        && omega.spectrum.iter().all(|&l| l > tol.supp);
    if !faithful {
        return Err(Error::precondition(
            "purified input state is not faithful at the truncation",
        ));
    }
    let w = unvec(&omega.vector, omega.dim_a, omega.dim_r);
    let n = phi.dim_out * omega.dim_r;
    let m = phi.kraus.iter().fold(linalg::zeros(n, n), |acc, v| {
        let x = vec_of(&(v * &w));
        acc + &x * x.adjoint()
    });
    let rank = HermitianEigen::new(&m).rank(tol.rank);
    Ok(ChoiOperator {
        operator: PositiveOperator::from_trusted(m),
        purification: omega.clone(),
        rank,
        dim_out: phi.dim_out,
    })
}

/// Recovers a minimal Kraus representation from a Choi operator.
pub fn cj_inverse(choi: &ChoiOperator, tol: &Tolerances) -> Result<QuantumOperation> {
    let p = &choi.purification;
    let d_out = choi.dim_out;
    let rho_r = choi.reference_marginal();
    let membership = cj_membership(&rho_r, &p.reduced_r, tol)?;
    if !membership.member {
        return Err(Error::NotAnOperation(format!(
            "reference marginal exceeds the purification bound (witness {})",
            membership.witness
        )));
    }
    let kept = p.spectrum.len();
    // V = W D^{-1/2} F*, with F the eigenvectors of the purified state.
    let inv_sqrt: Vec<f64> = p.spectrum.iter().map(|l| 1.0 / l.sqrt()).collect();
    let f = p.eigenvectors.columns(0, kept).into_owned();
    let right = linalg::diag(&inv_sqrt) * f.adjoint();
    let kraus: Vec<Mat> = kraus_from_choi(choi.operator.matrix(), d_out, p.dim_r, tol.rank)
        .into_iter()
        .map(|w| w.columns(0, kept).into_owned() * &right)
        .collect();
    let kind = if membership.unital {
        Kind::Channel
    } else {
        Kind::Operation
    };
    QuantumOperation::with_tolerance(p.dim_a, d_out, kraus, kind, 1e-8, 1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, trace_norm, CVec};
    use crate::operator::{purify, State};
    use crate::random;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn identity_and_constant_output() {
        let rho = random::state(3, &mut random::rng(3));
        let out = QuantumOperation::identity(3).apply_state(&rho).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-15);

        let sigma0 = State::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let ch = QuantumOperation::constant_output(3, &sigma0);
        let out = ch.apply_state(&rho).unwrap();
        assert!(trace_norm(&(out.matrix() - sigma0.matrix())).unwrap() < 1e-12);
    }

    #[test]
    fn dephasing_plus_state() {
        let plus = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let s = State::pure(&plus).unwrap();
        let out = QuantumOperation::dephasing(0.5).unwrap().apply_state(&s).unwrap();
        assert!(max_abs(&(out.matrix() - diag(&[0.5, 0.5]))) < 1e-14);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let rho = State::maximally_mixed(3);
        let err = QuantumOperation::identity(2).apply_state(&rho).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_trace_increasing_kraus() {
        let k = identity(2).scale(1.1);
        assert!(matches!(
            QuantumOperation::new(2, 2, vec![k], Kind::Operation),
            Err(Error::NotAnOperation(_))
        ));
    }

    #[test]
    fn dual_of_unitary_channel() {
        let mut r = random::rng(5);
        let u = random::unitary(3, &mut r);
        let ch = QuantumOperation::isometric(u.clone()).unwrap();
        let b = random::hermitian(3, &mut r);
        let got = ch.dual_apply(&b).unwrap();
        assert!(max_abs(&(got - u.adjoint() * &b * &u)) < 1e-12);
        let one = ch.dual_apply(&identity(3)).unwrap();
        assert!(max_abs(&(one - identity(3))) < 1e-12);
    }

    #[test]
    fn complement_of_unitary_is_trace() {
        let u = random::unitary(2, &mut random::rng(2));
        let comp = QuantumOperation::isometric(u).unwrap().complementary();
        assert_eq!(comp.dim_out(), 1);
        let rho = random::state(2, &mut random::rng(9));
        let out = comp.apply_state(&rho).unwrap();
        assert!((out.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complement_of_complete_dephasing() {
        // Kraus |0><0|, |1><1|: the complement outputs diag(rho_00, rho_11).
        let ch = QuantumOperation::pinching(&identity(2));
        let comp = ch.complementary();
        assert_eq!(comp.dim_out(), 2);
        let rho = random::state(2, &mut random::rng(4));
        let out = comp.apply_state(&rho).unwrap();
        let want = diag(&[rho.matrix()[(0, 0)].re, rho.matrix()[(1, 1)].re]);
        assert!(max_abs(&(out.matrix() - want)) < 1e-14);
    }

    #[test]
    fn stinespring_consistency() {
        let mut r = random::rng(8);
        let ch = random::channel(3, 2, 4, &mut r);
        let v = ch.stinespring();
        let rho = random::state(3, &mut r);
        let big = &v * rho.matrix() * v.adjoint();
        let reduced = linalg::partial_trace(&big, 2, 4, Subsystem::First).unwrap();
        let direct = ch.apply_state(&rho).unwrap();
        assert!(trace_norm(&(reduced - direct.matrix())).unwrap() < 1e-10);
    }

    #[test]
    fn amplitude_damping_complement_is_damping() {
        let g = 0.3;
        let comp = QuantumOperation::amplitude_damping(g).unwrap().complementary();
        let other = QuantumOperation::amplitude_damping(1.0 - g).unwrap();
        let rho = random::state(2, &mut random::rng(1));
        let a = comp.apply_state(&rho).unwrap();
        let b = other.apply_state(&rho).unwrap();
        assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-14);
    }

    #[test]
    fn cj_identity_is_the_purification() {
        let p = purify(&State::maximally_mixed(2), 2, &tol()).unwrap();
        let choi = cj_forward(&QuantumOperation::identity(2), &p, &tol()).unwrap();
        assert_eq!(choi.rank, 1);
        let pure = linalg::projector_onto(&p.vector);
        assert!(max_abs(&(choi.operator.matrix() - pure)) < 1e-14);
        let back = cj_inverse(&choi, &tol()).unwrap();
        assert_eq!(back.kraus_count(), 1);
        assert!(back.is_channel());
    }

    #[test]
    fn cj_fully_depolarizing_qubit() {
        let p = purify(&State::maximally_mixed(2), 2, &tol()).unwrap();
        let ch = QuantumOperation::depolarizing(2, 1.0).unwrap();
        let choi = cj_forward(&ch, &p, &tol()).unwrap();
        assert_eq!(choi.rank, 4);
        assert!(max_abs(&(choi.operator.matrix() - identity(4).unscale(4.0))) < 1e-14);
    }

    #[test]
    fn cj_rejects_non_faithful_input() {
        let p = purify(&State::basis(2, 0), 2, &tol()).unwrap();
        let err = cj_forward(&QuantumOperation::identity(2), &p, &tol()).unwrap_err();
        assert!(matches!(err, Error::PreconditionViolated(_)));
    }

    #[test]
    fn cj_marginal_identity() {
        let mut r = random::rng(12);
        let ch = random::channel(3, 2, 3, &mut r);
        let sigma = random::faithful_state(3, 0.3, &mut r);
        let p = purify(&sigma, 3, &tol()).unwrap();
        let choi = cj_forward(&ch, &p, &tol()).unwrap();
        let out = ch.apply_state(&p.reduced_a).unwrap();
        assert!(trace_norm(&(choi.output_marginal() - out.matrix())).unwrap() < 1e-10);
        assert!(trace_norm(&(choi.reference_marginal() - p.reduced_r.matrix())).unwrap() < 1e-10);
    }

    #[test]
    fn membership_examples() {
        let omega = State::diagonal(&[0.6, 0.3, 0.1]).unwrap();
        let m = cj_membership(omega.matrix(), &omega, &tol()).unwrap();
        assert!(m.member && (m.witness - 1.0).abs() < 1e-12);

        let m = cj_membership(&omega.matrix().scale(2.0), &omega, &tol()).unwrap();
        assert!(!m.member && (m.witness - 2.0).abs() < 1e-12);

        // lambda_1 |psi_1><psi_1|: M = |e_1><e_1|, top eigenvalue 1
        let top = diag(&[0.6, 0.0, 0.0]);
        let m = cj_membership(&top, &omega, &tol()).unwrap();
        assert!(m.member && (m.witness - 1.0).abs() < 1e-12 && !m.unital);
    }

    #[test]
    fn cj_inverse_of_non_member_fails() {
        let p = purify(&State::maximally_mixed(2), 2, &tol()).unwrap();
        let mut choi = cj_forward(&QuantumOperation::identity(2), &p, &tol()).unwrap();
        choi.operator = PositiveOperator::from_trusted(choi.operator.matrix().scale(2.0));
        assert!(matches!(cj_inverse(&choi, &tol()), Err(Error::NotAnOperation(_))));
    }

    #[test]
    fn rank_one_choi_gives_single_kraus() {
        let mut r = random::rng(21);
        let v = random::isometry(3, 2, &mut r);
        let op = QuantumOperation::isometric(v).unwrap();
        let p = purify(&random::faithful_state(2, 0.4, &mut r), 2, &tol()).unwrap();
        let choi = cj_forward(&op, &p, &tol()).unwrap();
        assert_eq!(choi.rank, 1);
        assert_eq!(cj_inverse(&choi, &tol()).unwrap().kraus_count(), 1);
    }

    #[test]
    fn tensor_and_compose_identities() {
        let id2 = QuantumOperation::identity(2);
        let t = id2.tensor(&id2);
        let rho = random::state(4, &mut random::rng(6));
        let out = t.apply_state(&rho).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-14);

        let ch = random::channel(2, 3, 2, &mut random::rng(10));
        let composed = compose(&ch, &QuantumOperation::identity(3)).unwrap();
        let r2 = random::state(2, &mut random::rng(11));
        let a = composed.apply_state(&r2).unwrap();
        let b = ch.apply_state(&r2).unwrap();
        assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-14);
        assert!(compose(&ch, &ch).is_err());
    }

    #[test]
    fn tensor_on_product_inputs() {
        let mut r = random::rng(14);
        let phi = random::channel(2, 3, 2, &mut r);
        let psi = random::operation(3, 2, 3, &mut r);
        let rho = random::state(2, &mut r);
        let sigma = random::state(3, &mut r);
        let joint = phi.tensor(&psi).apply_state(&rho.tensor(&sigma)).unwrap();
        let separate = kron(
            phi.apply_state(&rho).unwrap().matrix(),
            psi.apply_state(&sigma).unwrap().matrix(),
        );
        assert!(trace_norm(&(joint.matrix() - separate)).unwrap() < 1e-10);
        assert_eq!(phi.tensor(&psi).kind(), Kind::Operation);
    }

    #[test]
    fn choi_ranks() {
        let u = random::unitary(3, &mut random::rng(3));
        assert_eq!(QuantumOperation::isometric(u).unwrap().choi_rank(1e-10), 1);
        assert_eq!(QuantumOperation::depolarizing(2, 1.0).unwrap().choi_rank(1e-10), 4);
    }
}
