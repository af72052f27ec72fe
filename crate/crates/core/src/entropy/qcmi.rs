//! Conditional mutual information `I(A:C|B)` as a supremum over projector
//! compressions, and verification of recovery-fidelity bounds.

use serde::Serialize;

use super::{entropy_raw, mutual_information_raw};
use crate::channel::QuantumOperation;
use crate::error::{Error, Result};
use crate::linalg::{self, identity, kron, ptrace, Mat, Subsystem};
use crate::operator::{fidelity_raw, State, TruncationLadder};
use crate::tolerance::Tolerances;

/// Negative values down to `-QCMI_SLACK` are rounding and are reported as zero.
const QCMI_SLACK: f64 = 1e-8;

/// Slack of the fidelity inequality in [`fr_verify`].
const FR_SLACK: f64 = 1e-8;

/// Dimensions of `A (x) B (x) C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Tripartite {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Tripartite {
    pub fn new(a: usize, b: usize, c: usize) -> Self {
        Tripartite { a, b, c }
    }

    pub fn total(&self) -> usize {
        self.a * self.b * self.c
    }

    fn check(&self, omega: &State) -> Result<()> {
        if self.a == 0 || self.b == 0 || self.c == 0 {
            return Err(Error::invalid("tripartite dimensions must be positive"));
        }
        Error::check_dim(self.total(), omega.dim())
    }

    fn trace_c(&self, m: &Mat) -> Mat {
        ptrace(m, self.a * self.b, self.c, Subsystem::First)
    }

    fn trace_a(&self, m: &Mat) -> Mat {
        ptrace(m, self.a, self.b * self.c, Subsystem::Second)
    }
}

/// Both supremum expressions of `I(A:C|B)` over the supplied ladders.
#[derive(Debug, Clone, Serialize)]
pub struct QcmiReport {
    /// Supremum over `P_A` of `I(A:BC) - I(A:B)` on `Q w Q`, `Q = P_A (x) I`.
    pub value_e_plus: f64,
    /// Supremum over `P_C` of `I(AB:C) - I(B:C)` on `Q w Q`, `Q = I (x) P_C`.
    pub value_e_plus_plus: f64,
    pub agreement: f64,
    /// `S(AB) + S(BC) - S(ABC) - S(B)`.
    pub direct: f64,
    pub direct_residual: f64,
    /// `(rank, value)` per rung, before clipping.
    pub profile_e_plus: Vec<(usize, f64)>,
    pub profile_e_plus_plus: Vec<(usize, f64)>,
    /// Both ladders end at the identity.
    pub full_ladders: bool,
    pub label: &'static str,
    pub unit: &'static str,
}

fn clip(v: f64) -> f64 {
    if (-QCMI_SLACK..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// Ladder of eigenbasis prefixes of a marginal, largest eigenvalues first.
fn marginal_ladder(marginal: &Mat, ranks: Option<&[usize]>) -> Result<TruncationLadder> {
    let eig = linalg::HermitianEigen::new(marginal);
    let all: Vec<usize> = (1..=eig.dim()).collect();
    TruncationLadder::from_basis(&eig.vectors, ranks.unwrap_or(&all))
}

/// Eigenbasis prefixes of `w_A` and `w_C` at the given ranks, all ranks when
/// none are given. These are the default ladders of [`qcmi`].
pub fn eigenbasis_ladders(
    omega: &State,
    dims: Tripartite,
    ranks_a: Option<&[usize]>,
    ranks_c: Option<&[usize]>,
) -> Result<(TruncationLadder, TruncationLadder)> {
    dims.check(omega)?;
    let w = omega.matrix();
    let (a, b, c) = (dims.a, dims.b, dims.c);
    Ok((
        marginal_ladder(&ptrace(w, a, b * c, Subsystem::First), ranks_a)?,
        marginal_ladder(&ptrace(w, a * b, c, Subsystem::Second), ranks_c)?,
    ))
}

fn sup_profile(profile: &[(usize, f64)]) -> f64 {
    profile.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
}

pub fn qcmi_direct(omega: &State, dims: Tripartite, tol: &Tolerances) -> Result<f64> {
    dims.check(omega)?;
    let w = omega.matrix();
    let ab = dims.trace_c(w);
    let bc = dims.trace_a(w);
    let b = ptrace(&ab, dims.a, dims.b, Subsystem::Second);
    let s = |m: &Mat| entropy_raw(m, tol.supp);
    Ok(s(&ab) + s(&bc) - s(w) - s(&b))
}

/// Ladder-restricted conditional mutual information. Missing ladders default
/// to eigenbasis prefixes of `w_A` and `w_C`.
pub fn qcmi(
    omega: &State,
    dims: Tripartite,
    ladder_a: Option<&TruncationLadder>,
    ladder_c: Option<&TruncationLadder>,
    tol: &Tolerances,
) -> Result<QcmiReport> {
    dims.check(omega)?;
    let w = omega.matrix();
    let (a, b, c) = (dims.a, dims.b, dims.c);
    let (own_a, own_c) = eigenbasis_ladders(omega, dims, None, None)?;
    let ladder_a = match ladder_a {
        Some(l) => {
            Error::check_dim(a, l.dim())?;
            l
        }
        None => &own_a,
    };
    let ladder_c = match ladder_c {
        Some(l) => {
            Error::check_dim(c, l.dim())?;
            l
        }
        None => &own_c,
    };

    let profile_e_plus: Vec<(usize, f64)> = ladder_a
        .projectors()
        .iter()
        .map(|p| {
            let q = kron(p.matrix(), &identity(b * c));
            let wq = &q * w * &q;
            let abc = mutual_information_raw(&wq, a, b * c, tol);
            let ab = mutual_information_raw(&dims.trace_c(&wq), a, b, tol);
            (p.rank(), abc - ab)
        })
        .collect();
    let profile_e_plus_plus: Vec<(usize, f64)> = ladder_c
        .projectors()
        .iter()
        .map(|p| {
            let q = kron(&identity(a * b), p.matrix());
            let wq = &q * w * &q;
            let abc = mutual_information_raw(&wq, a * b, c, tol);
            let bc = mutual_information_raw(&dims.trace_a(&wq), b, c, tol);
            (p.rank(), abc - bc)
        })
        .collect();

    let value_e_plus = clip(sup_profile(&profile_e_plus));
    let value_e_plus_plus = clip(sup_profile(&profile_e_plus_plus));
    let direct = qcmi_direct(omega, dims, tol)?;
    Ok(QcmiReport {
        value_e_plus,
        value_e_plus_plus,
        agreement: (value_e_plus - value_e_plus_plus).abs(),
        direct,
        direct_residual: (direct - value_e_plus).abs(),
        profile_e_plus,
        profile_e_plus_plus,
        full_ladders: ladder_a.reaches_identity() && ladder_c.reaches_identity(),
        label: "ladder-restricted",
        unit: "nats",
    })
}

/// Evaluation of a candidate recovery channel `B -> BC` against the
/// fidelity bound `2^{-I(A:C|B)/2} <= F(w, (id_A (x) R)(w_AB))`.
#[derive(Debug, Clone, Serialize)]
pub struct FrReport {
    pub qcmi_nats: f64,
    pub qcmi_bits: f64,
    /// `2^{-qcmi_bits / 2}`.
    pub lhs: f64,
    /// Fidelity between `w` and the recovered state.
    pub rhs: f64,
    pub satisfied: bool,
    /// `|| [R(w_B)]_B - w_B ||_1`.
    pub marginal_residual_b: f64,
    /// `|| [R(w_B)]_C - w_C ||_1`.
    pub marginal_residual_c: f64,
}

pub fn fr_verify(
    omega: &State,
    dims: Tripartite,
    recovery: &QuantumOperation,
    tol: &Tolerances,
) -> Result<FrReport> {
    dims.check(omega)?;
    let (a, b, c) = (dims.a, dims.b, dims.c);
    Error::check_dim(b, recovery.dim_in())?;
    Error::check_dim(b * c, recovery.dim_out())?;
    let w = omega.matrix();
    let w_ab = dims.trace_c(w);
    let w_b = ptrace(&w_ab, a, b, Subsystem::Second);
    let w_c = ptrace(w, a * b, c, Subsystem::Second);

    let recovered = QuantumOperation::identity(a).tensor(recovery).act(&w_ab);
    let rhs = fidelity_raw(w, &recovered);
    let out_b = recovery.act(&w_b);
    let residual = |x: &Mat, y: &Mat| crate::convergence::metric::herm_trace_norm(&(x - y));
    let marginal_residual_b = residual(&ptrace(&out_b, b, c, Subsystem::First), &w_b);
    let marginal_residual_c = residual(&ptrace(&out_b, b, c, Subsystem::Second), &w_c);

    let qcmi_nats = qcmi_direct(omega, dims, tol)?.max(0.0);
    let qcmi_bits = qcmi_nats / std::f64::consts::LN_2;
    let lhs = 2f64.powf(-qcmi_bits / 2.0);
    Ok(FrReport {
        qcmi_nats,
        qcmi_bits,
        lhs,
        rhs,
        satisfied: lhs <= rhs + FR_SLACK,
        marginal_residual_b,
        marginal_residual_c,
    })
}
