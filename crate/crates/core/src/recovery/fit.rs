//! Least-squares fitting of channels in the Choi parameterization:
//! accelerated projected gradient with Dykstra alternation between the PSD
//! cone and the trace-preserving affine slice, restarted from random points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{kraus_from_choi, Kind, QuantumOperation};
use crate::convergence::metric::herm_trace_norm;
use crate::error::{Error, Result};
use crate::linalg::{self, frobenius, hermitian_part, identity, kron, ptrace, psd_projection, Mat, Subsystem};
use crate::operator::State;
use crate::random;

/// Settings shared by every fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub restarts: usize,
    /// Restart `r` uses seed `seed + r`.
    pub seed: u64,
    pub max_iterations: usize,
    /// Iterations over which the objective must keep decreasing.
    pub patience: usize,
    /// Relative decrease over `patience` iterations below which a run stops.
    pub eps_opt: f64,
    /// Objective (squared Frobenius) at which a run stops as exact.
    pub target: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 20,
            seed: 0,
            max_iterations: 20_000,
            patience: 200,
            eps_opt: 1e-10,
            target: 1e-26,
        }
    }
}

/// Summary of one restart.
#[derive(Debug, Clone, Serialize)]
pub struct RestartSummary {
    pub seed: u64,
    /// Frobenius residual of the finalized channel.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Best fitted channel over all restarts.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub map: QuantumOperation,
    /// Objective-specific residual (see the producing function).
    pub residual: f64,
    /// `sqrt(sum_s ||Psi(X_s) - Y_s||_F^2)` for the fitted channel.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_seed: u64,
    pub restarts: Vec<RestartSummary>,
}

impl FitResult {
    /// Some restart stopped by its convergence rule.
    pub fn any_converged(&self) -> bool {
        self.restarts.iter().any(|r| r.converged)
    }
}

/// Data `(X_s, Y_s)` of the problem `min_Psi sum_s ||Psi(X_s) - Y_s||_F^2`
/// over channels `Psi: C^{d_in} -> C^{d_out}`.
pub(crate) struct FitProblem {
    pub d_in: usize,
    pub d_out: usize,
    pub data: Vec<(Mat, Mat)>,
}

impl FitProblem {
    pub fn new(d_in: usize, d_out: usize, data: Vec<(Mat, Mat)>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("fit needs at least one data pair"));
        }
        for (x, y) in &data {
            if x.shape() != (d_in, d_in) || y.shape() != (d_out, d_out) {
                return Err(Error::invalid("fit data has inconsistent shapes"));
            }
        }
        Ok(FitProblem { d_in, d_out, data })
    }

    /// `Theta_J(X)_{ab} = sum_ij J_{(a,i),(b,j)} X_ij`.
    fn apply(&self, j: &Mat, x: &Mat) -> Mat {
        let (di, dout) = (self.d_in, self.d_out);
        Mat::from_fn(dout, dout, |a, b| {
            let mut s = linalg::ZERO;
            for i in 0..di {
                for jj in 0..di {
                    s += j[(a * di + i, b * di + jj)] * x[(i, jj)];
                }
            }
            s
        })
    }

    fn objective(&self, j: &Mat) -> f64 {
        self.data
            .iter()
            .map(|(x, y)| frobenius(&(self.apply(j, x) - y)).powi(2))
            .sum()
    }

    /// Half the gradient: `sum_s R_s (x) conj(X_s)`, Hermitian part.
    fn half_gradient(&self, j: &Mat) -> Mat {
        let n = self.d_in * self.d_out;
        let g = self.data.iter().fold(linalg::zeros(n, n), |acc, (x, y)| {
            acc + kron(&(self.apply(j, x) - y), &x.conjugate())
        });
        hermitian_part(&g)
    }

    /// `lambda_max(sum_s vec(X_s) vec(X_s)*)`; the gradient step is its inverse.
    fn curvature(&self) -> f64 {
        let m = self.d_in * self.d_in;
        let gram = self.data.iter().fold(linalg::zeros(m, m), |acc, (x, _)| {
            let v = linalg::vec_of(x);
            acc + &v * v.adjoint()
        });
        linalg::lambda_max(&gram).max(1e-300)
    }

    fn affine(&self, j: &Mat) -> Mat {
        let s = ptrace(j, self.d_out, self.d_in, Subsystem::Second) - identity(self.d_in);
        j - kron(&identity(self.d_out), &s).unscale(self.d_out as f64)
    }

    /// Dykstra alternation converging to the projection onto
    /// `{J >= 0} cap {Tr_out J = I}`.
    fn project(&self, z: &Mat) -> Mat {
        let mut x = self.affine(z);
        let n = x.nrows();
        let mut p = linalg::zeros(n, n);
        let mut q = linalg::zeros(n, n);
        for _ in 0..DYKSTRA_MAX {
            let y = psd_projection(&(&x + &p));
            p = &x + &p - &y;
            let next = self.affine(&(&y + &q));
            q = &y + &q - &next;
            let moved = frobenius(&(&next - &x));
            let gap = frobenius(&(&next - &y));
            x = next;
            if moved <= DYKSTRA_TOL && gap <= DYKSTRA_TOL {
                break;
            }
        }
        x
    }

    /// Exact channel from an approximately feasible Choi matrix: positive
    /// part, then `(I (x) S^{-1/2}) J (I (x) S^{-1/2})` with `S = Tr_out J`;
    /// input directions outside the support of `S` map to the maximally
    /// mixed output.
    fn finalize(&self, j: &Mat) -> QuantumOperation {
        let (di, dout) = (self.d_in, self.d_out);
        let jp = psd_projection(j);
        let s = ptrace(&jp, dout, di, Subsystem::Second);
        let fix = kron(&identity(dout), &linalg::pinv_sqrt(&s, 1e-13));
        let mut jn = &fix * jp * &fix;
        let missing = identity(di) - linalg::support_projector(&s, 1e-13);
        if linalg::real_trace(&missing) > 0.5 {
            jn += kron(&identity(dout).unscale(dout as f64), &missing);
        }
        let mut kraus = kraus_from_choi(&jn, dout, di, 1e-15);
        if kraus.is_empty() {
            kraus.push(linalg::zeros(dout, di));
        }
        let sum = kraus.iter().fold(linalg::zeros(di, di), |acc, k| acc + k.adjoint() * k);
        let fix = linalg::pinv_sqrt(&sum, 1e-13);
        let kraus = kraus.into_iter().map(|k| k * &fix).collect();
        QuantumOperation::from_kraus_unchecked(di, dout, kraus, Kind::Channel)
    }

    pub fn residual_of(&self, op: &QuantumOperation) -> f64 {
        self.data
            .iter()
            .map(|(x, y)| frobenius(&(op.act(x) - y)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn run(&self, start: Mat, opts: &FitOptions) -> (Mat, usize, bool) {
        let step = 1.0 / self.curvature();
        let mut j = self.project(&start);
        let mut f = self.objective(&j);
        let mut y = j.clone();
        let mut t = 1.0f64;
        let mut best = vec![f];
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iterations {
            iterations += 1;
            let next = self.project(&(&y - self.half_gradient(&y).scale(step)));
            let f_next = self.objective(&next);
            if f_next > f {
                // adaptive restart of the momentum
                t = 1.0;
                y = j.clone();
                best.push(f);
                if restart_stalled(&best, opts) {
                    converged = true;
                    break;
                }
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &j).scale((t - 1.0) / t_next);
            t = t_next;
            j = next;
            f = f_next;
            best.push(f);
            if f <= opts.target || restart_stalled(&best, opts) {
                converged = true;
                break;
            }
        }
        (j, iterations, converged)
    }
}

const DYKSTRA_MAX: usize = 400;
const DYKSTRA_TOL: f64 = 1e-13;

fn restart_stalled(best: &[f64], opts: &FitOptions) -> bool {
    let k = best.len();
    if k <= opts.patience {
        return false;
    }
    let old = best[k - 1 - opts.patience];
    let now = best[k - 1];
    old - now <= opts.eps_opt * old
}

/// Random channel Choi matrix used as a starting point.
fn random_start(d_in: usize, d_out: usize, seed: u64) -> Mat {
    let op = random::channel(d_in, d_out, d_in * d_out, &mut random::rng(seed));
    op.choi_matrix()
}

/// Multi-start fit; restarts run in parallel and the smallest residual wins
/// (ties broken by seed order).
pub(crate) fn fit_channel(problem: &FitProblem, opts: &FitOptions) -> Result<FitResult> {
    if opts.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let runs: Vec<(QuantumOperation, RestartSummary)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = opts.seed.wrapping_add(r as u64);
            let start = random_start(problem.d_in, problem.d_out, seed);
            let (j, iterations, converged) = problem.run(start, opts);
            let map = problem.finalize(&j);
            let residual = problem.residual_of(&map);
            (
                map,
                RestartSummary {
                    seed,
                    residual,
                    iterations,
                    converged,
                },
            )
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .fold(0, |b, (k, r)| if r.1.residual < runs[b].1.residual { k } else { b });
    let (map, summary) = runs[best].clone();
    Ok(FitResult {
        map,
        residual: summary.residual,
        objective: summary.residual,
        iterations: summary.iterations,
        converged: summary.converged,
        best_seed: summary.seed,
        restarts: runs.into_iter().map(|r| r.1).collect(),
    })
}

/// Fits a channel `Psi` with `Psi(Phi(rho)) ~ rho` for every `rho` in the
/// family. `residual` is `sum_rho || Psi(Phi(rho)) - rho ||_1`.
pub fn fit_reversing_channel(
    phi: &QuantumOperation,
    family: &[State],
    opts: &FitOptions,
) -> Result<FitResult> {
    if family.is_empty() {
        return Err(Error::invalid("state family is empty"));
    }
    let data = family
        .iter()
        .map(|rho| {
            Error::check_dim(phi.dim_in(), rho.dim())?;
            Ok((phi.act(rho.matrix()), rho.matrix().clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let problem = FitProblem::new(phi.dim_out(), phi.dim_in(), data)?;
    let mut fit = fit_channel(&problem, opts)?;
    fit.residual = reversal_residual(&fit.map, phi, family);
    Ok(fit)
}

/// `sum_rho || Psi(Phi(rho)) - rho ||_1`.
pub fn reversal_residual(psi: &QuantumOperation, phi: &QuantumOperation, family: &[State]) -> f64 {
    family
        .iter()
        .map(|rho| herm_trace_norm(&(psi.act(&phi.act(rho.matrix())) - rho.matrix())))
        .sum()
}
