//! One function per subcommand, each returning a serializable report.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use strongconv::convergence::{default_ladder, diagnose, strong_distance_default, Diagnosis, Window};
use strongconv::entropy::{
    convergence_preservation_harness, eigenbasis_ladders, fr_verify, qcmi, FrReport, MapSequence,
    PreservationReport, QcmiReport, Tripartite,
};
use strongconv::family::{known_limit, make_family, FamilySpec, Rate};
use strongconv::linalg::{identity, max_abs};
use strongconv::operator::default_faithful_state;
use strongconv::recovery::{
    degradability_certificate, petz_map, reversibility_test, DegradabilityCertificate, FitOptions,
    ReversibilityReport,
};
use strongconv::spec::{load_channel, load_state_spec, ChannelSpec, MatrixSpec};
use strongconv::{
    cj_forward, cj_inverse, cj_membership, purify, Kind, PositiveOperator, QuantumOperation, State,
    Tolerances, TruncationLadder,
};

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value = serde_json::from_str(&text)
        .map_err(|e| strongconv::Error::InvalidInput(format!("malformed {what} spec: {e}")))?;
    Ok(value)
}

fn load_state(path: &Path, tol: &Tolerances) -> Result<(State, Option<Vec<usize>>)> {
    let spec = load_state_spec(path)?;
    let dims = spec.dims().map(<[usize]>::to_vec);
    Ok((spec.to_state(tol)?, dims))
}

#[derive(Debug, Serialize)]
pub struct CjReport {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kind: Kind,
    /// `(Phi (x) id_R)(|omega><omega|)` on `OUT (x) R`.
    pub choi: MatrixSpec,
    pub choi_rank: usize,
    pub membership_witness: f64,
    pub member: bool,
    pub unital_marginal: bool,
    /// Strong distance between the input and `cj_inverse(cj_forward(.))`.
    pub roundtrip_residual: f64,
    pub minimal_kraus_count: usize,
}

pub fn cj(channel: &Path, state: Option<&Path>, tol: &Tolerances) -> Result<CjReport> {
    let phi = load_channel(channel)?;
    let sigma = match state {
        Some(p) => load_state(p, tol)?.0,
        None => default_faithful_state(phi.dim_in()),
    };
    let p = purify(&sigma, phi.dim_in(), tol)?;
    let choi = cj_forward(&phi, &p, tol)?;
    let membership = cj_membership(&choi.reference_marginal(), &p.reduced_r, tol)?;
    let back = cj_inverse(&choi, tol)?;
    Ok(CjReport {
        dim_in: phi.dim_in(),
        dim_out: phi.dim_out(),
        kind: phi.kind(),
        choi: MatrixSpec::from_matrix(choi.operator.matrix()),
        choi_rank: choi.rank,
        membership_witness: membership.witness,
        member: membership.member,
        unital_marginal: membership.unital,
        roundtrip_residual: strong_distance_default(&back, &phi)?,
        minimal_kraus_count: back.kraus_count(),
    })
}

#[derive(Debug, Serialize)]
pub struct DiagnoseReport {
    pub family: FamilySpec,
    pub window: Window,
    pub ladder_ranks: Vec<usize>,
    pub diagnosis: Diagnosis,
    /// Strong distance of the extracted limit to the family's closed-form
    /// limit, when both exist.
    pub known_limit_distance: Option<f64>,
}

pub fn diagnose_family(
    family: &Path,
    state: Option<&Path>,
    window: Option<(usize, usize)>,
    ladder: Option<&[usize]>,
    tol: &Tolerances,
) -> Result<DiagnoseReport> {
    let spec: FamilySpec = read_json(family, "family")?;
    let seq = make_family(&spec)?;
    let (n_min, n_max) = match window {
        Some(w) => w,
        None => (seq.first_index().max(1), seq.last_index().unwrap_or(200)),
    };
    let indices = seq.window(n_min, n_max);
    let sigma = match state {
        Some(p) => load_state(p, tol)?.0,
        None => default_faithful_state(seq.dim_in()),
    };
    let ladder = match ladder {
        Some(ranks) => TruncationLadder::coordinate(seq.dim_out(), ranks)?,
        None => default_ladder(&seq)?,
    };
    let diagnosis = diagnose(&seq, &sigma, &ladder, &indices, tol)?;
    let known_limit_distance = match (&diagnosis.extraction, known_limit(&spec)?) {
        (Some(ex), Some(limit)) => Some(strong_distance_default(&ex.operation, &limit)?),
        _ => None,
    };
    Ok(DiagnoseReport {
        family: spec,
        window: Window::of(&indices),
        ladder_ranks: ladder.ranks(),
        diagnosis,
        known_limit_distance,
    })
}

#[derive(Debug, Serialize)]
pub struct PetzReport {
    pub petz_map: ChannelSpec,
    pub support_rank: usize,
    pub eps_supp: f64,
    /// `|| Theta(Phi(sigma)) - sigma ||_1`.
    pub fixed_point_residual: f64,
    /// Largest entry of `Theta*(I) - Pi`, `Pi` the support of `Phi(sigma)`.
    pub dual_unitality_residual: f64,
    pub reversibility: Option<ReversibilityReport>,
}

pub fn petz(channel: &Path, sigma: &Path, rho: Option<&Path>, tol: &Tolerances) -> Result<PetzReport> {
    let phi = load_channel(channel)?;
    let sigma = load_state(sigma, tol)?.0;
    let map = petz_map(&phi, &sigma, tol)?;
    let unit = map.dual_apply(&identity(phi.dim_in()))?;
    let reversibility = match rho {
        Some(p) => Some(reversibility_test(&phi, &load_state(p, tol)?.0, &sigma, tol)?),
        None => None,
    };
    Ok(PetzReport {
        petz_map: ChannelSpec::from_operation(map.operation()),
        support_rank: map.support_rank(),
        eps_supp: map.eps_supp(),
        fixed_point_residual: map.fixed_point_residual(),
        dual_unitality_residual: max_abs(&(unit - map.output_support())),
        reversibility,
    })
}

#[derive(Debug, Serialize)]
pub struct QcmiCommandReport {
    pub dims: [usize; 3],
    pub qcmi: QcmiReport,
    pub recovery: Option<FrReport>,
}

pub fn qcmi_state(
    state: &Path,
    ladder: Option<(&[usize], &[usize])>,
    recovery: Option<&Path>,
    tol: &Tolerances,
) -> Result<QcmiCommandReport> {
    let (omega, dims) = load_state(state, tol)?;
    let dims = match dims.as_deref() {
        Some(&[a, b, c]) => Tripartite::new(a, b, c),
        _ => {
            return Err(strongconv::Error::InvalidInput(
                "qcmi needs a state spec with three factor dimensions in \"dims\"".into(),
            )
            .into())
        }
    };
    let report = match ladder {
        Some((ra, rc)) => {
            let (la, lc) = eigenbasis_ladders(&omega, dims, Some(ra), Some(rc))?;
            qcmi(&omega, dims, Some(&la), Some(&lc), tol)?
        }
        None => qcmi(&omega, dims, None, None, tol)?,
    };
    let recovery = match recovery {
        Some(p) => Some(fr_verify(&omega, dims, &load_channel(p)?, tol)?),
        None => None,
    };
    Ok(QcmiCommandReport {
        dims: [dims.a, dims.b, dims.c],
        qcmi: report,
        recovery,
    })
}

pub fn degradability(channel: &Path, opts: &FitOptions, tol: &Tolerances) -> Result<DegradabilityCertificate> {
    let phi = load_channel(channel)?;
    Ok(degradability_certificate(&phi, opts, tol)?)
}

/// A sequence of operators given explicitly or as the path
/// `(1 - eps_n) x_0 + eps_n toward`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OperatorPath {
    Explicit(Vec<MatrixSpec>),
    Mixing {
        toward: MatrixSpec,
        #[serde(default)]
        rate: Rate,
    },
}

/// Input of `entropy-harness`. Without `channel` or `family` the map is
/// the identity.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub rho0: MatrixSpec,
    pub sigma0: MatrixSpec,
    pub rho: OperatorPath,
    /// Constant `sigma0` when absent.
    #[serde(default)]
    pub sigma: Option<OperatorPath>,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    /// Limit of the family, estimated from the window when absent.
    #[serde(default)]
    pub limit: Option<ChannelSpec>,
    #[serde(default)]
    pub indices: Option<Vec<usize>>,
}

fn realize(
    path: Option<&OperatorPath>,
    x0: &PositiveOperator,
    indices: &[usize],
    tol: &Tolerances,
) -> Result<Vec<PositiveOperator>> {
    match path {
        None => Ok(vec![x0.clone(); indices.len()]),
        Some(OperatorPath::Explicit(list)) => {
            if list.len() != indices.len() {
                bail!(strongconv::Error::InvalidInput(format!(
                    "{} operators given for {} window indices",
                    list.len(),
                    indices.len()
                )));
            }
            list.iter()
                .map(|m| Ok(PositiveOperator::new(m.to_matrix()?, tol)?))
                .collect()
        }
        Some(OperatorPath::Mixing { toward, rate }) => {
            let toward = toward.to_matrix()?;
            indices
                .iter()
                .map(|&n| {
                    let e = rate.eps(n);
                    Ok(PositiveOperator::new(x0.matrix().scale(1.0 - e) + toward.scale(e), tol)?)
                })
                .collect()
        }
    }
}

/// Powers of ten `10^1 ..= 10^7`, the default harness window.
pub fn log_window() -> Vec<usize> {
    (1..=7).map(|k| 10usize.pow(k)).collect()
}

pub fn entropy_harness(
    config: &Path,
    window: Option<(usize, usize)>,
    tol: &Tolerances,
) -> Result<PreservationReport> {
    let cfg: HarnessConfig = read_json(config, "harness")?;
    let indices = match (window, &cfg.indices) {
        (Some((a, b)), _) => (a..=b).collect(),
        (None, Some(list)) => list.clone(),
        (None, None) => log_window(),
    };
    let rho0 = PositiveOperator::new(cfg.rho0.to_matrix()?, tol)?;
    let sigma0 = PositiveOperator::new(cfg.sigma0.to_matrix()?, tol)?;
    let rho = realize(Some(&cfg.rho), &rho0, &indices, tol)?;
    let sigma = realize(cfg.sigma.as_ref(), &sigma0, &indices, tol)?;
    let report = match (&cfg.channel, &cfg.family) {
        (Some(ch), None) => {
            let phi = ch.to_operation()?;
            convergence_preservation_harness(&indices, &rho, &sigma, &rho0, &sigma0, MapSequence::Fixed(&phi), tol)?
        }
        (None, Some(spec)) => {
            let seq = make_family(spec)?;
            let limit = cfg.limit.as_ref().map(ChannelSpec::to_operation).transpose()?;
            let maps = MapSequence::Sequence {
                seq: &seq,
                limit: limit.as_ref(),
            };
            convergence_preservation_harness(&indices, &rho, &sigma, &rho0, &sigma0, maps, tol)?
        }
        (None, None) => {
            let id = QuantumOperation::identity(rho0.dim());
            convergence_preservation_harness(&indices, &rho, &sigma, &rho0, &sigma0, MapSequence::Fixed(&id), tol)?
        }
        (Some(_), Some(_)) => bail!(strongconv::Error::InvalidInput(
            "give either \"channel\" or \"family\", not both".into()
        )),
    };
    Ok(report)
}
