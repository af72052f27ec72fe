//! Lazily evaluated sequences `n -> Phi_n`, including the built-in
//! counterexample families.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Kind, QuantumOperation};
use crate::error::{Error, Result};
use crate::linalg::{self, c, identity, Mat};
use crate::operator::{default_faithful_state, State};
use crate::spec::{ChannelSpec, MatrixSpec};
use crate::tolerance::Tolerances;

type Generator = dyn Fn(usize) -> Result<QuantumOperation> + Send + Sync;

/// Decay of `eps_n` in the constant-output family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Rate {
    /// `eps_n = 1/n`.
    #[default]
    Harmonic,
    /// `eps_n = ratio^n`.
    Geometric { ratio: f64 },
}

impl Rate {
    pub fn eps(&self, n: usize) -> f64 {
        match *self {
            Rate::Harmonic => 1.0 / n as f64,
            Rate::Geometric { ratio } => ratio.powi(n as i32),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Family spec `{"family": tag, "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `V_n` embeds `C^{d_a}` into the `n`-th block of `C^{d_b}`, `n = 1..=n_max`.
    OrthogonalIsometries {
        d_a: usize,
        n_max: usize,
        #[serde(default)]
        d_b: Option<usize>,
    },
    /// Pinching in the rotated basis `R(theta_n) e_k`, read out in the
    /// canonical basis, with `theta_n = scale / n^power`; index 0 is the
    /// identity channel.
    RotatingBasis {
        d: usize,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        power: f64,
    },
    /// `rho -> [Tr rho] sigma_n`, `sigma_n = (1 - eps_n) sigma_0 + eps_n tau`;
    /// index 0 is the identity channel.
    ConstantOutput {
        d: usize,
        #[serde(default)]
        sigma0: Option<MatrixSpec>,
        #[serde(default)]
        tau: Option<MatrixSpec>,
        #[serde(default)]
        rate: Rate,
    },
    /// Elements are numbered from 1.
    ExplicitList { channels: Vec<ChannelSpec> },
}

/// A sequence of operations with constant dimensions, evaluated on demand.
#[derive(Clone)]
pub struct ChannelSequence {
    tag: String,
    params: serde_json::Value,
    dim_in: usize,
    dim_out: usize,
    first: usize,
    last: Option<usize>,
    generator: Arc<Generator>,
}

impl fmt::Debug for ChannelSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelSequence")
            .field("tag", &self.tag)
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("first", &self.first)
            .field("last", &self.last)
            .finish()
    }
}

impl ChannelSequence {
    /// Wraps a pure generator defined for `first..=last` (unbounded when
    /// `last` is `None`).
    pub fn from_fn<F>(
        tag: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        first: usize,
        last: Option<usize>,
        f: F,
    ) -> Self
    where
        F: Fn(usize) -> Result<QuantumOperation> + Send + Sync + 'static,
    {
        ChannelSequence {
            tag: tag.into(),
            params: serde_json::Value::Null,
            dim_in,
            dim_out,
            first,
            last,
            generator: Arc::new(f),
        }
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }

    /// Sequence `1 -> ops[0], 2 -> ops[1], ...`.
    pub fn explicit(ops: Vec<QuantumOperation>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::invalid("explicit list is empty"))?;
        let (d_in, d_out) = (first.dim_in(), first.dim_out());
        if ops.iter().any(|o| o.dim_in() != d_in || o.dim_out() != d_out) {
            return Err(Error::invalid("explicit list mixes dimensions"));
        }
        let len = ops.len();
        let ops = Arc::new(ops);
        Ok(Self::from_fn("explicit_list", d_in, d_out, 1, Some(len), move |n| {
            Ok(ops[n - 1].clone())
        }))
    }

    /// Constant sequence on `first..=last`.
    pub fn constant(op: QuantumOperation, first: usize, last: Option<usize>) -> Self {
        let (d_in, d_out) = (op.dim_in(), op.dim_out());
        Self::from_fn("constant", d_in, d_out, first, last, move |_| Ok(op.clone()))
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn params(&self) -> &serde_json::Value {
        &self.params
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn first_index(&self) -> usize {
        self.first
    }

    pub fn last_index(&self) -> Option<usize> {
        self.last
    }

    pub fn is_unbounded(&self) -> bool {
        self.last.is_none()
    }

    pub fn contains(&self, n: usize) -> bool {
        n >= self.first && self.last.is_none_or(|l| n <= l)
    }

    pub fn get(&self, n: usize) -> Result<QuantumOperation> {
        if !self.contains(n) {
            return Err(Error::invalid(format!(
                "index {n} outside the domain of sequence '{}'",
                self.tag
            )));
        }
        let op = (self.generator)(n)?;
        if op.dim_in() != self.dim_in || op.dim_out() != self.dim_out {
            return Err(Error::invalid(format!(
                "element {n} of '{}' has dimensions {}->{}, expected {}->{}",
                self.tag,
                op.dim_in(),
                op.dim_out(),
                self.dim_in,
                self.dim_out
            )));
        }
        Ok(op)
    }

    /// Evaluates the requested indices in parallel, preserving order.
    pub fn evaluate(&self, indices: &[usize]) -> Result<Vec<QuantumOperation>> {
        indices.par_iter().map(|&n| self.get(n)).collect()
    }

    /// Index window `[max(first, n_min), min(last, n_max)]`.
    pub fn window(&self, n_min: usize, n_max: usize) -> Vec<usize> {
        let lo = n_min.max(self.first);
        let hi = self.last.map_or(n_max, |l| l.min(n_max));
        (lo..=hi).collect()
    }

    /// `n -> Phi_n (x) Psi_n` on the common domain.
    pub fn tensor(&self, other: &ChannelSequence) -> ChannelSequence {
        let (a, b) = (self.clone(), other.clone());
        let last = match (self.last, other.last) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        ChannelSequence::from_fn(
            format!("{}(x){}", self.tag, other.tag),
            self.dim_in * other.dim_in,
            self.dim_out * other.dim_out,
            self.first.max(other.first),
            last,
            move |n| Ok(a.get(n)?.tensor(&b.get(n)?)),
        )
    }

    /// `n -> f(Phi_n)`, with dimensions taken from the first element.
    pub fn map<F>(&self, tag: impl Into<String>, f: F) -> Result<ChannelSequence>
    where
        F: Fn(QuantumOperation) -> Result<QuantumOperation> + Send + Sync + 'static,
    {
        let probe = f(self.get(self.first)?)?;
        let inner = self.clone();
        Ok(ChannelSequence::from_fn(
            tag,
            probe.dim_in(),
            probe.dim_out(),
            self.first,
            self.last,
            move |n| f(inner.get(n)?),
        ))
    }
}

/// Product of Givens rotations by `theta` in the pairs `(0,1), (1,2), ...`.
pub fn adjacent_rotation(d: usize, theta: f64) -> Mat {
    let (s, co) = theta.sin_cos();
    let mut r = identity(d);
    for k in 0..d.saturating_sub(1) {
        let mut g = identity(d);
        g[(k, k)] = c(co, 0.0);
        g[(k + 1, k + 1)] = c(co, 0.0);
        g[(k, k + 1)] = c(-s, 0.0);
        g[(k + 1, k)] = c(s, 0.0);
        r = g * r;
    }
    r
}

/// Pinching in the basis `basis`, read out in the canonical basis:
/// Kraus `|e_k><b_k|`.
pub fn rotated_pinching(basis: &Mat) -> QuantumOperation {
    let d = basis.nrows();
    let kraus = (0..d)
        .map(|k| {
            let e = linalg::basis_vector(d, k);
            let b = basis.column(k).into_owned();
            linalg::outer(&e, &b)
        })
        .collect();
    QuantumOperation::from_kraus_unchecked(d, d, kraus, Kind::Channel)
}

/// Isometry of the `n`-th block (1-based) of `C^{d_b}` with block size `d_a`.
pub fn block_isometry(d_a: usize, d_b: usize, n: usize) -> Mat {
    let mut v = linalg::zeros(d_b, d_a);
    for i in 0..d_a {
        v[((n - 1) * d_a + i, i)] = linalg::ONE;
    }
    v
}

/// Validated `sigma_n` of the constant-output family.
fn mixed(sigma0: &State, tau: &State, eps: f64) -> State {
    State::from_trusted(sigma0.matrix().scale(1.0 - eps) + tau.matrix().scale(eps))
}

fn state_param(spec: &Option<MatrixSpec>, d: usize, default: State) -> Result<State> {
    match spec {
        None => Ok(default),
        Some(m) => {
            let s = State::new(m.to_matrix()?, &Tolerances::default())?;
            Error::check_dim(d, s.dim())?;
            Ok(s)
        }
    }
}

/// Builds a built-in family from its spec.
pub fn make_family(spec: &FamilySpec) -> Result<ChannelSequence> {
    let params = serde_json::to_value(spec).expect("family spec serializes")["params"].clone();
    let seq = match spec {
        &FamilySpec::OrthogonalIsometries { d_a, n_max, d_b } => {
            if d_a == 0 || n_max == 0 {
                return Err(Error::invalid("d_a and n_max must be positive"));
            }
            let need = n_max * d_a;
            let d_b = d_b.unwrap_or(need);
            if d_b < need {
                return Err(Error::Infeasible(format!(
                    "ambient dimension {d_b} cannot hold {n_max} orthogonal blocks of size {d_a}"
                )));
            }
            ChannelSequence::from_fn(
                "orthogonal_isometries",
                d_a,
                d_b,
                1,
                Some(n_max),
                move |n| {
                    let v = block_isometry(d_a, d_b, n);
                    Ok(QuantumOperation::from_kraus_unchecked(d_a, d_b, vec![v], Kind::Channel))
                },
            )
        }
        &FamilySpec::RotatingBasis { d, scale, power } => {
            if d < 2 || !scale.is_finite() || power <= 0.0 {
                return Err(Error::invalid(
                    "rotating_basis needs d >= 2, finite scale and positive power",
                ));
            }
            ChannelSequence::from_fn("rotating_basis", d, d, 0, None, move |n| {
                if n == 0 {
                    return Ok(QuantumOperation::identity(d));
                }
                let theta = scale / (n as f64).powf(power);
                Ok(rotated_pinching(&adjacent_rotation(d, theta)))
            })
        }
        FamilySpec::ConstantOutput {
            d,
            sigma0,
            tau,
            rate,
        } => {
            let d = *d;
            if d == 0 {
                return Err(Error::invalid("dimension must be positive"));
            }
            if let Rate::Geometric { ratio } = rate {
                if !(0.0..1.0).contains(ratio) {
                    return Err(Error::invalid("geometric ratio must lie in [0, 1)"));
                }
            }
            let sigma0 = state_param(sigma0, d, default_faithful_state(d))?;
            let tau = state_param(tau, d, State::basis(d, d - 1))?;
            let rate = *rate;
            ChannelSequence::from_fn("constant_output", d, d, 0, None, move |n| {
                if n == 0 {
                    return Ok(QuantumOperation::identity(d));
                }
                Ok(QuantumOperation::constant_output(d, &mixed(&sigma0, &tau, rate.eps(n))))
            })
        }
        FamilySpec::ExplicitList { channels } => {
            let ops = channels
                .iter()
                .map(ChannelSpec::to_operation)
                .collect::<Result<Vec<_>>>()?;
            ChannelSequence::explicit(ops)?
        }
    };
    Ok(seq.with_params(params))
}

/// The strong limit of a built-in family, where it is known in closed form.
pub fn known_limit(spec: &FamilySpec) -> Result<Option<QuantumOperation>> {
    Ok(match spec {
        FamilySpec::OrthogonalIsometries { .. } => None,
        &FamilySpec::RotatingBasis { d, .. } => Some(QuantumOperation::pinching(&identity(d))),
        FamilySpec::ConstantOutput { d, sigma0, .. } => {
            let s = state_param(sigma0, *d, default_faithful_state(*d))?;
            Some(QuantumOperation::constant_output(*d, &s))
        }
        FamilySpec::ExplicitList { .. } => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn orthogonal_ranges() {
        let seq = make_family(&FamilySpec::OrthogonalIsometries {
            d_a: 2,
            n_max: 5,
            d_b: None,
        })
        .unwrap();
        assert_eq!(seq.dim_out(), 10);
        let ops = seq.evaluate(&seq.window(1, 5)).unwrap();
        for (i, a) in ops.iter().enumerate() {
            for (j, b) in ops.iter().enumerate() {
                let prod = a.kraus()[0].adjoint() * &b.kraus()[0];
                if i == j {
                    assert!(max_abs(&(prod - identity(2))) < 1e-12);
                } else {
                    assert!(max_abs(&prod) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn orthogonal_isometries_too_small_ambient() {
        let err = make_family(&FamilySpec::OrthogonalIsometries {
            d_a: 2,
            n_max: 5,
            d_b: Some(8),
        })
        .unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn rotating_basis_elements_are_channels() {
        let seq = make_family(&FamilySpec::RotatingBasis {
            d: 4,
            scale: 1.0,
            power: 1.0,
        })
        .unwrap();
        assert_eq!(seq.get(0).unwrap(), QuantumOperation::identity(4));
        for n in [1, 2, 7] {
            let op = seq.get(n).unwrap();
            assert!(max_abs(&(op.kraus_sum() - identity(4))) < 1e-12);
        }
        let r = adjacent_rotation(5, 0.3);
        assert!(max_abs(&(r.adjoint() * &r - identity(5))) < 1e-12);
    }

    #[test]
    fn explicit_list_is_one_based() {
        let a = QuantumOperation::identity(2);
        let b = QuantumOperation::dephasing(0.5).unwrap();
        let seq = ChannelSequence::explicit(vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(seq.get(1).unwrap(), a);
        assert_eq!(seq.get(2).unwrap(), b);
        assert!(seq.get(0).is_err() && seq.get(3).is_err());
        assert_eq!(seq.window(0, 100), vec![1, 2]);
    }

    #[test]
    fn family_spec_json_shape() {
        let spec: FamilySpec =
            serde_json::from_str(r#"{"family":"rotating_basis","params":{"d":3}}"#).unwrap();
        assert_eq!(
            spec,
            FamilySpec::RotatingBasis {
                d: 3,
                scale: 1.0,
                power: 1.0
            }
        );
        let spec: FamilySpec = serde_json::from_str(
            r#"{"family":"constant_output","params":{"d":2,"rate":{"kind":"geometric","ratio":0.5}}}"#,
        )
        .unwrap();
        let seq = make_family(&spec).unwrap();
        assert_eq!(seq.params()["d"], 2);
    }

    #[test]
    fn constant_output_elements() {
        let spec = FamilySpec::ConstantOutput {
            d: 3,
            sigma0: None,
            tau: None,
            rate: Rate::Harmonic,
        };
        let seq = make_family(&spec).unwrap();
        let rho = State::maximally_mixed(3);
        let out = seq.get(4).unwrap().apply_state(&rho).unwrap();
        let s0 = default_faithful_state(3);
        let want = s0.matrix().scale(0.75) + State::basis(3, 2).matrix().scale(0.25);
        assert!(max_abs(&(out.matrix() - want)) < 1e-14);
    }
}
