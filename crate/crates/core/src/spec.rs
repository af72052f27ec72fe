//! JSON schemas for matrices, states and channels.
//!
//! Matrices are nested arrays of `[re, im]` pairs in row-major order:
//! `[[[1,0],[0,0]],[[0,0],[1,0]]]` is the 2x2 identity.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{Kind, QuantumOperation};
use crate::error::{Error, Result};
use crate::linalg::{c, Mat};
use crate::operator::State;
use crate::tolerance::Tolerances;

/// Row-major nested array of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<[f64; 2]>>);

impl MatrixSpec {
    pub fn from_matrix(m: &Mat) -> Self {
        MatrixSpec(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }

    pub fn to_matrix(&self) -> Result<Mat> {
        let rows = self.0.len();
        if rows == 0 {
            return Err(Error::invalid("matrix has no rows"));
        }
        let cols = self.0[0].len();
        if cols == 0 || self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("matrix rows are empty or ragged"));
        }
        let m = Mat::from_fn(rows, cols, |i, j| {
            let [re, im] = self.0[i][j];
            c(re, im)
        });
        crate::linalg::ensure_finite(&m)?;
        Ok(m)
    }
}

/// `{"dim_in", "dim_out", "kind", "kraus"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kind: Kind,
    pub kraus: Vec<MatrixSpec>,
}

impl ChannelSpec {
    pub fn from_operation(op: &QuantumOperation) -> Self {
        ChannelSpec {
            dim_in: op.dim_in(),
            dim_out: op.dim_out(),
            kind: op.kind(),
            kraus: op.kraus().iter().map(MatrixSpec::from_matrix).collect(),
        }
    }

    pub fn to_operation(&self) -> Result<QuantumOperation> {
        let kraus = self
            .kraus
            .iter()
            .map(MatrixSpec::to_matrix)
            .collect::<Result<Vec<_>>>()?;
        QuantumOperation::new(self.dim_in, self.dim_out, kraus, self.kind)
    }
}

/// A state given either as a density matrix or as a pure vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Density {
        density: MatrixSpec,
        /// Tensor factor dimensions, e.g. `[2, 2, 2]`.
        #[serde(default)]
        dims: Option<Vec<usize>>,
    },
    Pure {
        vector: Vec<[f64; 2]>,
        #[serde(default)]
        dims: Option<Vec<usize>>,
    },
}

impl StateSpec {
    pub fn from_state(s: &State) -> Self {
        StateSpec::Density {
            density: MatrixSpec::from_matrix(s.matrix()),
            dims: None,
        }
    }

    pub fn dims(&self) -> Option<&[usize]> {
        match self {
            StateSpec::Density { dims, .. } | StateSpec::Pure { dims, .. } => dims.as_deref(),
        }
    }

    pub fn to_state(&self, tol: &Tolerances) -> Result<State> {
        let state = match self {
            StateSpec::Density { density, .. } => State::new(density.to_matrix()?, tol)?,
            StateSpec::Pure { vector, .. } => {
                let v = crate::linalg::CVec::from_iterator(
                    vector.len(),
                    vector.iter().map(|[re, im]| c(*re, *im)),
                );
                State::pure(&v)?
            }
        };
        if let Some(d) = self.dims() {
            if d.iter().product::<usize>() != state.dim() {
                return Err(Error::invalid(format!(
                    "factor dimensions {d:?} do not multiply to {}",
                    state.dim()
                )));
            }
        }
        Ok(state)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::invalid(format!("malformed {what} spec: {e}")))
}

pub fn parse_channel(text: &str) -> Result<QuantumOperation> {
    parse::<ChannelSpec>(text, "channel")?.to_operation()
}

pub fn load_channel(path: &Path) -> Result<QuantumOperation> {
    parse_channel(&read(path)?)
}

pub fn load_state_spec(path: &Path) -> Result<StateSpec> {
    parse(&read(path)?, "state")
}

pub fn channel_to_json(op: &QuantumOperation) -> String {
    serde_json::to_string(&ChannelSpec::from_operation(op)).expect("channel spec serializes")
}
