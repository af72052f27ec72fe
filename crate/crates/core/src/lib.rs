//! Finite-truncation numerics for quantum operations under strong
//! convergence: Choi-Jamiolkowski correspondence, limit-point diagnostics,
//! Petz recovery, degradability certificates and entropic checks.

pub mod channel;
pub mod convergence;
pub mod entropy;
pub mod error;
pub mod family;
pub mod linalg;
pub mod operator;
pub mod random;
pub mod recovery;
pub mod spec;
pub mod tolerance;

pub use channel::{cj_forward, cj_inverse, cj_membership, ChoiOperator, Kind, QuantumOperation};
pub use error::{Error, Result};
pub use operator::{purify, PositiveOperator, Projector, Purification, State, TruncationLadder};
pub use tolerance::Tolerances;
