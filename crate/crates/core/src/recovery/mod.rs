//! Petz recovery, reversing-channel fits and degradability certificates.

pub mod degradability;
pub mod fit;
pub mod petz;
pub mod sequence;

pub use degradability::{degradability_certificate, degradable_closure_harness, ClosureVerdict, DegradabilityCertificate};
pub use fit::{fit_reversing_channel, reversal_residual, FitOptions, FitResult, RestartSummary};
pub use petz::{
    donald_identity_check, petz_interpolated, petz_map, reversibility_test, DonaldReport, PetzMap,
    ReversibilityReport,
};
pub use sequence::{reversing_sequence_harness, ReversingVerdict};
