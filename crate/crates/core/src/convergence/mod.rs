//! Strong-convergence metric and limit-point diagnostics on finite windows.

pub mod diagnose;
pub mod kraus;
pub mod limit;
pub mod metric;
pub mod proof;

pub use diagnose::{
    default_ladder, diagnose, dual_ladder, extract_limit_point, tail_mass_profile,
    ConvergenceVerdict, CriteriaReport, Criterion, Diagnosis, DualLadder, Extraction, TailProfile,
    Window,
};
pub use kraus::{
    align_rank_one, extract_kraus_subsequence, operator_family_tail_test, phase_distance,
    KrausExtraction, OperatorTailProfile, RankOneAlignment,
};
pub use limit::{estimate_limit, estimate_matrix_limit, LimitEstimate, LimitMethod};
pub use metric::{default_probes, strong_distance, strong_distance_default};
pub use proof::{
    dominated_limit_check, domination_limit_check, two_step_limit_proof, DominatedVerdict,
    DominationVerdict, Outcome, TwoStepVerdict,
};
