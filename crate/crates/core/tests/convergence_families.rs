use strongconv::convergence::{
    default_ladder, diagnose, dual_ladder, extract_limit_point, strong_distance_default,
    two_step_limit_proof, default_probes, Outcome,
};
use strongconv::family::{known_limit, make_family, FamilySpec, Rate};
use strongconv::linalg::identity;
use strongconv::operator::default_faithful_state;
use strongconv::{Error, QuantumOperation, Tolerances};

fn rotating(d: usize) -> FamilySpec {
    FamilySpec::RotatingBasis {
        d,
        scale: 1.0,
        power: 1.0,
    }
}

#[test]
fn orthogonal_isometries_have_no_limit_point() {
    let spec = FamilySpec::OrthogonalIsometries {
        d_a: 2,
        n_max: 32,
        d_b: None,
    };
    let seq = make_family(&spec).unwrap();
    let tol = Tolerances::default();
    let sigma = default_faithful_state(2);
    let idx = seq.window(1, 32);
    let report = diagnose(&seq, &sigma, &default_ladder(&seq).unwrap(), &idx, &tol).unwrap();
    assert!((report.dual_ladder.gap - 1.0).abs() < 1e-9);
    assert!(!report.verdict.has_limit_point);
    assert!(report.verdict.criterion.is_none());
    assert!(report.dual_ladder.monotonicity >= -1e-9);
    assert!(matches!(
        extract_limit_point(&seq, &idx, None, tol.cauchy),
        Err(Error::NoLimitDetected { .. })
    ));
}

#[test]
fn rotating_basis_converges_to_pinching() {
    let seq = make_family(&rotating(8)).unwrap();
    let tol = Tolerances::default();
    let idx = seq.window(1, 200);
    let report = diagnose(&seq, &default_faithful_state(8), &default_ladder(&seq).unwrap(), &idx, &tol)
        .unwrap();
    assert!(report.dual_ladder.gap <= 1e-6, "gap {}", report.dual_ladder.gap);
    assert!(report.verdict.has_limit_point);
    let ex = report.extraction.unwrap();
    let pin = QuantumOperation::pinching(&identity(8));
    let to_pin = strong_distance_default(&ex.operation, &pin).unwrap();
    let to_id = strong_distance_default(&ex.operation, &QuantumOperation::identity(8)).unwrap();
    eprintln!("to_pin {to_pin:e} to_id {to_id}");
    assert!(to_pin <= 1e-6);
    assert!(to_id >= 0.1);
    // Kraus count of the limit does not exceed that of the elements
    assert!(ex.operation.kraus_count() <= 8);
}

#[test]
fn rotating_basis_dual_ladder_tends_to_projectors() {
    let seq = make_family(&rotating(4)).unwrap();
    let tol = Tolerances::default();
    let ladder = default_ladder(&seq).unwrap();
    let dl = dual_ladder(&seq, &default_faithful_state(4), &ladder, &seq.window(1, 120), &tol).unwrap();
    for (a, p) in dl.limits.iter().zip(ladder.projectors()) {
        assert!(strongconv::linalg::max_abs(&(a - p.matrix())) < 1e-8);
    }
}

#[test]
fn rotating_basis_two_step_rejects_identity() {
    let seq = make_family(&rotating(3)).unwrap();
    let tol = Tolerances::default();
    let v = two_step_limit_proof(
        &seq,
        &QuantumOperation::identity(3),
        &default_faithful_state(3),
        &default_probes(3),
        &seq.window(1, 100),
        &tol,
    )
    .unwrap();
    assert_eq!(v.outcome, Outcome::Fails);
    assert!(v.step1_holds);
}

#[test]
fn constant_output_limit_is_not_identity() {
    let spec = FamilySpec::ConstantOutput {
        d: 4,
        sigma0: None,
        tau: None,
        rate: Rate::Harmonic,
    };
    let seq = make_family(&spec).unwrap();
    let ex = extract_limit_point(&seq, &seq.window(0, 100), None, 1e-7).unwrap();
    let want = known_limit(&spec).unwrap().unwrap();
    assert!(strong_distance_default(&ex.operation, &want).unwrap() < 1e-8);
    assert!(strong_distance_default(&ex.operation, &QuantumOperation::identity(4)).unwrap() >= 0.5);
}

#[test]
fn harmonic_extraction_residuals_decay_along_the_subsequence() {
    let seq = make_family(&rotating(4)).unwrap();
    let ex = extract_limit_point(&seq, &seq.window(1, 200), None, Tolerances::default().cauchy).unwrap();
    let r = &ex.residuals;
    assert!(r.len() >= 2);
    // O(1/n) decay: the window end is far below the start but not below 1e-6
    assert!(r.last().unwrap().1 < 0.05 * r[0].1, "{r:?}");
    for w in r.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-12, "{r:?}");
    }
}
