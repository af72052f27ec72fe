use proptest::prelude::*;

use strongconv::convergence::{
    dual_ladder, extract_limit_point, operator_family_tail_test, strong_distance_default,
};
use strongconv::entropy::{
    monotonicity_check, mutual_information, qcmi, qcmi_direct, relative_entropy_states, Tripartite,
};
use strongconv::family::{block_isometry, ChannelSequence};
use strongconv::linalg::{
    self, identity, max_abs, partial_trace, pinv_sqrt, support_projector, trace_norm,
    Mat, Subsystem,
};
use strongconv::operator::fidelity;
use strongconv::random;
use strongconv::recovery::{petz_interpolated, petz_map};
use strongconv::{
    cj_forward, cj_inverse, purify, PositiveOperator, QuantumOperation, Tolerances,
    TruncationLadder,
};

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Smallest Kraus count for which a channel `d_in -> d_out` exists is
/// `ceil(d_in / d_out)`.
fn kraus_count(d_in: usize, d_out: usize, k: usize) -> usize {
    k.max(d_in.div_ceil(d_out))
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn trace_norm_triangle(seed in any::<u64>(), d in 2usize..6) {
        let mut r = random::rng(seed);
        let a = random::ginibre(d, d, &mut r);
        let b = random::ginibre(d, d, &mut r);
        let lhs = trace_norm(&(&a + &b)).unwrap();
        let rhs = trace_norm(&a).unwrap() + trace_norm(&b).unwrap();
        prop_assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn fidelity_is_symmetric(seed in any::<u64>(), d in 2usize..6) {
        let mut r = random::rng(seed);
        let (x, y) = (random::state(d, &mut r), random::state(d, &mut r));
        let f = fidelity(&x, &y).unwrap();
        prop_assert!((f - fidelity(&y, &x).unwrap()).abs() <= 1e-10);
        prop_assert!(f <= 1.0 + 1e-10);
    }

    #[test]
    fn purification_reproduces_state(seed in any::<u64>(), d in 2usize..6, extra in 0usize..3) {
        let sigma = random::state(d, &mut random::rng(seed));
        let p = purify(&sigma, d + extra, &tol()).unwrap();
        let full = linalg::projector_onto(&p.vector);
        let back = partial_trace(&full, d, d + extra, Subsystem::First).unwrap();
        prop_assert!(trace_norm(&(back - sigma.matrix())).unwrap() <= 1e-10);
    }

    #[test]
    fn pinv_sqrt_sandwich_is_support_projector(seed in any::<u64>(), d in 2usize..6, rank in 1usize..6) {
        let rank = rank.min(d);
        let g = random::ginibre(d, rank, &mut random::rng(seed));
        let p = &g * g.adjoint();
        let eps = tol().supp;
        let s = pinv_sqrt(&p, eps);
        prop_assert!(max_abs(&(&s * &p * &s - support_projector(&p, eps))) <= 1e-8);
    }

    #[test]
    fn duality_identity(seed in any::<u64>(), d_in in 2usize..5, d_out in 2usize..5, k in 1usize..4) {
        let mut r = random::rng(seed);
        let phi = random::operation(d_in, d_out, kraus_count(d_in, d_out, k), &mut r);
        let rho = random::state(d_in, &mut r);
        let b = random::ginibre(d_out, d_out, &mut r);
        let lhs = linalg::trace(&(phi.apply_mat(rho.matrix()).unwrap() * &b));
        let rhs = linalg::trace(&(rho.matrix() * phi.dual_apply(&b).unwrap()));
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn cj_roundtrip_and_reference_marginal(
        seed in any::<u64>(), d_in in 2usize..5, d_out in 2usize..5, k in 1usize..4,
    ) {
        let k = kraus_count(d_in, d_out, k);
        let mut r = random::rng(seed);
        let phi = random::channel(d_in, d_out, k, &mut r);
        let sigma = random::faithful_state(d_in, 0.3, &mut r);
        let p = purify(&sigma, d_in, &tol()).unwrap();
        let choi = cj_forward(&phi, &p, &tol()).unwrap();
        let marginal = choi.reference_marginal() - p.reduced_r.matrix();
        prop_assert!(trace_norm(&marginal).unwrap() <= 1e-10);
        let back = cj_inverse(&choi, &tol()).unwrap();
        prop_assert!(strong_distance_default(&back, &phi).unwrap() <= 1e-8);
        prop_assert!(back.kraus_count() <= k);
    }

    #[test]
    fn double_complement_agrees(seed in any::<u64>(), d_in in 2usize..4, d_out in 2usize..4, k in 1usize..4) {
        let phi = random::channel(d_in, d_out, kraus_count(d_in, d_out, k), &mut random::rng(seed));
        let twice = phi.canonical(1e-10).complementary().complementary();
        prop_assert!(strong_distance_default(&twice, &phi).unwrap() <= 1e-8);
    }

    #[test]
    fn petz_fixed_point_and_dual_unitality(seed in any::<u64>(), d in 2usize..5, d_out in 2usize..5) {
        let mut r = random::rng(seed);
        let phi = random::channel(d, d_out, kraus_count(d, d_out, 2), &mut r);
        let sigma = random::faithful_state(d, 0.3, &mut r);
        let p = petz_map(&phi, &sigma, &tol()).unwrap();
        prop_assert!(p.fixed_point_residual() <= 1e-9);
        let unit = p.dual_apply(&identity(d)).unwrap();
        prop_assert!(max_abs(&(unit - p.output_support())) <= 1e-9);
    }

    #[test]
    fn relative_entropy_is_nonnegative(seed in any::<u64>(), d in 2usize..5) {
        let mut r = random::rng(seed);
        let (x, y) = (random::state(d, &mut r), random::faithful_state(d, 0.1, &mut r));
        let v = relative_entropy_states(&x, &y, &tol()).unwrap();
        prop_assert!(!v.infinite);
        prop_assert!(v.value >= -1e-10);
        prop_assert!(relative_entropy_states(&x, &x, &tol()).unwrap().value.abs() <= 1e-10);
    }

    #[test]
    fn monotonicity_slack_is_nonnegative(seed in any::<u64>(), d in 2usize..4, d_out in 2usize..4) {
        let mut r = random::rng(seed);
        let phi = random::channel(d, d_out, kraus_count(d, d_out, 2), &mut r);
        let rho = random::state(d, &mut r);
        let sigma = random::faithful_state(d, 0.2, &mut r);
        let rep = monotonicity_check(&phi, &rho, &sigma, &tol()).unwrap();
        prop_assert!(rep.slack.unwrap() >= -1e-9);
    }

    #[test]
    fn mutual_information_scaling(seed in any::<u64>(), c in 0.01f64..=1.0) {
        let omega = random::state(4, &mut random::rng(seed));
        let full = mutual_information(omega.operator(), 2, 2, &tol()).unwrap();
        let scaled = PositiveOperator::new(omega.matrix().scale(c), &tol()).unwrap();
        let part = mutual_information(&scaled, 2, 2, &tol()).unwrap();
        prop_assert!(full >= -1e-10);
        prop_assert!((part - c * full).abs() <= 1e-9);
    }

    #[test]
    fn qcmi_expressions_agree(seed in any::<u64>(), a in 2usize..4, c in 2usize..4) {
        let dims = Tripartite::new(a, 2, c);
        let omega = random::state(dims.total(), &mut random::rng(seed));
        let rep = qcmi(&omega, dims, None, None, &tol()).unwrap();
        prop_assert!(rep.full_ladders);
        prop_assert!(rep.value_e_plus >= -1e-8 && rep.value_e_plus_plus >= -1e-8);
        prop_assert!(rep.agreement <= 1e-6);
        prop_assert!((rep.direct - rep.value_e_plus).abs() <= 1e-7);
        prop_assert!((qcmi_direct(&omega, dims, &tol()).unwrap() - rep.direct).abs() <= 1e-12);
        for w in rep.profile_e_plus.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn interpolated_petz_approaches_petz(seed in any::<u64>(), d in 2usize..4) {
        let mut r = random::rng(seed);
        let phi = random::channel(d, d, 2, &mut r);
        let sigma = random::faithful_state(d, 0.5, &mut r);
        let rho = random::state(d, &mut r);
        let base = petz_map(&phi, &sigma, &tol()).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=6 {
            let pt = petz_interpolated(&phi, &rho, &sigma, 10f64.powi(-k), &tol()).unwrap();
            let dist = strong_distance_default(pt.operation(), base.operation()).unwrap();
            prop_assert!(dist <= last + 1e-12, "t = 1e-{k}: {dist} after {last}");
            last = dist;
        }
    }

    #[test]
    fn dual_ladder_is_monotone(seed in any::<u64>(), d in 2usize..5) {
        let mut r = random::rng(seed);
        let ops: Vec<QuantumOperation> = (0..6).map(|_| random::channel(d, d, 2, &mut r)).collect();
        let seq = ChannelSequence::explicit(ops).unwrap();
        let sigma = random::faithful_state(d, 0.3, &mut r);
        let basis = random::unitary(d, &mut r);
        let ranks: Vec<usize> = (1..=d).collect();
        let ladder = TruncationLadder::from_basis(&basis, &ranks).unwrap();
        let rep = dual_ladder(&seq, &sigma, &ladder, &seq.window(1, 6), &tol()).unwrap();
        prop_assert!(rep.monotonicity >= -1e-9);
    }
}

fn conjugation_sequence(ops: Vec<Mat>) -> ChannelSequence {
    let d_in = ops[0].ncols();
    let d_out = ops[0].nrows();
    let n_max = ops.len();
    ChannelSequence::from_fn("conjugation", d_in, d_out, 1, Some(n_max), move |n| {
        QuantumOperation::conjugation(ops[n - 1].clone())
    })
}

#[test]
fn operator_tail_vanishes_iff_extraction_succeeds() {
    let t = tol();
    let weights = [0.6, 0.4];

    // orthogonal blocks: no tail decay and no limit
    let shifts: Vec<Mat> = (1..=16).map(|n| block_isometry(2, 32, n)).collect();
    let ladder = TruncationLadder::coordinate(32, &[8, 16, 24, 32]).unwrap();
    let shifted = &shifts[8..];
    let prof = operator_family_tail_test(shifted, &identity(2), &weights, &ladder).unwrap();
    let seq = conjugation_sequence(shifts);
    let ex = extract_limit_point(&seq, &seq.window(1, 16), None, t.cauchy);
    assert!(prof.values[..2].iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(ex.is_err());

    // convergent isometries: full ladder tail vanishes and the limit exists
    let mut r = random::rng(3);
    let v0 = random::isometry(3, 2, &mut r);
    let h = random::hermitian(3, &mut r);
    let ops: Vec<Mat> = (1..=200)
        .map(|n| linalg::unitary_from_hermitian(&h.scale(1.0 / n as f64)) * &v0)
        .collect();
    let prof = operator_family_tail_test(&ops, &identity(2), &weights, &TruncationLadder::full(3)).unwrap();
    assert!(prof.last().abs() < 1e-12);
    let seq = conjugation_sequence(ops);
    let ex = extract_limit_point(&seq, &seq.window(1, 200), None, t.cauchy).unwrap();
    let limit = QuantumOperation::isometric(v0).unwrap();
    assert!(strong_distance_default(&ex.operation, &limit).unwrap() < 1e-6);
}

#[test]
fn limit_kraus_count_does_not_exceed_sequence_counts() {
    // unitary conjugations converging to a unitary: every element has rank one
    let mut r = random::rng(9);
    let u = random::unitary(3, &mut r);
    let h = random::hermitian(3, &mut r);
    let ops: Vec<Mat> = (1..=150)
        .map(|n| linalg::unitary_from_hermitian(&h.scale(1.0 / n as f64)) * &u)
        .collect();
    let seq = conjugation_sequence(ops);
    let ex = extract_limit_point(&seq, &seq.window(1, 150), None, tol().cauchy).unwrap();
    assert_eq!(ex.operation.choi_rank(1e-8), 1);

    // depolarizing strength 1/n: rank 4 along the sequence, rank 1 in the limit
    let seq = ChannelSequence::from_fn("depolarizing", 2, 2, 1, None, |n| {
        QuantumOperation::depolarizing(2, 1.0 / n as f64)
    });
    let ex = extract_limit_point(&seq, &seq.window(1, 200), None, tol().cauchy).unwrap();
    assert!(ex.operation.choi_rank(1e-6) <= 4);
    let id = QuantumOperation::identity(2);
    assert!(strong_distance_default(&ex.operation, &id).unwrap() < 1e-6);
}
