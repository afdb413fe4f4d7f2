mod common;

use hinform::hin::{angles_to_hin, classify, HinPair, DEFAULT_ZERO_TOL};
use hinform::linalg::{frobenius_distance, inverse, trace_drift, trace_powers};
use hinform::transform::{
    balance_input_normal, hessenberg_reduce, solve_stein, solve_stein_factor, standardize_signs,
    to_standard_hin, PipelineOptions, Stage,
};
use hinform::{Error, InputPair, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

#[test]
fn stein_matches_kronecker_for_small_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(1..=6);
        let d = rng.gen_range(1..=3);
        let pair = random_stable_pair(&mut rng, n, d, 0.8);
        let oracle = stein_kronecker(&pair);
        let p = solve_stein(&pair, 1e-13, 60).unwrap();
        assert!((to_na(&p.p) - &oracle).norm() <= 1e-10 * oracle.norm().max(1.0));
        let f = solve_stein_factor(&pair, 1e-13, 60).unwrap();
        assert!((to_na(&f.grammian()) - &oracle).norm() <= 1e-10 * oracle.norm().max(1.0));
    }
}

#[test]
fn balanced_pair_has_identity_grammian() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let pair = random_stable_pair(&mut rng, 5, 2, 0.9);
        let p = solve_stein(&pair, 1e-13, 60).unwrap();
        let (bal, rec) = balance_input_normal(&pair, &p.p).unwrap();
        assert!(bal.input_normal_residual() <= 1e-9);
        // The record's T maps the original to the balanced pair.
        let t = &rec.t_total;
        let expect_a = &(&inverse(t).unwrap() * &pair.a) * t;
        assert!(frobenius_distance(&expect_a, &bal.a).unwrap() <= 1e-9);
    }
}

#[test]
fn hessenberg_stage_is_orthogonal_and_structured() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let n = rng.gen_range(2..=9);
        let pair = random_stable_pair(&mut rng, n, 2, 0.9);
        let (out, rec) = hessenberg_reduce(&pair);
        let u = &rec.t_total;
        assert!(frobenius_distance(&u.gram_rows(), &Matrix::identity(n)).unwrap() <= 1e-12);
        assert!(out.b[(0, 0)] >= 0.0);
        for i in 1..n {
            assert_eq!(out.b[(i, 0)], 0.0);
            for j in 0..i - 1 {
                assert_eq!(out.a[(i, j)], 0.0);
            }
        }
        let before = trace_powers(&pair.a, 2 * n).unwrap();
        let after = trace_powers(&out.a, 2 * n).unwrap();
        assert!(trace_drift(&before, &after) <= 1e-8);
    }
}

#[test]
fn total_transform_maps_input_to_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..30 {
        let n = rng.gen_range(1..=8);
        let d = rng.gen_range(1..=3);
        let pair = random_stable_pair(&mut rng, n, d, 0.85);
        let (hin, rec) = to_standard_hin(&pair, PipelineOptions::default()).unwrap();
        let t = &rec.t_total;
        let t_inv = inverse(t).unwrap();
        let mapped = pair.similarity(t, &t_inv).unwrap();
        let scale = 1.0 + t.frobenius_norm() * t_inv.frobenius_norm();
        assert!(frobenius_distance(&mapped.a, hin.a()).unwrap() <= 1e-10 * scale);
        assert!(frobenius_distance(&mapped.b, hin.b()).unwrap() <= 1e-10 * scale);
        assert!(classify(&hin, DEFAULT_ZERO_TOL).standard);
    }
}

#[test]
fn pipeline_output_grammian_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..40 {
        let n = rng.gen_range(1..=20);
        let d = rng.gen_range(2..=5);
        let pair = random_stable_pair(&mut rng, n, d, 0.95);
        let (hin, _) = to_standard_hin(&pair, PipelineOptions::default()).unwrap();
        let oracle = smith_grammian(hin.as_input_pair());
        assert!((oracle - nalgebra::DMatrix::identity(n, n)).norm() <= 1e-7);
    }
}

#[test]
fn pipeline_is_idempotent_on_strict_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..30 {
        let pair = random_stable_pair(&mut rng, 6, 2, 0.9);
        let (first, _) = to_standard_hin(&pair, PipelineOptions::default()).unwrap();
        assert!(classify(&first, DEFAULT_ZERO_TOL).strict);
        let (second, _) =
            to_standard_hin(first.as_input_pair(), PipelineOptions::default()).unwrap();
        assert!(frobenius_distance(&first.concat(), &second.concat()).unwrap() <= 1e-8);
    }
}

#[test]
fn reduced_pair_keeps_structural_invariants() {
    // The second state is unreachable from the first: A = diag block, not strict.
    let angles = hinform::AngleVector::new(3, 1, vec![1.0, 0.0, 0.7]).unwrap();
    let hin = angles_to_hin(&angles);
    assert!(!classify(&hin, DEFAULT_ZERO_TOL).unreduced);
    // Mix the states while keeping A·Aᵀ + B·Bᵀ = I.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let q = random_orthogonal(&mut rng, 3);
    let conj = InputPair::new(
        from_na(&(q.transpose() * to_na(hin.a()) * &q)),
        from_na(&(q.transpose() * to_na(hin.b()))),
    )
    .unwrap();
    match to_standard_hin(&conj, PipelineOptions::default()) {
        Ok((out, _)) => {
            assert!(out.input_normal_residual() <= 1e-8);
            assert!(classify(&out, DEFAULT_ZERO_TOL).standard);
        }
        // A reduced pair is uncontrollable, so the balancing stage may refuse it.
        Err(e) => assert_eq!(e.stage, Stage::Balance),
    }
}

#[test]
fn signature_stage_fixes_every_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..30 {
        let angles = interior_angles(&mut rng, 5, 2, 0.05);
        let hin = angles_to_hin(&angles);
        let e: Vec<f64> = (0..5).map(|_| if rng.gen() { 1.0 } else { -1.0 }).collect();
        let em = Matrix::from_diagonal(&e);
        let flipped = InputPair::new(&(&em * hin.a()) * &em, &em * hin.b()).unwrap();
        let (fixed, sig) = standardize_signs(&flipped);
        assert_eq!(sig, e);
        assert_eq!(
            HinPair::new(fixed.a, fixed.b).unwrap().concat(),
            hin.concat()
        );
    }
}

#[test]
fn stage_attribution() {
    let unstable =
        InputPair::new(Matrix::from_rows(&[[1.2]]), Matrix::from_rows(&[[1.0]])).unwrap();
    let err = to_standard_hin(&unstable, PipelineOptions::default()).unwrap_err();
    assert_eq!(err.stage, Stage::Stein);
    assert!(matches!(err.source, Error::NotConverged { .. }));
    assert!(err.to_string().starts_with("stein"));

    let stuck = InputPair::new(
        Matrix::from_rows(&[[0.5, 0.0], [0.0, 0.5]]),
        Matrix::from_rows(&[[1.0], [0.0]]),
    )
    .unwrap();
    let err = to_standard_hin(&stuck, PipelineOptions::default()).unwrap_err();
    assert_eq!(err.stage, Stage::Balance);
    assert!(matches!(err.source, Error::NotPositiveDefinite { .. }));
}
