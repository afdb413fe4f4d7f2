//! Shared helpers for the integration tests. Independent oracles (Kronecker
//! solves, eigenvalues, orthogonal factors) come from nalgebra so they share
//! no code with the kernels under test.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use hinform::{AngleVector, InputPair, Matrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    let data: Vec<f64> = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect();
    Matrix::from_row_major(m.nrows(), m.ncols(), data).unwrap()
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Gaussian `(A, B)` with `A` rescaled to spectral radius `rho`.
pub fn random_stable_pair(rng: &mut ChaCha8Rng, n: usize, d: usize, rho: f64) -> InputPair {
    let a = gaussian(rng, n, n);
    let r = spectral_radius(&a);
    let a = if r > 0.0 { a * (rho / r) } else { a };
    let b = gaussian(rng, n, d);
    InputPair::new(from_na(&a), from_na(&b)).unwrap()
}

/// Haar-ish orthogonal matrix: Q factor of a Gaussian with the sign of
/// `diag(R)` absorbed.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `vec(P) = (I − A⊗A)⁻¹ vec(B·Bᵀ)` by a dense LU solve.
pub fn stein_kronecker(pair: &InputPair) -> DMatrix<f64> {
    let a = to_na(&pair.a);
    let b = to_na(&pair.b);
    let n = a.nrows();
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - a.kronecker(&a);
    let q = &b * b.transpose();
    let rhs = nalgebra::DVector::from_iterator(n * n, q.iter().copied());
    let x = lhs.lu().solve(&rhs).expect("nonsingular Kronecker system");
    DMatrix::from_column_slice(n, n, x.as_slice())
}

/// Angles strictly inside the canonical domain, `margin` away from its edges.
pub fn interior_angles(rng: &mut ChaCha8Rng, n: usize, d: usize, margin: f64) -> AngleVector {
    let thetas = (0..n * d)
        .map(|slot| {
            if slot % d == 0 {
                rng.gen_range(margin..PI - margin)
            } else {
                rng.gen_range(-FRAC_PI_2 + margin..FRAC_PI_2 - margin)
            }
        })
        .collect();
    AngleVector::new(n, d, thetas).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Grammian by summing the series `Σ A^k·B·Bᵀ·A^kᵀ` until the terms vanish.
pub fn smith_grammian(pair: &InputPair) -> DMatrix<f64> {
    let a = to_na(&pair.a);
    let mut term = to_na(&pair.b);
    let mut p = &term * term.transpose();
    for _ in 0..100_000 {
        term = &a * term;
        let inc = &term * term.transpose();
        p += &inc;
        if inc.norm() <= 1e-18 * p.norm() {
            break;
        }
    }
    p
}

/// Condition number of a symmetric matrix; infinite when it is not
/// numerically positive definite.
pub fn spd_condition(p: &DMatrix<f64>) -> f64 {
    let ev = p.clone().symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
