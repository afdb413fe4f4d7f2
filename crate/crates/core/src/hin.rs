//! Hessenberg input-normal (HIN) pairs and their Givens angle representation.
//!
//! `(B | A)` is built as the first `n` rows of a product of `n·d` Givens
//! rotations applied to `(0_{n,d} | I_n)`. Rotation group `r` (one per row,
//! `d` angles each) acts on the columns
//!
//! * pivot: `B` column 0 for `r = 0`, otherwise `A` column `r − 1`,
//! * free: `B` columns `1..d`,
//! * target: `A` column `r`,
//!
//! using the slot layout of [`crate::givens`]. Groups are applied in order
//! `r = 0, 1, …, n − 1`; peeling them back in reverse order recovers the
//! angles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::givens::{self, AngleDomain, GivensRotation, OpCounter};
use crate::linalg::{frobenius_distance, Matrix};
use crate::pair::InputPair;

/// Default threshold for treating entries as zero in classification.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

/// Tolerance on `‖A·Aᵀ + B·Bᵀ − I‖_F` for a valid [`HinPair`].
pub const INPUT_NORMAL_TOL: f64 = 1e-10;

/// Tolerance on structural zeros for a valid [`HinPair`].
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Orthonormality residual above which angle extraction refuses the pair.
pub const EXTRACTION_ORTHONORMAL_TOL: f64 = 1e-8;

/// A validated pair that is input normal and in Hessenberg form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HinPair {
    pair: InputPair,
}

impl HinPair {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        Self::from_input_pair(InputPair::new(a, b)?)
    }

    pub fn from_input_pair(pair: InputPair) -> Result<Self> {
        Self::from_input_pair_with_tol(pair, INPUT_NORMAL_TOL)
    }

    /// As [`HinPair::from_input_pair`] with a caller-chosen input-normality tolerance.
    pub fn from_input_pair_with_tol(pair: InputPair, normal_tol: f64) -> Result<Self> {
        check_hessenberg(&pair)?;
        let residual = pair.input_normal_residual();
        if !(residual <= normal_tol) {
            return Err(Error::NotOrthonormal { residual });
        }
        Ok(Self { pair })
    }

    pub fn n(&self) -> usize {
        self.pair.n()
    }

    pub fn d(&self) -> usize {
        self.pair.d()
    }

    pub fn a(&self) -> &Matrix {
        &self.pair.a
    }

    pub fn b(&self) -> &Matrix {
        &self.pair.b
    }

    pub fn as_input_pair(&self) -> &InputPair {
        &self.pair
    }

    pub fn into_input_pair(self) -> InputPair {
        self.pair
    }

    pub fn concat(&self) -> Matrix {
        self.pair.concat()
    }

    pub fn input_normal_residual(&self) -> f64 {
        self.pair.input_normal_residual()
    }
}

fn check_hessenberg(pair: &InputPair) -> Result<()> {
    let (a, b) = (&pair.a, &pair.b);
    let n = pair.n();
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            if a[(i, j)].abs() > STRUCTURE_TOL {
                return Err(Error::NotHessenberg(format!(
                    "A[{i},{j}] = {:e} below the subdiagonal",
                    a[(i, j)]
                )));
            }
        }
    }
    for j in 1..n {
        if b[(j, 0)].abs() > STRUCTURE_TOL {
            return Err(Error::NotHessenberg(format!("B[{j},0] = {:e}", b[(j, 0)])));
        }
    }
    if b[(0, 0)] < -STRUCTURE_TOL {
        return Err(Error::NotHessenberg(format!(
            "B[0,0] = {:e} is negative",
            b[(0, 0)]
        )));
    }
    Ok(())
}

/// Classification flags of a Hessenberg pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HinClass {
    pub nondegenerate: bool,
    pub unreduced: bool,
    pub standard: bool,
    pub strict: bool,
}

pub fn classify(pair: &HinPair, zero_tol: f64) -> HinClass {
    let b11 = pair.b()[(0, 0)];
    let a = pair.a();
    let subdiag = || (1..pair.n()).map(|i| a[(i, i - 1)]);
    let nondegenerate = b11.abs() < 1.0 - zero_tol;
    let unreduced = b11.abs() > zero_tol && subdiag().all(|v| v.abs() > zero_tol);
    let standard = (-zero_tol..=1.0 + zero_tol).contains(&b11) && subdiag().all(|v| v >= -zero_tol);
    HinClass {
        nondegenerate,
        unreduced,
        standard,
        strict: unreduced && standard,
    }
}

/// `n·d` angles, grouped by row: the `d` angles of group 0 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleVector {
    n: usize,
    d: usize,
    thetas: Vec<f64>,
}

impl AngleVector {
    pub fn new(n: usize, d: usize, thetas: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::DimensionMismatch(format!(
                "n = {n}, d = {d} must be positive"
            )));
        }
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Error::DimensionMismatch("n·d overflows".into()))?;
        if thetas.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "expected {len} angles, got {}",
                thetas.len()
            )));
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite angle".into()));
        }
        Ok(Self { n, d, thetas })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            thetas: vec![0.0; n * d],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn into_thetas(self) -> Vec<f64> {
        self.thetas
    }

    pub fn group(&self, r: usize) -> &[f64] {
        &self.thetas[r * self.d..(r + 1) * self.d]
    }

    pub fn domain(&self) -> AngleDomain {
        AngleDomain::new(self.n, self.d)
    }

    /// All `n·d` rotations in `(B|A)` column coordinates, in the order they
    /// right-multiply `(0 | I)`.
    pub fn rotations(&self) -> Vec<GivensRotation> {
        (0..self.n)
            .flat_map(|r| group_rotations(self.n, self.d, r, self.group(r)))
            .collect()
    }
}

/// Column of `(B|A)` holding slot `slot` of row group `r`.
fn slot_column(d: usize, r: usize, slot: usize) -> usize {
    if slot == givens::PIVOT_SLOT {
        if r == 0 {
            0
        } else {
            d + r - 1
        }
    } else if slot == givens::target_slot(d) {
        d + r
    } else {
        slot
    }
}

fn group_columns(d: usize, r: usize) -> Vec<usize> {
    (0..=d).map(|slot| slot_column(d, r, slot)).collect()
}

fn group_rotations(_n: usize, d: usize, r: usize, thetas: &[f64]) -> Vec<GivensRotation> {
    givens::row_rotations(thetas)
        .into_iter()
        .map(|rot| {
            GivensRotation::new(
                slot_column(d, r, rot.i()),
                slot_column(d, r, rot.j()),
                rot.theta(),
            )
        })
        .collect()
}

fn right_apply_rows(rot: &GivensRotation, m: &mut Matrix, rows: usize) {
    let mut scratch = OpCounter::new();
    for i in 0..rows {
        rot.apply_right(m.row_mut(i), &mut scratch);
    }
}

/// Materialize `(B|A) = (0 | I)·U⁽¹⁾·V⁽²⁾⋯V⁽ⁿ⁾` from its angles.
pub fn angles_to_hin(angles: &AngleVector) -> HinPair {
    let (n, d) = (angles.n, angles.d);
    let mut m = Matrix::zeros(n, n + d);
    for i in 0..n {
        m[(i, d + i)] = 1.0;
    }
    for r in 0..n {
        // Rows below r are still unit vectors outside this group's columns.
        for rot in group_rotations(n, d, r, angles.group(r)) {
            right_apply_rows(&rot, &mut m, r + 1);
        }
    }
    for i in 1..n {
        m[(i, 0)] = 0.0;
        for j in 0..i - 1 {
            m[(i, d + j)] = 0.0;
        }
    }
    let pair = InputPair::from_concat(&m, d).expect("materialized dimensions");
    debug_assert!(pair.input_normal_residual() <= 1e-12 * (n as f64).max(1.0));
    HinPair { pair }
}

/// Recover the canonical angles of a standard HIN pair by peeling rows
/// bottom-up.
pub fn hin_to_angles(pair: &HinPair) -> Result<AngleVector> {
    let class = classify(pair, DEFAULT_ZERO_TOL);
    if !class.standard {
        return Err(Error::NotStandard(format!(
            "B[0,0] = {:e}, min subdiagonal = {:e}",
            pair.b()[(0, 0)],
            (1..pair.n())
                .map(|i| pair.a()[(i, i - 1)])
                .fold(f64::INFINITY, f64::min)
        )));
    }
    let residual = pair.input_normal_residual();
    if !(residual <= EXTRACTION_ORTHONORMAL_TOL) {
        return Err(Error::NotOrthonormal { residual });
    }
    let (n, d) = (pair.n(), pair.d());
    let mut m = pair.concat();
    let mut thetas = vec![0.0; n * d];
    for r in (0..n).rev() {
        let cols = group_columns(d, r);
        let mut x: Vec<f64> = cols.iter().map(|&c| m[(r, c)]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= EXTRACTION_ORTHONORMAL_TOL) {
            return Err(Error::NotOrthonormal {
                residual: (norm - 1.0).abs(),
            });
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let group = givens::angles_from_row(&x)?;
        for rot in group_rotations(n, d, r, &group).iter().rev() {
            right_apply_rows(&rot.inverse(), &mut m, r + 1);
        }
        thetas[r * d..(r + 1) * d].copy_from_slice(&group);
    }
    AngleVector::new(n, d, thetas)
}

/// Precomputed rotations for repeated matrix-free state advances.
#[derive(Debug, Clone)]
pub struct HinOperator {
    n: usize,
    d: usize,
    rotations: Vec<GivensRotation>,
}

impl HinOperator {
    pub fn new(angles: &AngleVector) -> Self {
        Self {
            n: angles.n,
            d: angles.d,
            rotations: angles.rotations(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn stacked(&self, z: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.n || eps.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "state length {} (expected {}), input length {} (expected {})",
                z.len(),
                self.n,
                eps.len(),
                self.d
            )));
        }
        let mut w = Vec::with_capacity(self.n + self.d);
        w.extend_from_slice(eps);
        w.extend_from_slice(z);
        Ok(w)
    }

    /// `A·z + B·ε` without forming `A` or `B`; exactly `4·n·d` multiplications.
    pub fn advance(&self, z: &[f64], eps: &[f64], counter: &mut OpCounter) -> Result<Vec<f64>> {
        let mut w = self.stacked(z, eps)?;
        for rot in self.rotations.iter().rev() {
            rot.apply_left(&mut w, counter);
        }
        Ok(w.split_off(self.d))
    }

    /// `∂/∂θ_k (A·z + B·ε)` for the zero-based angle index `k`.
    pub fn advance_grad(
        &self,
        z: &[f64],
        eps: &[f64],
        k: usize,
        counter: &mut OpCounter,
    ) -> Result<Vec<f64>> {
        if k >= self.rotations.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.rotations.len(),
            });
        }
        let mut w = self.stacked(z, eps)?;
        for (idx, rot) in self.rotations.iter().enumerate().rev() {
            if idx == k {
                rot.apply_left_derivative(&mut w, counter);
            } else {
                rot.apply_left(&mut w, counter);
            }
        }
        Ok(w.split_off(self.d))
    }
}

pub fn state_advance(
    angles: &AngleVector,
    z: &[f64],
    eps: &[f64],
    counter: &mut OpCounter,
) -> Result<Vec<f64>> {
    HinOperator::new(angles).advance(z, eps, counter)
}

pub fn state_advance_dense(pair: &HinPair, z: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    pair.as_input_pair().advance_dense(z, eps)
}

/// Derivative of [`state_advance`] with respect to angle `k` (zero-based).
pub fn state_advance_grad(
    angles: &AngleVector,
    z: &[f64],
    eps: &[f64],
    k: usize,
    counter: &mut OpCounter,
) -> Result<Vec<f64>> {
    HinOperator::new(angles).advance_grad(z, eps, k, counter)
}

/// Split off the leading identity block of `(B|A) = I_m ⊕ Q̂`.
///
/// Returns `m` and the trailing `(n−m)×(n+d−m)` row-orthonormal block as an
/// input pair with `d` inputs, or `None` when the identity block covers all rows.
pub fn split_degenerate(pair: &HinPair, zero_tol: f64) -> (usize, Option<InputPair>) {
    let (n, d) = (pair.n(), pair.d());
    let m = pair.concat();
    let width = n + d;
    let mut k = 0;
    while k < n {
        let unit = (m[(k, k)] - 1.0).abs() <= zero_tol;
        let row_clean = (0..width).all(|j| j == k || m[(k, j)].abs() <= zero_tol);
        let col_clean = (0..n).all(|i| i == k || m[(i, k)].abs() <= zero_tol);
        if !(unit && row_clean && col_clean) {
            break;
        }
        k += 1;
    }
    if k == n {
        return (k, None);
    }
    let tail = m.block(k..n, k..width);
    let pair = InputPair::from_concat(&tail, d).expect("tail keeps d input columns");
    (k, Some(pair))
}

/// `‖M·Mᵀ − I‖_F` for the concatenation of a pair.
pub fn row_orthonormality_residual(pair: &HinPair) -> f64 {
    frobenius_distance(&pair.concat().gram_rows(), &Matrix::identity(pair.n())).expect("square")
}
