//! Givens rotations and the single-row angle parameterization.
//!
//! A rotation `G(i, j, θ)` embeds `g_ii = g_jj = cos θ`, `g_ij = sin θ`,
//! `g_ji = −sin θ` into the identity.
//!
//! A row group is a unit vector of length `d + 1` laid out in *slot order*
//! `(p, o_1, …, o_{d−1}, t)`: `p` is the pivot (the component that must be
//! nonnegative for a standard pair), `o_k` are the free components and `t`
//! is the target the row collapses onto when it is peeled. Starting from
//! `e_t`, the first rotation acts in the plane `(t, p)` and the remaining
//! `d − 1` rotations all act in the planes `(p, o_k)`, so
//!
//! ```text
//! t   = cos θ₁
//! o_k = sin θ₁ · cos θ₂ ⋯ cos θ_k · sin θ_{k+1}
//! p   = sin θ₁ · cos θ₂ ⋯ cos θ_d
//! ```
//!
//! With `θ₁ ∈ [0, π]` and `θ_k ∈ (−π/2, π/2]` the pivot is nonnegative, and
//! the angles are uniquely determined exactly when `p > 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Components whose magnitude is at most this fraction of the row norm are
/// treated as exact zeros when extracting angles.
pub const VANISHING_TOL: f64 = 1e-13;

/// A pivot below `-PIVOT_SIGN_TOL` is rejected rather than clamped to zero.
pub const PIVOT_SIGN_TOL: f64 = 1e-10;

/// Multiplication and addition counts accumulated by the rotation kernels.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub mults: u64,
    pub adds: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Which side of the vector the rotation multiplies from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `G · v` (column vector).
    Left,
    /// `v · G` (row vector).
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensRotation {
    i: usize,
    j: usize,
    theta: f64,
    c: f64,
    s: f64,
}

impl GivensRotation {
    /// Panics if `i == j`.
    pub fn new(i: usize, j: usize, theta: f64) -> Self {
        assert_ne!(i, j, "rotation plane needs two distinct coordinates");
        let (s, c) = theta.sin_cos();
        Self { i, j, theta, c, s }
    }

    /// The rotation with `G·v` mapping `(v_i, v_j) = (a, b)` to `(hypot(a, b), 0)`.
    pub fn zeroing(i: usize, j: usize, a: f64, b: f64) -> Self {
        assert_ne!(i, j, "rotation plane needs two distinct coordinates");
        let r = a.hypot(b);
        if r == 0.0 {
            return Self::new(i, j, 0.0);
        }
        Self {
            i,
            j,
            theta: b.atan2(a),
            c: a / r,
            s: b / r,
        }
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn cos(&self) -> f64 {
        self.c
    }

    pub fn sin(&self) -> f64 {
        self.s
    }

    pub fn inverse(&self) -> Self {
        Self {
            theta: -self.theta,
            s: -self.s,
            ..*self
        }
    }

    /// Dense `dim × dim` embedding.
    pub fn to_matrix(&self, dim: usize) -> Matrix {
        let mut g = Matrix::identity(dim);
        g[(self.i, self.i)] = self.c;
        g[(self.j, self.j)] = self.c;
        g[(self.i, self.j)] = self.s;
        g[(self.j, self.i)] = -self.s;
        g
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let top = self.i.max(self.j);
        if top >= len {
            return Err(Error::IndexOutOfRange { index: top, len });
        }
        Ok(())
    }

    /// In-place `v ← G·v`; four multiplications, two additions.
    #[inline]
    pub fn apply_left(&self, v: &mut [f64], counter: &mut OpCounter) {
        let (a, b) = (v[self.i], v[self.j]);
        v[self.i] = self.c * a + self.s * b;
        v[self.j] = self.c * b - self.s * a;
        counter.mults += 4;
        counter.adds += 2;
    }

    /// In-place `v ← v·G`; four multiplications, two additions.
    #[inline]
    pub fn apply_right(&self, v: &mut [f64], counter: &mut OpCounter) {
        let (a, b) = (v[self.i], v[self.j]);
        v[self.i] = self.c * a - self.s * b;
        v[self.j] = self.s * a + self.c * b;
        counter.mults += 4;
        counter.adds += 2;
    }

    /// In-place `v ← (dG/dθ)·v`. The derivative vanishes outside the plane.
    #[inline]
    pub fn apply_left_derivative(&self, v: &mut [f64], counter: &mut OpCounter) {
        let (a, b) = (v[self.i], v[self.j]);
        v.iter_mut().for_each(|x| *x = 0.0);
        v[self.i] = self.c * b - self.s * a;
        v[self.j] = -self.c * a - self.s * b;
        counter.mults += 4;
        counter.adds += 2;
    }

    /// `M ← M·G` (column rotation of every row).
    pub fn apply_right_to_rows(&self, m: &mut Matrix) {
        let mut scratch = OpCounter::new();
        for r in 0..m.rows() {
            self.apply_right(m.row_mut(r), &mut scratch);
        }
    }

    /// `M ← G·M` (row rotation).
    pub fn apply_left_to_cols(&self, m: &mut Matrix) {
        for col in 0..m.cols() {
            let (a, b) = (m[(self.i, col)], m[(self.j, col)]);
            m[(self.i, col)] = self.c * a + self.s * b;
            m[(self.j, col)] = self.c * b - self.s * a;
        }
    }
}

/// Apply `rot` to a copy of `v`, counting the work in `counter`.
pub fn apply_plane_rotation(
    v: &[f64],
    rot: &GivensRotation,
    side: Side,
    counter: &mut OpCounter,
) -> Result<Vec<f64>> {
    rot.check_len(v.len())?;
    let mut out = v.to_vec();
    match side {
        Side::Left => rot.apply_left(&mut out, counter),
        Side::Right => rot.apply_right(&mut out, counter),
    }
    Ok(out)
}

/// Slot index of the pivot within a row group.
pub const PIVOT_SLOT: usize = 0;

/// Slot index of the target within a row group of `d` angles.
pub fn target_slot(d: usize) -> usize {
    d
}

/// The `d` rotations of one row group, in slot coordinates and in the order
/// they are right-applied to `e_t`.
pub fn row_rotations(thetas: &[f64]) -> Vec<GivensRotation> {
    let d = thetas.len();
    thetas
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            if k == 0 {
                GivensRotation::new(target_slot(d), PIVOT_SLOT, theta)
            } else {
                GivensRotation::new(PIVOT_SLOT, k, theta)
            }
        })
        .collect()
}

/// Unit vector of length `d + 1` (slot order) parameterized by `d` angles.
pub fn row_from_angles(thetas: &[f64]) -> Vec<f64> {
    let d = thetas.len();
    let mut x = vec![0.0; d + 1];
    x[target_slot(d)] = 1.0;
    let mut scratch = OpCounter::new();
    for rot in row_rotations(thetas) {
        rot.apply_right(&mut x, &mut scratch);
    }
    x
}

/// Recover the canonical angles of a unit row in slot order.
///
/// When the mass below some level vanishes, the remaining angles are set to
/// zero. On the null set where the pivot is zero and the remaining mass sits
/// negatively on a single free component the angle `−π/2` is returned, since
/// no angle in `(−π/2, π/2]` reaches that row.
pub fn angles_from_row(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "row of length {} has no angles",
            x.len()
        )));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitNorm { norm });
    }
    let d = x.len() - 1;
    let pivot = x[PIVOT_SLOT];
    if pivot < -PIVOT_SIGN_TOL {
        return Err(Error::NegativePivot { value: pivot });
    }
    let tiny = VANISHING_TOL * norm;
    let clean = |v: f64| if v.abs() <= tiny { 0.0 } else { v };

    // suffix[k] = ‖(p, x_k, …, x_{d−1})‖ for k in 1..=d.
    let mut suffix = vec![0.0; d + 1];
    suffix[d] = clean(pivot.max(0.0));
    for k in (1..d).rev() {
        suffix[k] = suffix[k + 1].hypot(clean(x[k]));
    }

    let mut thetas = vec![0.0; d];
    if suffix[1] <= tiny {
        thetas[0] = if x[target_slot(d)] < 0.0 { PI } else { 0.0 };
        return Ok(thetas);
    }
    thetas[0] = suffix[1].atan2(clean(x[target_slot(d)]));
    for k in 2..=d {
        let o = clean(x[k - 1]);
        let rest = suffix[k];
        if o.hypot(rest) <= tiny {
            break;
        }
        thetas[k - 1] = o.atan2(rest);
    }
    Ok(thetas)
}

/// Angle bounds: the first slot of each row group lies in `[0, π]`, the rest
/// in `(−π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleDomain {
    pub n: usize,
    pub d: usize,
}

impl AngleDomain {
    pub fn new(n: usize, d: usize) -> Self {
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `true` for the `[0, π]` slots.
    pub fn is_group_leader(&self, slot: usize) -> bool {
        slot.is_multiple_of(self.d)
    }

    pub fn slot_contains(&self, slot: usize, theta: f64) -> bool {
        if self.is_group_leader(slot) {
            (0.0..=PI).contains(&theta)
        } else {
            theta > -FRAC_PI_2 && theta <= FRAC_PI_2
        }
    }

    pub fn contains(&self, thetas: &[f64]) -> bool {
        thetas.len() == self.len()
            && thetas
                .iter()
                .enumerate()
                .all(|(slot, &t)| self.slot_contains(slot, t))
    }
}

/// Map arbitrary angles to the canonical in-domain angles of the standard
/// representative of their pair.
///
/// Angles whose pair is already standard come back unchanged up to
/// roundoff; otherwise the pair is first normalized by a signature
/// similarity. Idempotent.
pub fn canonicalize(thetas: &[f64], n: usize, d: usize) -> Result<Vec<f64>> {
    let angles = crate::hin::AngleVector::new(n, d, thetas.to_vec())?;
    let pair = crate::hin::angles_to_hin(&angles);
    let (standard, _) = crate::transform::standardize_signs(pair.as_input_pair());
    let standard = crate::hin::HinPair::new(standard.a, standard.b)?;
    Ok(crate::hin::hin_to_angles(&standard)?.into_thetas())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_angle_is_identity() {
        let v = [0.3, -1.2, 4.0];
        let rot = GivensRotation::new(0, 2, 0.0);
        let mut counter = OpCounter::new();
        for side in [Side::Left, Side::Right] {
            assert_eq!(
                apply_plane_rotation(&v, &rot, side, &mut counter).unwrap(),
                v
            );
        }
        assert_eq!(counter, OpCounter { mults: 8, adds: 4 });
    }

    #[test]
    fn quarter_turn_left() {
        let rot = GivensRotation::new(0, 1, FRAC_PI_2);
        let out =
            apply_plane_rotation(&[1.0, 0.0], &rot, Side::Left, &mut OpCounter::new()).unwrap();
        // G·e₁ is the first column of G: (c, −s).
        assert!(out[0].abs() < 1e-16);
        assert_eq!(out[1], -1.0);
    }

    #[test]
    fn rotation_matches_dense_embedding() {
        let rot = GivensRotation::new(3, 1, 0.7);
        let g = rot.to_matrix(4);
        let v = [0.5, -1.0, 2.0, 0.25];
        let left = apply_plane_rotation(&v, &rot, Side::Left, &mut OpCounter::new()).unwrap();
        let dense = g.matvec(&v).unwrap();
        for (a, b) in left.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-15);
        }
        let right = apply_plane_rotation(&v, &rot, Side::Right, &mut OpCounter::new()).unwrap();
        let dense = g.transpose().matvec(&v).unwrap();
        for (a, b) in right.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_plane() {
        let rot = GivensRotation::new(0, 3, 1.0);
        assert!(matches!(
            apply_plane_rotation(&[1.0, 2.0], &rot, Side::Left, &mut OpCounter::new()),
            Err(Error::IndexOutOfRange { index: 3, len: 2 })
        ));
    }

    #[test]
    fn zeroing_rotation() {
        let rot = GivensRotation::zeroing(1, 2, -3.0, 4.0);
        let out = apply_plane_rotation(&[9.0, -3.0, 4.0], &rot, Side::Left, &mut OpCounter::new())
            .unwrap();
        assert_eq!(out[0], 9.0);
        assert!((out[1] - 5.0).abs() < 1e-15);
        assert!(out[2].abs() < 1e-15);
        assert!((rot.cos().powi(2) + rot.sin().powi(2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let theta = 0.4;
        let v = [0.2, 1.0, -0.7];
        let mut dv = v;
        GivensRotation::new(2, 0, theta).apply_left_derivative(&mut dv, &mut OpCounter::new());
        let h = 1e-6;
        let mut plus = v;
        let mut minus = v;
        GivensRotation::new(2, 0, theta + h).apply_left(&mut plus, &mut OpCounter::new());
        GivensRotation::new(2, 0, theta - h).apply_left(&mut minus, &mut OpCounter::new());
        for k in 0..3 {
            let fd = (plus[k] - minus[k]) / (2.0 * h);
            assert!((fd - dv[k]).abs() < 1e-9, "component {k}");
        }
    }

    #[test]
    fn row_d1_identity_angle() {
        assert_eq!(row_from_angles(&[0.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn row_d2_against_dense_product() {
        // e_t · G(t,p,π/2) · G(p,o₁,π/2) with explicit 3×3 matrices.
        let thetas = [FRAC_PI_2, FRAC_PI_2];
        let g1 = GivensRotation::new(2, 0, thetas[0]).to_matrix(3);
        let g2 = GivensRotation::new(0, 1, thetas[1]).to_matrix(3);
        let e = Matrix::from_rows(&[[0.0, 0.0, 1.0]]);
        let dense = &(&e * &g1) * &g2;
        let x = row_from_angles(&thetas);
        for k in 0..3 {
            assert!((x[k] - dense[(0, k)]).abs() < 1e-15);
        }
        // All mass lands on o₁.
        assert!((x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn row_is_unit() {
        let x = row_from_angles(&[2.1, -0.3, 1.4, 0.05]);
        assert!((norm(&x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_row_gives_zero_angles() {
        assert_eq!(
            angles_from_row(&[0.0, 0.0, 0.0, 1.0]).unwrap(),
            vec![0.0; 3]
        );
        // All mass on the target with the opposite sign.
        assert_eq!(angles_from_row(&[0.0, 0.0, -1.0]).unwrap(), vec![PI, 0.0]);
    }

    #[test]
    fn d1_pure_pivot_row() {
        let th = angles_from_row(&[1.0, 0.0]).unwrap();
        assert!((th[0] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_unit_and_negative_pivot() {
        assert!(matches!(
            angles_from_row(&[0.5, 0.5]),
            Err(Error::NotUnitNorm { .. })
        ));
        assert!(matches!(
            angles_from_row(&[-0.6, 0.8]),
            Err(Error::NegativePivot { .. })
        ));
    }

    #[test]
    fn reduced_row_boundary() {
        // Pivot zero, free component carries all remaining mass negatively.
        let s = 0.5f64.sqrt();
        let th = angles_from_row(&[0.0, -s, s]).unwrap();
        assert!((th[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(th[1], -FRAC_PI_2);
        let back = row_from_angles(&th);
        assert!((back[1] + s).abs() < 1e-15 && back[0].abs() < 1e-15);
    }

    #[test]
    fn domain_bounds() {
        let dom = AngleDomain::new(2, 2);
        assert!(dom.contains(&[0.0, FRAC_PI_2, PI, 0.0]));
        assert!(!dom.contains(&[0.0, -FRAC_PI_2, PI, 0.0]));
        assert!(!dom.contains(&[-0.1, 0.0, 0.0, 0.0]));
        assert!(!dom.contains(&[0.0; 3]));
    }
}
