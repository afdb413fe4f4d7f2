//! Dense real-matrix kernels.
//!
//! `Matrix` is a small row-major container with just the operations the
//! realization pipeline needs: products, Frobenius norms, Cholesky and
//! triangular solves, and the trace-of-powers similarity fingerprint.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold shared by Cholesky and triangular solves.
pub const PIVOT_TOL: f64 = 1e-12;

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from row-major data, rejecting wrong lengths and non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::DimensionMismatch(format!("{rows}x{cols} overflows")))?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} entries for {rows}x{cols}, got {}",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested rows. Panics on ragged input; intended for literals.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.as_ref().len(), c, "ragged rows");
            data.extend_from_slice(row.as_ref());
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Column vector.
    pub fn column_vector(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Nested row representation.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · v` for a plain vector.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, vector has length {}",
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self · selfᵀ`.
    pub fn gram_rows(&self) -> Matrix {
        let mut g = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Matrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        self.check_same_shape(rhs)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn check_same_shape(&self, rhs: &Matrix) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrize(&self) -> Matrix {
        assert!(self.is_square(), "symmetrize requires a square matrix");
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// Copy of the block `rows × cols` (half-open ranges).
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Matrix {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (oi, i) in rows.clone().enumerate() {
            for (oj, j) in cols.clone().enumerate() {
                out[(oi, oj)] = self[(i, j)];
            }
        }
        out
    }

    /// Horizontal concatenation `(self | rhs)`.
    pub fn hcat(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "hcat of {} rows with {} rows",
                self.rows, rhs.rows
            )));
        }
        let mut out = Self::zeros(self.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            let row = out.row_mut(i);
            row[..self.cols].copy_from_slice(self.row(i));
            row[self.cols..].copy_from_slice(rhs.row(i));
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Panics on a dimension mismatch; use [`Matrix::matmul`] for the checked form.
impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product dimensions")
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(i) {
                write!(f, "{v:>12.6e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// ‖a − b‖_F.
pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Lower Cholesky factor `L` with positive diagonal and `L·Lᵀ = P`.
///
/// A pivot at or below `1e-12 · max(1, ‖P‖_F)` is reported as
/// [`Error::NotPositiveDefinite`].
pub fn cholesky_lower(p: &Matrix) -> Result<Matrix> {
    if !p.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky of {}x{}",
            p.rows, p.cols
        )));
    }
    let scale = p.frobenius_norm().max(1.0);
    let asym = frobenius_distance(p, &p.transpose())?;
    if asym > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!(
            "cholesky input not symmetric (asymmetry {asym:e})"
        )));
    }
    let n = p.rows;
    let tol = PIVOT_TOL * scale;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = p[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > tol) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut v = p[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

fn check_triangular_solve(l: &Matrix, rhs: &Matrix) -> Result<()> {
    if !l.is_square() || l.rows != rhs.rows {
        return Err(Error::DimensionMismatch(format!(
            "triangular solve with {}x{} and rhs {}x{}",
            l.rows, l.cols, rhs.rows, rhs.cols
        )));
    }
    let tol = PIVOT_TOL * l.frobenius_norm().max(1.0);
    for i in 0..l.rows {
        if l[(i, i)].abs() <= tol {
            return Err(Error::SingularTriangular {
                index: i,
                value: l[(i, i)],
            });
        }
    }
    Ok(())
}

/// Solve `L·X = RHS` by forward substitution. Only the lower triangle of `l` is read.
pub fn solve_lower_triangular(l: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    check_triangular_solve(l, rhs)?;
    let n = l.rows;
    let mut x = rhs.clone();
    for c in 0..rhs.cols {
        for i in 0..n {
            let mut v = x[(i, c)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    Ok(x)
}

/// Solve `Lᵀ·X = RHS` by back substitution. Only the lower triangle of `l` is read.
pub fn solve_lower_transposed(l: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    check_triangular_solve(l, rhs)?;
    let n = l.rows;
    let mut x = rhs.clone();
    for c in 0..rhs.cols {
        for i in (0..n).rev() {
            let mut v = x[(i, c)];
            for k in i + 1..n {
                v -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    Ok(x)
}

/// Upper-triangular `R` (`cols × cols`, nonnegative diagonal) with
/// `Rᵀ·R = Mᵀ·M`, by Householder reflections. Rows beyond `m.rows()` are
/// zero when `m` is wide.
pub fn qr_r_factor(m: &Matrix) -> Matrix {
    let (rows, cols) = (m.rows, m.cols);
    let mut w = m.clone();
    let steps = rows.min(cols);
    for k in 0..steps {
        let norm = (k..rows).map(|i| w[(i, k)] * w[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if w[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| w[(i, k)]).collect();
        v[0] -= alpha;
        let vv = v.iter().map(|x| x * x).sum::<f64>();
        if vv == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot = v
                .iter()
                .zip(k..rows)
                .map(|(vi, i)| vi * w[(i, j)])
                .sum::<f64>();
            let f = 2.0 * dot / vv;
            for (vi, i) in v.iter().zip(k..rows) {
                w[(i, j)] -= f * vi;
            }
        }
    }
    let mut r = Matrix::zeros(cols, cols);
    for i in 0..steps {
        let sign = if w[(i, i)] < 0.0 { -1.0 } else { 1.0 };
        for j in i..cols {
            r[(i, j)] = sign * w[(i, j)];
        }
    }
    r
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
///
/// A pivot at or below `1e-12 · max(1, ‖A‖_F)` reports
/// [`Error::SingularTriangular`] at the eliminated column.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "inverse of {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let tol = PIVOT_TOL * a.frobenius_norm().max(1.0);
    let mut work = a.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| work[(i, col)].abs().total_cmp(&work[(j, col)].abs()))
            .expect("non-empty range");
        let pivot = work[(pivot_row, col)];
        if pivot.abs() <= tol {
            return Err(Error::SingularTriangular {
                index: col,
                value: pivot,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                work.data.swap(pivot_row * n + j, col * n + j);
                inv.data.swap(pivot_row * n + j, col * n + j);
            }
        }
        for j in 0..n {
            work[(col, j)] /= pivot;
            inv[(col, j)] /= pivot;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = work[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                work[(i, j)] -= f * work[(col, j)];
                inv[(i, j)] -= f * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

/// `[tr(A), tr(A²), …, tr(A^kmax)]`.
pub fn trace_powers(a: &Matrix, kmax: usize) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "trace_powers of {}x{}",
            a.rows, a.cols
        )));
    }
    let trace = |m: &Matrix| (0..m.rows).map(|i| m[(i, i)]).sum::<f64>();
    let mut out = Vec::with_capacity(kmax);
    let mut power = a.clone();
    for k in 0..kmax {
        if k > 0 {
            power = &power * a;
        }
        out.push(trace(&power));
    }
    Ok(out)
}

/// Largest `|t_k − u_k| / (1 + |t_k|)` over two trace-power fingerprints.
pub fn trace_drift(reference: &[f64], other: &[f64]) -> f64 {
    reference
        .iter()
        .zip(other)
        .map(|(t, u)| (t - u).abs() / (1.0 + t.abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_identity() {
        let l = cholesky_lower(&Matrix::identity(3)).unwrap();
        assert_eq!(l, Matrix::identity(3));
    }

    #[test]
    fn cholesky_two_by_two() {
        let p = Matrix::from_rows(&[[4.0, 2.0], [2.0, 5.0]]);
        let l = cholesky_lower(&p).unwrap();
        assert_eq!(l, Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]));
        assert!(
            frobenius_distance(&(&l * &l.transpose()), &p).unwrap() <= 1e-12 * p.frobenius_norm()
        );
    }

    #[test]
    fn cholesky_rejects_cauchy_schwarz_violation() {
        let off = 1.0 + 1e-8;
        let p = Matrix::from_rows(&[[1.0, off], [off, 1.0]]);
        assert!(matches!(
            cholesky_lower(&p),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn cholesky_rejects_non_square() {
        assert!(matches!(
            cholesky_lower(&Matrix::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn forward_substitution() {
        let m = Matrix::from_rows(&[[1.0, -2.0], [3.5, 0.25]]);
        assert_eq!(solve_lower_triangular(&Matrix::identity(2), &m).unwrap(), m);

        let l = Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]);
        let rhs = Matrix::from_rows(&[[2.0], [3.0]]);
        let x = solve_lower_triangular(&l, &rhs).unwrap();
        assert_eq!(x, Matrix::from_rows(&[[1.0], [1.0]]));
    }

    #[test]
    fn transposed_substitution() {
        let l = Matrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]);
        let rhs = Matrix::from_rows(&[[3.0], [2.0]]);
        let x = solve_lower_transposed(&l, &rhs).unwrap();
        let back = &l.transpose() * &x;
        assert!(frobenius_distance(&back, &rhs).unwrap() < 1e-15);
    }

    #[test]
    fn zero_pivot_is_singular() {
        let l = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        let rhs = Matrix::from_rows(&[[1.0], [1.0]]);
        assert!(matches!(
            solve_lower_triangular(&l, &rhs),
            Err(Error::SingularTriangular { index: 1, .. })
        ));
    }

    #[test]
    fn inverse_round_trip() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, -1.0]]);
        let inv = inverse(&a).unwrap();
        assert!(frobenius_distance(&(&a * &inv), &Matrix::identity(3)).unwrap() < 1e-14);
        let singular = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(inverse(&singular).is_err());
    }

    #[test]
    fn trace_powers_small_cases() {
        assert_eq!(trace_powers(&Matrix::zeros(3, 3), 4).unwrap(), vec![0.0; 4]);
        assert_eq!(trace_powers(&Matrix::identity(2), 3).unwrap(), vec![2.0; 3]);
        let nil = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]]);
        assert_eq!(trace_powers(&nil, 2).unwrap(), vec![0.0, 0.0]);
        assert!(trace_powers(&Matrix::zeros(2, 3), 1).is_err());
    }

    #[test]
    fn frobenius_distance_cases() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(frobenius_distance(&m, &m).unwrap(), 0.0);
        let d = frobenius_distance(&Matrix::identity(2), &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(d, 2f64.sqrt());
        let d =
            frobenius_distance(&Matrix::from_rows(&[[3.0]]), &Matrix::from_rows(&[[0.0]])).unwrap();
        assert_eq!(d, 3.0);
        assert!(frobenius_distance(&m, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(matches!(
            Matrix::from_row_major(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(Matrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_row_major(usize::MAX, 2, vec![]).is_err());
    }

    #[test]
    fn qr_r_factor_reproduces_gram() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, -4.0], [0.5, 0.0]]);
        let r = qr_r_factor(&m);
        let mtm = &m.transpose() * &m;
        assert!(frobenius_distance(&(&r.transpose() * &r), &mtm).unwrap() < 1e-13);
        assert_eq!(r[(1, 0)], 0.0);
        assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
        // Wide input: R is padded with zero rows.
        let wide = Matrix::from_rows(&[[2.0, 0.0, 1.0]]);
        let r = qr_r_factor(&wide);
        assert_eq!((r.rows(), r.cols()), (3, 3));
        assert!((r[(0, 0)] - 2.0).abs() < 1e-15 && r[(1, 1)] == 0.0 && r[(2, 2)] == 0.0);
    }
}
