use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A state-space input pair: advance matrix `a` (n×n) and control matrix `b` (n×d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPair {
    pub a: Matrix,
    pub b: Matrix,
}

impl InputPair {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() || a.rows() != b.rows() || a.rows() == 0 || b.cols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument("pair has non-finite entries".into()));
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.b.cols()
    }

    /// The concatenation `(B | A)`, an n×(n+d) matrix.
    pub fn concat(&self) -> Matrix {
        self.b.hcat(&self.a).expect("pair rows agree")
    }

    /// Split an n×(n+d) matrix `(B | A)` back into a pair.
    pub fn from_concat(m: &Matrix, d: usize) -> Result<Self> {
        let n = m.rows();
        if m.cols() != n + d {
            return Err(Error::DimensionMismatch(format!(
                "(B|A) is {}x{}, expected {}x{}",
                n,
                m.cols(),
                n,
                n + d
            )));
        }
        Self::new(m.block(0..n, d..n + d), m.block(0..n, 0..d))
    }

    /// ‖A·Aᵀ + B·Bᵀ − I‖_F.
    pub fn input_normal_residual(&self) -> f64 {
        let g = self.concat().gram_rows();
        crate::linalg::frobenius_distance(&g, &Matrix::identity(self.n())).expect("square gram")
    }

    /// `A·z + B·ε` by dense multiplication.
    pub fn advance_dense(&self, z: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
        let az = self.a.matvec(z)?;
        let be = self.b.matvec(eps)?;
        Ok(az.iter().zip(&be).map(|(x, y)| x + y).collect())
    }

    /// Similarity `(T⁻¹·A·T, T⁻¹·B)` given `T` and `T⁻¹`.
    pub fn similarity(&self, t: &Matrix, t_inv: &Matrix) -> Result<Self> {
        let a = t_inv.matmul(&self.a)?.matmul(t)?;
        let b = t_inv.matmul(&self.b)?;
        Self::new(a, b)
    }
}
