//! Conversion of a stable controllable pair to a standard HIN pair:
//! Stein Grammian, input-normal balancing, Givens Hessenberg reduction and
//! signature normalization.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::givens::{GivensRotation, OpCounter};
use crate::hin::HinPair;
use crate::linalg::{
    cholesky_lower, frobenius_distance, qr_r_factor, solve_lower_triangular, trace_drift,
    trace_powers, Matrix,
};
pub use crate::pair::InputPair;

pub const DEFAULT_STEIN_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_DOUBLINGS: usize = 60;

/// Input-normality tolerance accepted on pipeline output.
pub const PIPELINE_NORMAL_TOL: f64 = 1e-8;

/// Extra balancing passes on the balanced pair, and the input-normal
/// residual at which they stop.
const MAX_REFINEMENTS: usize = 2;
const REFINE_TARGET: f64 = 1e-13;

/// A Grammian factor diagonal at or below this fraction of `‖L‖_F` marks the
/// pair as uncontrollable.
pub const FACTOR_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageDiagnostic {
    pub stage: String,
    pub residual: f64,
}

/// Accumulated similarity `T` (pair ↦ `(T⁻¹AT, T⁻¹B)`) and per-stage residuals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformRecord {
    pub t_total: Matrix,
    pub stages: Vec<StageDiagnostic>,
}

impl TransformRecord {
    fn single(t: Matrix, stage: &str, residual: f64) -> Self {
        Self {
            t_total: t,
            stages: vec![StageDiagnostic {
                stage: stage.into(),
                residual,
            }],
        }
    }

    /// Compose `self` followed by `next`.
    fn then(mut self, next: TransformRecord) -> Self {
        self.t_total = &self.t_total * &next.t_total;
        self.stages.extend(next.stages);
        self
    }

    pub fn residual(&self, stage: &str) -> Option<f64> {
        self.stages
            .iter()
            .find(|s| s.stage == stage)
            .map(|s| s.residual)
    }
}

/// Solution of `P − A·P·Aᵀ = B·Bᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinSolution {
    pub p: Matrix,
    /// `‖P − A·P·Aᵀ − B·Bᵀ‖_F / max(1, ‖P‖_F)`.
    pub residual: f64,
    pub doublings: usize,
}

pub fn stein_residual(pair: &InputPair, p: &Matrix) -> f64 {
    let apa = &(&pair.a * p) * &pair.a.transpose();
    let bb = pair.b.gram_rows();
    let lhs = p.sub(&apa).expect("square");
    frobenius_distance(&lhs, &bb).expect("square") / p.frobenius_norm().max(1.0)
}

/// Controllability Grammian by the doubling iteration
/// `P ← P + A_k·P·A_kᵀ`, `A_k ← A_k²`, starting from `P = B·Bᵀ`.
///
/// Stops once the increment drops to `tol · max(1, ‖P‖_F)`. A divergent or
/// non-settling iteration (spectral radius ≥ 1) reports [`Error::NotConverged`].
pub fn solve_stein(pair: &InputPair, tol: f64, max_doublings: usize) -> Result<SteinSolution> {
    let mut p = pair.b.gram_rows();
    let mut ak = pair.a.clone();
    let mut last = f64::INFINITY;
    for k in 1..=max_doublings {
        let inc = &(&ak * &p) * &ak.transpose();
        p = p.add(&inc)?;
        if !p.is_finite() {
            return Err(Error::NotConverged {
                doublings: k,
                residual: last,
            });
        }
        let scale = p.frobenius_norm().max(1.0);
        last = inc.frobenius_norm() / scale;
        if last <= tol {
            let p = p.symmetrize();
            return Ok(SteinSolution {
                residual: stein_residual(pair, &p),
                p,
                doublings: k,
            });
        }
        ak = &ak * &ak;
        if !ak.is_finite() {
            return Err(Error::NotConverged {
                doublings: k,
                residual: last,
            });
        }
    }
    Err(Error::NotConverged {
        doublings: max_doublings,
        residual: last,
    })
}

/// Lower-triangular factor `L` of the controllability Grammian, `P = L·Lᵀ`,
/// from the square-root form of the doubling iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinFactor {
    pub l: Matrix,
    /// Last relative increment `‖A_k·S‖_F² / max(1, ‖S‖_F²)`.
    pub increment: f64,
    pub doublings: usize,
}

impl SteinFactor {
    pub fn grammian(&self) -> Matrix {
        self.l.gram_rows()
    }
}

fn compress(s: &Matrix, n: usize) -> Matrix {
    if s.cols() <= n {
        return s.clone();
    }
    qr_r_factor(&s.transpose()).transpose()
}

/// The doubling iteration carried on a factor: `S ← [S | A_k·S]`, compressed
/// back to `n` columns by QR, so that `S·Sᵀ` follows `P ← P + A_k·P·A_kᵀ`.
///
/// Working with `S` instead of `P` keeps the error in the balanced pair
/// proportional to `cond(L) = √cond(P)` rather than `cond(P)`. Same stopping
/// rule and failure modes as [`solve_stein`].
pub fn solve_stein_factor(pair: &InputPair, tol: f64, max_doublings: usize) -> Result<SteinFactor> {
    let n = pair.n();
    let mut s = compress(&pair.b, n);
    let mut ak = pair.a.clone();
    let mut last = f64::INFINITY;
    for k in 1..=max_doublings {
        let grown = &ak * &s;
        let inc = grown.frobenius_norm().powi(2);
        s = compress(&s.hcat(&grown)?, n);
        if !s.is_finite() {
            return Err(Error::NotConverged {
                doublings: k,
                residual: last,
            });
        }
        last = inc / s.frobenius_norm().powi(2).max(1.0);
        if last <= tol {
            return Ok(SteinFactor {
                l: qr_r_factor(&s.transpose()).transpose(),
                increment: last,
                doublings: k,
            });
        }
        ak = &ak * &ak;
        if !ak.is_finite() {
            return Err(Error::NotConverged {
                doublings: k,
                residual: last,
            });
        }
    }
    Err(Error::NotConverged {
        doublings: max_doublings,
        residual: last,
    })
}

/// Similarity `T = L` by a lower-triangular Grammian factor: returns
/// `(L⁻¹·A·L, L⁻¹·B)`, whose Grammian is `L⁻¹·P·L⁻ᵀ = I`.
pub fn balance_with_factor(pair: &InputPair, l: &Matrix) -> Result<(InputPair, TransformRecord)> {
    if l.rows() != pair.n() || !l.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Grammian factor is {}x{}, pair has n = {}",
            l.rows(),
            l.cols(),
            pair.n()
        )));
    }
    let tol = FACTOR_PIVOT_TOL * l.frobenius_norm();
    for i in 0..l.rows() {
        if !(l[(i, i)] > tol) {
            return Err(Error::NotPositiveDefinite {
                index: i,
                pivot: l[(i, i)] * l[(i, i)],
            });
        }
    }
    let a = &solve_lower_triangular(l, &pair.a)? * l;
    let b = solve_lower_triangular(l, &pair.b)?;
    let out = InputPair::new(a, b)?;
    let residual = out.input_normal_residual();
    Ok((out, TransformRecord::single(l.clone(), "balance", residual)))
}

/// Balance with an explicit Grammian `P`: Cholesky `P = L·Lᵀ`, then
/// [`balance_with_factor`].
pub fn balance_input_normal(pair: &InputPair, p: &Matrix) -> Result<(InputPair, TransformRecord)> {
    if p.rows() != pair.n() || !p.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Grammian is {}x{}, pair has n = {}",
            p.rows(),
            p.cols(),
            pair.n()
        )));
    }
    let l = cholesky_lower(&p.symmetrize())?;
    balance_with_factor(pair, &l)
}

/// Orthogonal reduction to Hessenberg form with Givens rotations.
///
/// Returns `(U·A·Uᵀ, U·B)` with `B`'s first column equal to `β·e₁`, `β ≥ 0`,
/// and `A` upper Hessenberg; the record holds `T = Uᵀ`.
pub fn hessenberg_reduce(pair: &InputPair) -> (InputPair, TransformRecord) {
    let n = pair.n();
    let mut a = pair.a.clone();
    let mut b = pair.b.clone();
    let mut u = Matrix::identity(n);
    let mut scratch = OpCounter::new();

    let mut similarity = |rot: &GivensRotation, a: &mut Matrix, b: &mut Matrix, u: &mut Matrix| {
        rot.apply_left_to_cols(a);
        rot.apply_left_to_cols(b);
        rot.apply_left_to_cols(u);
        // A ← A·Gᵀ: each row transforms like a column vector under G.
        for r in 0..n {
            rot.apply_left(a.row_mut(r), &mut scratch);
        }
    };

    for i in (0..n.saturating_sub(1)).rev() {
        if b[(i + 1, 0)] != 0.0 {
            let rot = GivensRotation::zeroing(i, i + 1, b[(i, 0)], b[(i + 1, 0)]);
            similarity(&rot, &mut a, &mut b, &mut u);
        }
    }
    if b[(0, 0)] < 0.0 {
        for j in 0..b.cols() {
            b[(0, j)] = -b[(0, j)];
        }
        for j in 0..n {
            a[(0, j)] = -a[(0, j)];
            a[(j, 0)] = -a[(j, 0)];
            u[(0, j)] = -u[(0, j)];
        }
    }
    for j in 0..n.saturating_sub(2) {
        for i in (j + 2..n).rev() {
            if a[(i, j)] != 0.0 {
                let rot = GivensRotation::zeroing(i - 1, i, a[(i - 1, j)], a[(i, j)]);
                similarity(&rot, &mut a, &mut b, &mut u);
            }
        }
    }
    for i in 1..n {
        b[(i, 0)] = 0.0;
        for j in 0..i - 1 {
            a[(i, j)] = 0.0;
        }
    }
    let orth = frobenius_distance(&u.gram_rows(), &Matrix::identity(n)).expect("square");
    let out = InputPair { a, b };
    (
        out,
        TransformRecord::single(u.transpose(), "hessenberg", orth),
    )
}

/// Signature similarity `(E·A·E, E·B)` making `B[0,0] ≥ 0` and every
/// subdiagonal entry of `A` nonnegative. A zero subdiagonal leaves the next
/// sign at `+1`. Returns the diagonal of `E`.
pub fn standardize_signs(pair: &InputPair) -> (InputPair, Vec<f64>) {
    let n = pair.n();
    let mut e = vec![1.0; n];
    if pair.b[(0, 0)] < 0.0 {
        e[0] = -1.0;
    }
    for i in 0..n.saturating_sub(1) {
        let sub = pair.a[(i + 1, i)];
        e[i + 1] = if sub == 0.0 {
            1.0
        } else if sub > 0.0 {
            e[i]
        } else {
            -e[i]
        };
    }
    let mut a = pair.a.clone();
    let mut b = pair.b.clone();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= e[i] * e[j];
        }
        for j in 0..b.cols() {
            b[(i, j)] *= e[i];
        }
    }
    (InputPair { a, b }, e)
}

/// Stage of the standardization pipeline, for error attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    Stein,
    Balance,
    Hessenberg,
    Signature,
    Validate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Stein => "stein",
            Stage::Balance => "balance",
            Stage::Hessenberg => "hessenberg",
            Stage::Signature => "signature",
            Stage::Validate => "validate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

fn at(stage: Stage) -> impl FnOnce(Error) -> PipelineError {
    move |source| PipelineError { stage, source }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub stein_tol: f64,
    pub max_doublings: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            stein_tol: DEFAULT_STEIN_TOL,
            max_doublings: DEFAULT_MAX_DOUBLINGS,
        }
    }
}

/// Stein factor → balance → Hessenberg → signature: a standard HIN pair
/// similar to `pair`.
///
/// The record's stages carry the Stein residual, the input-normal residual
/// after balancing, the orthogonality residual of the Hessenberg stage and
/// the trace-power drift of the result.
pub fn to_standard_hin(
    pair: &InputPair,
    opts: PipelineOptions,
) -> std::result::Result<(HinPair, TransformRecord), PipelineError> {
    let factor =
        solve_stein_factor(pair, opts.stein_tol, opts.max_doublings).map_err(at(Stage::Stein))?;
    let stein_res = stein_residual(pair, &factor.grammian());
    let (mut balanced, mut rec_balance) =
        balance_with_factor(pair, &factor.l).map_err(at(Stage::Balance))?;
    // The balanced pair's Grammian is close to I and well conditioned, so
    // re-balancing it removes most of the error left by an ill-conditioned L.
    for _ in 0..MAX_REFINEMENTS {
        let current = balanced.input_normal_residual();
        if current <= REFINE_TARGET {
            break;
        }
        let refine = solve_stein_factor(&balanced, opts.stein_tol, opts.max_doublings)
            .and_then(|f| balance_with_factor(&balanced, &f.l))
            .map_err(at(Stage::Balance))?;
        if refine.0.input_normal_residual() >= current {
            break;
        }
        let (next, mut rec) = refine;
        rec.stages[0].stage = "balance_refine".into();
        balanced = next;
        rec_balance = rec_balance.then(rec);
    }
    let (hess, rec_hess) = hessenberg_reduce(&balanced);
    let (standard, e) = standardize_signs(&hess);

    let kmax = 2 * pair.n();
    let before = trace_powers(&pair.a, kmax).map_err(at(Stage::Validate))?;
    let after = trace_powers(&standard.a, kmax).map_err(at(Stage::Validate))?;

    let mut record = TransformRecord::single(Matrix::identity(pair.n()), "stein", stein_res)
        .then(rec_balance)
        .then(rec_hess)
        .then(TransformRecord::single(
            Matrix::from_diagonal(&e),
            "signature",
            0.0,
        ));
    let normal = standard.input_normal_residual();
    record.stages.push(StageDiagnostic {
        stage: "input_normal".into(),
        residual: normal,
    });
    record.stages.push(StageDiagnostic {
        stage: "trace_drift".into(),
        residual: trace_drift(&before, &after),
    });
    let hin = HinPair::from_input_pair_with_tol(standard, PIPELINE_NORMAL_TOL)
        .map_err(at(Stage::Validate))?;
    Ok((hin, record))
}
