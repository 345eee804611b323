//! Dense direct linear algebra: LU factorization with partial (row)
//! pivoting, multi-right-hand-side solves, residual checks, and the flop
//! counter shared by every algorithm in the crate.
//!
//! Flop accounting: each scalar multiplication, division, addition or
//! subtraction counts as one flop, so a multiply-add pair contributes two.
//! With this convention the factorization of an `n×n` matrix costs
//! `(2/3)n³ + O(n²)` flops, matching the dominant-term accounting used by
//! the pivoting engines.

use thiserror::Error;

use crate::scalar::Scalar;

/// Monotone counter of scalar arithmetic operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopCounter {
    multiply_adds: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `n` scalar operations.
    pub fn add(&mut self, n: u64) {
        self.multiply_adds += n;
    }

    pub fn count(&self) -> u64 {
        self.multiply_adds
    }
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix singular to tolerance at elimination step {step}: pivot magnitude {pivot:e} below floor {floor:e}")]
    Singular { step: usize, pivot: f64, floor: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> DenseMatrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, F::one());
        }
        m
    }

    /// Build from row-major data; length must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                context: format!("data length {} does not match {rows}x{cols}", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested rows (convenient in tests and file I/O).
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(LinalgError::DimensionMismatch {
                    context: format!("row {i} has length {} but row 0 has {c}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.cols, p % self.cols))
    }

    /// Plain matrix product, used by residual checks and the oracle.
    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                context: format!(
                    "cannot multiply {}x{} by {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == F::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `out[j] = Σ_i v[i]·M[i][j]`.
    pub fn vec_mat(&self, v: &[F]) -> Result<Vec<F>, LinalgError> {
        if v.len() != self.rows {
            return Err(LinalgError::DimensionMismatch {
                context: format!("vector length {} vs {} rows", v.len(), self.rows),
            });
        }
        let mut out = vec![F::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == F::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += vi * m;
            }
        }
        Ok(out)
    }

    /// Matrix times column vector.
    pub fn mat_vec(&self, v: &[F]) -> Result<Vec<F>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                context: format!("vector length {} vs {} cols", v.len(), self.cols),
            });
        }
        let mut out = vec![F::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = F::zero();
            for (&m, &x) in self.row(i).iter().zip(v) {
                acc += m * x;
            }
            out[i] = acc;
        }
        Ok(out)
    }
}

/// Combined LU storage plus the row permutation applied during elimination.
///
/// `perm[i]` is the original row index that ended up in elimination row `i`,
/// so `P·M = L·U` with `P` the permutation sending row `perm[i]` to row `i`.
#[derive(Debug, Clone)]
pub struct LuFactors<F> {
    lu: DenseMatrix<F>,
    perm: Vec<usize>,
}

impl<F: Scalar> LuFactors<F> {
    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

/// Default relative pivot tolerance: a pivot below `tol · max|M|` aborts.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-12;

/// LU factorization with partial row pivoting.
///
/// Fails with [`LinalgError::Singular`] naming the elimination step when the
/// largest available pivot magnitude drops below `pivot_tol · max|M|`.
pub fn lu_factor<F: Scalar>(
    m: &DenseMatrix<F>,
    pivot_tol: F,
    flops: &mut FlopCounter,
) -> Result<LuFactors<F>, LinalgError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(LinalgError::DimensionMismatch {
            context: format!("lu_factor requires a square matrix, got {}x{}", n, m.cols()),
        });
    }
    if let Some((row, col)) = m.first_non_finite() {
        return Err(LinalgError::NonFinite { row, col });
    }

    let floor = pivot_tol * m.max_abs();
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut ops: u64 = 0;

    for k in 0..n {
        let mut best = k;
        let mut best_abs = lu.get(k, k).abs();
        for i in k + 1..n {
            let a = lu.get(i, k).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if best_abs <= floor {
            return Err(LinalgError::Singular {
                step: k,
                pivot: best_abs.to_f64().unwrap_or(f64::NAN),
                floor: floor.to_f64().unwrap_or(f64::NAN),
            });
        }
        if best != k {
            perm.swap(k, best);
            for j in 0..n {
                let a = lu.get(k, j);
                let b = lu.get(best, j);
                lu.set(k, j, b);
                lu.set(best, j, a);
            }
        }
        let pivot = lu.get(k, k);
        for i in k + 1..n {
            let l = lu.get(i, k) / pivot;
            lu.set(i, k, l);
            let (head, tail) = lu.data.split_at_mut((i) * n);
            let pivot_row = &head[k * n..k * n + n];
            let row_i = &mut tail[..n];
            for j in k + 1..n {
                row_i[j] -= l * pivot_row[j];
            }
        }
        let below = (n - k - 1) as u64;
        ops += below + 2 * below * below;
    }
    flops.add(ops);
    Ok(LuFactors { lu, perm })
}

/// Solve `M·X = B` for possibly many right-hand sides packed as columns.
pub fn lu_solve<F: Scalar>(
    factors: &LuFactors<F>,
    b: &DenseMatrix<F>,
    flops: &mut FlopCounter,
) -> Result<DenseMatrix<F>, LinalgError> {
    let n = factors.dim();
    if b.rows() != n {
        return Err(LinalgError::DimensionMismatch {
            context: format!("right-hand side has {} rows, expected {n}", b.rows()),
        });
    }
    if let Some((row, col)) = b.first_non_finite() {
        return Err(LinalgError::NonFinite { row, col });
    }
    let m = b.cols();
    let lu = &factors.lu;

    // Apply the row permutation, then forward- and back-substitute a full
    // row block at a time (row-major friendly).
    let mut x = DenseMatrix::zeros(n, m);
    for i in 0..n {
        let src = b.row(factors.perm[i]).to_vec();
        x.row_mut(i).copy_from_slice(&src);
    }
    for i in 0..n {
        for k in 0..i {
            let l = lu.get(i, k);
            if l == F::zero() {
                continue;
            }
            let (head, tail) = x.data.split_at_mut(i * m);
            let row_k = &head[k * m..k * m + m];
            let row_i = &mut tail[..m];
            for (xi, &xk) in row_i.iter_mut().zip(row_k) {
                *xi -= l * xk;
            }
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let u = lu.get(i, k);
            if u == F::zero() {
                continue;
            }
            let (head, tail) = x.data.split_at_mut(k * m);
            let row_i = &mut head[i * m..i * m + m];
            let row_k = &tail[..m];
            for (xi, &xk) in row_i.iter_mut().zip(row_k) {
                *xi -= u * xk;
            }
        }
        let d = lu.get(i, i);
        for v in x.row_mut(i) {
            *v /= d;
        }
    }
    flops.add((m as u64) * (2 * (n as u64) * (n as u64).saturating_sub(1) + n as u64));
    Ok(x)
}

/// `‖M·X − B‖∞` as the maximum absolute entry of the residual.
pub fn residual_inf_norm<F: Scalar>(
    m: &DenseMatrix<F>,
    x: &DenseMatrix<F>,
    b: &DenseMatrix<F>,
) -> Result<F, LinalgError> {
    if b.rows() != m.rows() || b.cols() != x.cols() {
        return Err(LinalgError::DimensionMismatch {
            context: format!(
                "residual shapes: M {}x{}, X {}x{}, B {}x{}",
                m.rows(),
                m.cols(),
                x.rows(),
                x.cols(),
                b.rows(),
                b.cols()
            ),
        });
    }
    let mx = m.matmul(x)?;
    let mut worst = F::zero();
    for (p, q) in mx.data.iter().zip(b.data.iter()) {
        worst = worst.max((*p - *q).abs());
    }
    Ok(worst)
}

/// Residual scaled by `‖M‖·‖X‖ + ‖B‖` (max-abs norms); the solver contract
/// keeps this at or below `1e-10` for well-conditioned systems.
pub fn scaled_residual<F: Scalar>(
    m: &DenseMatrix<F>,
    x: &DenseMatrix<F>,
    b: &DenseMatrix<F>,
) -> Result<F, LinalgError> {
    let raw = residual_inf_norm(m, x, b)?;
    let scale = m.max_abs() * x.max_abs() + b.max_abs();
    if scale == F::zero() {
        return Ok(raw);
    }
    Ok(raw / scale)
}
