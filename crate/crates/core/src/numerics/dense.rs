//! Row-major dense matrices and Cholesky-based solves.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Tile edge for the blocked factorization; small systems use the plain
/// row-oriented kernel.
const BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite matrix entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, actual: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: v.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest |a_ij − a_ji| relative to the largest entry magnitude.
    pub fn asymmetry(&self) -> Option<(usize, usize, f64)> {
        if !self.is_square() {
            return None;
        }
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = (0, 0, 0.0);
        for i in 0..self.rows {
            for j in 0..i {
                let rel = (self[(i, j)] - self[(j, i)]).abs() / scale;
                if rel > worst.2 {
                    worst = (i, j, rel);
                }
            }
        }
        Some(worst)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DenseMatrix,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.lower
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim()).map(move |i| self.lower[(i, i)])
    }

    /// Solves `L x = b` (or `Lᵀ x = b` when `transposed`).
    pub fn solve_triangular(&self, b: &[f64], transposed: bool) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
        }
        let mut x = b.to_vec();
        if transposed {
            back_substitute_transposed(self.lower.as_slice(), n, &mut x);
        } else {
            forward_substitute(self.lower.as_slice(), n, &mut x);
        }
        Ok(x)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let z = self.solve_triangular(b, false)?;
        self.solve_triangular(&z, true)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.diagonal().map(f64::ln).sum::<f64>()
    }

    /// Explicit inverse of the factored matrix; only for small systems.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            forward_substitute(self.lower.as_slice(), n, &mut e);
            back_substitute_transposed(self.lower.as_slice(), n, &mut e);
            for i in 0..n {
                inv[(i, j)] = e[i];
            }
        }
        inv
    }
}

/// Factors a symmetric positive-definite matrix.
pub fn cholesky(m: &DenseMatrix) -> Result<CholeskyFactor> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.rows, actual: m.cols });
    }
    if let Some((i, j, rel)) = m.asymmetry() {
        if rel > 1e-10 {
            return Err(Error::NotSymmetric { row: i, col: j });
        }
    }
    let n = m.rows;
    let mut data = m.data.clone();
    cholesky_in_place(&mut data, n).map_err(|pivot| Error::NotPositiveDefinite { pivot })?;
    Ok(CholeskyFactor { lower: DenseMatrix { rows: n, cols: n, data } })
}

/// Triangular solve against a factor.
pub fn solve_triangular(f: &CholeskyFactor, b: &[f64], transposed: bool) -> Result<Vec<f64>> {
    f.solve_triangular(b, transposed)
}

/// `log |A|` from its factor.
pub fn log_det(f: &CholeskyFactor) -> f64 {
    f.log_det()
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0_f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Pivots at or below this fraction of the original diagonal entry are
/// treated as zero: they are rounding residue of an exactly singular matrix.
pub(crate) const PIVOT_RTOL: f64 = 1e-14;

/// In-place lower Cholesky of a row-major `n×n` buffer. Only the lower
/// triangle is read; the strict upper triangle is zeroed on success. On
/// failure returns the index of the first non-positive pivot.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    let floors: Vec<f64> = (0..n).map(|i| PIVOT_RTOL * a[i * n + i].abs()).collect();
    if n <= 2 * BLOCK {
        cholesky_unblocked(a, n, 0, n, &floors)?;
    } else {
        cholesky_blocked(a, n, &floors)?;
    }
    for i in 0..n {
        for v in &mut a[i * n + i + 1..(i + 1) * n] {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Row-oriented factorization of the diagonal tile `[lo, hi)` assuming all
/// columns before `lo` have already been applied.
fn cholesky_unblocked(
    a: &mut [f64],
    n: usize,
    lo: usize,
    hi: usize,
    floors: &[f64],
) -> std::result::Result<(), usize> {
    for i in lo..hi {
        for j in lo..=i {
            let (head, tail) = a.split_at_mut(i * n);
            let (row_j, row_i) = if j < i {
                (&head[j * n + lo..j * n + j], &tail[lo..j])
            } else {
                (&tail[lo..j], &tail[lo..j])
            };
            let s = tail[j] - dot(row_i, row_j);
            if i == j {
                if !(s > floors[i]) || !s.is_finite() {
                    return Err(i);
                }
                tail[i] = s.sqrt();
            } else {
                tail[j] = s / head[j * n + j];
            }
        }
    }
    Ok(())
}

/// Left-looking blocked factorization: each tile column is updated with
/// tile-by-tile products over earlier columns before its diagonal tile is
/// factored and the panel below is solved.
fn cholesky_blocked(a: &mut [f64], n: usize, floors: &[f64]) -> std::result::Result<(), usize> {
    let mut j0 = 0;
    while j0 < n {
        let j1 = (j0 + BLOCK).min(n);
        // Update tile column [j0, j1) for all rows i >= j0 with columns < j0.
        if j0 > 0 {
            let mut k0 = 0;
            while k0 < j0 {
                let k1 = (k0 + BLOCK).min(j0);
                for i in j0..n {
                    let jmax = j1.min(i + 1);
                    for j in j0..jmax {
                        let s = {
                            let ri = &a[i * n + k0..i * n + k1];
                            let rj = &a[j * n + k0..j * n + k1];
                            dot(ri, rj)
                        };
                        a[i * n + j] -= s;
                    }
                }
                k0 = k1;
            }
        }
        cholesky_unblocked(a, n, j0, j1, floors)?;
        // Panel solve: L[i, j0..j1] = S[i, j0..j1] L[j0..j1, j0..j1]^{-T}.
        for i in j1..n {
            for j in j0..j1 {
                let s = {
                    let ri = &a[i * n + j0..i * n + j];
                    let rj = &a[j * n + j0..j * n + j];
                    dot(ri, rj)
                };
                a[i * n + j] = (a[i * n + j] - s) / a[j * n + j];
            }
        }
        j0 = j1;
    }
    Ok(())
}

/// Solves `L x = b` in place for row-major lower-triangular `l`.
#[inline]
pub(crate) fn forward_substitute(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s = dot(row, &b[..i]);
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place for row-major lower-triangular `l`.
#[inline]
pub(crate) fn back_substitute_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        b[i] /= l[i * n + i];
        let bi = b[i];
        let row = &l[i * n..i * n + i];
        for (bk, &lik) in b[..i].iter_mut().zip(row) {
            *bk -= lik * bi;
        }
    }
}
