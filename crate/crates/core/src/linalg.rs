//! Small dense and banded linear algebra.
//!
//! Everything here is sized by a univariate factor, a Krylov projection or a
//! dense reference system. The matrix-free operators never build an N×N dense
//! matrix through this module.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[T]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec shape");
        (0..self.rows)
            .map(|i| crate::scalar::dot(self.row(i), x))
            .collect()
    }

    pub fn matvec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows, "matvec_transpose shape");
        let mut y = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            crate::scalar::axpy(xi, self.row(i), &mut y);
        }
        y
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in 0..i {
                let v = half * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// Lower Cholesky factor `L` with `self = L Lᵀ`.
    pub fn cholesky(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Factorization {
                direction: None,
                message: "Cholesky of a non-square matrix".into(),
            });
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(s > T::zero()) {
                        return Err(Error::Factorization {
                            direction: None,
                            message: format!("matrix not positive definite (pivot {i})"),
                        });
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Solves `self · x = b` for lower-triangular `self`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self[(i, k)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }

    /// Solves `selfᵀ · x = b` for lower-triangular `self`.
    pub fn solve_lower_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self[(k, i)] * x[k];
            }
            x[i] = s / self[(i, i)];
        }
        x
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with full (row and column) pivoting, `P A Q = L U`.
#[derive(Debug, Clone)]
pub struct FullPivLu<T> {
    lu: Mat<T>,
    /// `row_perm[i]` is the original row placed at position `i`.
    row_perm: Vec<usize>,
    /// `col_perm[j]` is the original column placed at position `j`.
    col_perm: Vec<usize>,
}

impl<T: Real> FullPivLu<T> {
    pub fn new(a: &Mat<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Factorization {
                direction: None,
                message: "LU of a non-square matrix".into(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut row_perm: Vec<usize> = (0..n).collect();
        let mut col_perm: Vec<usize> = (0..n).collect();
        let threshold = a.max_abs() * T::epsilon() * T::from_usize_lossy(n.max(1));
        for k in 0..n {
            let (mut pi, mut pj, mut best) = (k, k, T::zero());
            for i in k..n {
                for (j, &v) in lu.row(i).iter().enumerate().skip(k) {
                    if v.abs() > best {
                        best = v.abs();
                        pi = i;
                        pj = j;
                    }
                }
            }
            if !(best > threshold) {
                return Err(Error::Factorization {
                    direction: None,
                    message: format!("matrix is singular to working precision (step {k})"),
                });
            }
            if pi != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, pi * n + j);
                }
                row_perm.swap(k, pi);
            }
            if pj != k {
                for i in 0..n {
                    lu.data.swap(i * n + k, i * n + pj);
                }
                col_perm.swap(k, pj);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self {
            lu,
            row_perm,
            col_perm,
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A x = b` in place, using `scratch` (length n) as workspace.
    pub fn solve_in_place(&self, b: &mut [T], scratch: &mut [T]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for (i, s) in scratch.iter_mut().enumerate().take(n) {
            *s = b[self.row_perm[i]];
        }
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = scratch[i];
            for k in 0..i {
                s -= row[k] * scratch[k];
            }
            scratch[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = scratch[i];
            for k in i + 1..n {
                s -= row[k] * scratch[k];
            }
            scratch[i] = s / row[i];
        }
        for j in 0..n {
            b[self.col_perm[j]] = scratch[j];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        let mut scratch = vec![T::zero(); b.len()];
        self.solve_in_place(&mut x, &mut scratch);
        x
    }

    /// Solves `Aᵀ x = b` in place, using `scratch` (length n) as workspace.
    pub fn solve_transpose_in_place(&self, b: &mut [T], scratch: &mut [T]) {
        let n = self.dim();
        for (j, s) in scratch.iter_mut().enumerate().take(n) {
            *s = b[self.col_perm[j]];
        }
        // Uᵀ z = y
        for j in 0..n {
            let mut s = scratch[j];
            for k in 0..j {
                s -= self.lu[(k, j)] * scratch[k];
            }
            scratch[j] = s / self.lu[(j, j)];
        }
        // Lᵀ w = z
        for i in (0..n).rev() {
            let mut s = scratch[i];
            for k in i + 1..n {
                s -= self.lu[(k, i)] * scratch[k];
            }
            scratch[i] = s;
        }
        for i in 0..n {
            b[self.row_perm[i]] = scratch[i];
        }
    }

    pub fn row_permutation(&self) -> &[usize] {
        &self.row_perm
    }

    pub fn col_permutation(&self) -> &[usize] {
        &self.col_perm
    }

    /// Reassembles `Pᵀ L U Qᵀ`.
    pub fn reconstruct(&self) -> Mat<T> {
        let n = self.dim();
        let l = Mat::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[(i, j)],
            std::cmp::Ordering::Equal => T::one(),
            std::cmp::Ordering::Less => T::zero(),
        });
        let u = Mat::from_fn(n, n, |i, j| if j >= i { self.lu[(i, j)] } else { T::zero() });
        let plu = l.matmul(&u);
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(self.row_perm[i], self.col_perm[j])] = plu[(i, j)];
            }
        }
        a
    }
}

/// Sparse matrix storing one contiguous column range per row.
///
/// Covers banded and skyline patterns; univariate B-spline mass and
/// collocation factors keep their envelope under pivotless factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix<T> {
    rows: usize,
    cols: usize,
    start: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> BandedMatrix<T> {
    /// Zero matrix with half-open column ranges `ranges[i] = (lo, hi)`.
    pub fn from_row_ranges(rows: usize, cols: usize, ranges: &[(usize, usize)]) -> Self {
        assert_eq!(ranges.len(), rows);
        let mut start = Vec::with_capacity(rows);
        let mut offset = Vec::with_capacity(rows + 1);
        offset.push(0);
        for &(lo, hi) in ranges {
            assert!(lo <= hi && hi <= cols, "row range out of bounds");
            start.push(lo);
            offset.push(offset.last().unwrap() + (hi - lo));
        }
        let nnz = *offset.last().unwrap();
        Self {
            rows,
            cols,
            start,
            offset,
            values: vec![T::zero(); nnz],
        }
    }

    /// Keeps entries with magnitude above `drop_tol` (envelope spans first to last kept).
    pub fn from_dense(m: &Mat<T>, drop_tol: T) -> Self {
        let ranges: Vec<(usize, usize)> = (0..m.rows())
            .map(|i| {
                let row = m.row(i);
                let first = row.iter().position(|v| v.abs() > drop_tol);
                let last = row.iter().rposition(|v| v.abs() > drop_tol);
                match (first, last) {
                    (Some(a), Some(b)) => (a, b + 1),
                    _ => (0, 0),
                }
            })
            .collect();
        let mut b = Self::from_row_ranges(m.rows(), m.cols(), &ranges);
        for i in 0..m.rows() {
            let (lo, vals) = b.row_mut(i);
            for (k, v) in vals.iter_mut().enumerate() {
                *v = m[(i, lo + k)];
            }
        }
        b
    }

    pub fn identity(n: usize) -> Self {
        let ranges: Vec<_> = (0..n).map(|i| (i, i + 1)).collect();
        let mut b = Self::from_row_ranges(n, n, &ranges);
        b.values.iter_mut().for_each(|v| *v = T::one());
        b
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (usize, &[T]) {
        (self.start[i], &self.values[self.offset[i]..self.offset[i + 1]])
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> (usize, &mut [T]) {
        (self.start[i], &mut self.values[self.offset[i]..self.offset[i + 1]])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (lo, vals) = self.row(i);
        if j >= lo && j < lo + vals.len() {
            vals[j - lo]
        } else {
            T::zero()
        }
    }

    /// Adds `v` at `(i, j)`; the entry must lie inside the row's range.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (lo, vals) = self.row_mut(i);
        assert!(j >= lo && j < lo + vals.len(), "entry ({i},{j}) outside envelope");
        vals[j - lo] += v;
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.rows)
            .filter_map(|i| {
                let (lo, vals) = self.row(i);
                (!vals.is_empty()).then(|| i.abs_diff(lo).max(i.abs_diff(lo + vals.len() - 1)))
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (lo, vals) = self.row(i);
            for (k, &v) in vals.iter().enumerate() {
                m[(i, lo + k)] = v;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut ranges = vec![(usize::MAX, 0usize); self.cols];
        for i in 0..self.rows {
            let (lo, vals) = self.row(i);
            for j in lo..lo + vals.len() {
                ranges[j].0 = ranges[j].0.min(i);
                ranges[j].1 = ranges[j].1.max(i + 1);
            }
        }
        for r in &mut ranges {
            if r.0 == usize::MAX {
                *r = (0, 0);
            }
        }
        let mut t = Self::from_row_ranges(self.cols, self.rows, &ranges);
        for i in 0..self.rows {
            let (lo, vals) = self.row(i);
            for (k, &v) in vals.iter().enumerate() {
                t.add(lo + k, i, v);
            }
        }
        t
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, vals) = self.row(i);
            *yi = crate::scalar::dot(vals, &x[lo..lo + vals.len()]);
        }
    }

    /// `y = Aᵀ x`.
    pub fn matvec_transpose_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        y.iter_mut().for_each(|v| *v = T::zero());
        for (i, &xi) in x.iter().enumerate() {
            let (lo, vals) = self.row(i);
            crate::scalar::axpy(xi, vals, &mut y[lo..lo + vals.len()]);
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Skyline Cholesky; the lower factor keeps each row's envelope.
    pub fn cholesky(&self) -> Result<BandedMatrix<T>> {
        if self.rows != self.cols {
            return Err(Error::Factorization {
                direction: None,
                message: "Cholesky of a non-square matrix".into(),
            });
        }
        let n = self.rows;
        let ranges: Vec<_> = (0..n).map(|i| (self.start[i].min(i), i + 1)).collect();
        let mut l = Self::from_row_ranges(n, n, &ranges);
        for i in 0..n {
            let si = l.start[i];
            for j in si..=i {
                let sj = l.start[j];
                let mut s = self.get(i, j);
                let k0 = si.max(sj);
                {
                    let (_, li) = l.row(i);
                    let (_, lj) = l.row(j);
                    for k in k0..j {
                        s -= li[k - si] * lj[k - sj];
                    }
                }
                if i == j {
                    if !(s > T::zero()) {
                        return Err(Error::Factorization {
                            direction: None,
                            message: format!("matrix not positive definite (pivot {i})"),
                        });
                    }
                    l.row_mut(i).1[i - si] = s.sqrt();
                } else {
                    let djj = l.get(j, j);
                    l.row_mut(i).1[j - si] = s / djj;
                }
            }
        }
        Ok(l)
    }

    /// Solves `L x = b` in place (`self` lower triangular, stored diagonal).
    pub fn solve_lower_in_place(&self, x: &mut [T]) {
        for i in 0..self.rows {
            let (lo, vals) = self.row(i);
            let diag = vals[i - lo];
            let s = x[i] - crate::scalar::dot(&vals[..i - lo], &x[lo..i]);
            x[i] = s / diag;
        }
    }

    /// Solves `Lᵀ x = b` in place (`self` lower triangular, stored diagonal).
    pub fn solve_lower_transpose_in_place(&self, x: &mut [T]) {
        for i in (0..self.rows).rev() {
            let (lo, vals) = self.row(i);
            let xi = x[i] / vals[i - lo];
            x[i] = xi;
            crate::scalar::axpy(-xi, &vals[..i - lo], &mut x[lo..i]);
        }
    }
}

/// Pivotless LU of a square banded matrix with both factors kept in envelope form.
///
/// `lower` is unit lower triangular (diagonal not stored); `upper_t` holds the
/// columns of `U` as rows, diagonal included.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    lower: BandedMatrix<T>,
    upper_t: BandedMatrix<T>,
}

impl<T: Real> BandedLu<T> {
    pub fn new(a: &BandedMatrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Factorization {
                direction: None,
                message: "LU of a non-square matrix".into(),
            });
        }
        let n = a.rows;
        // first nonzero row of each column, clipped to the diagonal
        let mut col_first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let (lo, vals) = a.row(i);
            for cf in &mut col_first[lo..lo + vals.len()] {
                *cf = (*cf).min(i);
            }
        }
        let lower_ranges: Vec<_> = (0..n).map(|i| (a.start[i].min(i), i)).collect();
        let upper_ranges: Vec<_> = (0..n).map(|j| (col_first[j], j + 1)).collect();
        let mut lower = BandedMatrix::from_row_ranges(n, n, &lower_ranges);
        let mut upper_t = BandedMatrix::from_row_ranges(n, n, &upper_ranges);
        // U row k spans columns [k, row_end[k]); L column k spans rows (k, col_end[k])
        let row_end = envelope_reach(&col_first);
        let col_end = envelope_reach(&lower_ranges.iter().map(|r| r.0).collect::<Vec<_>>());
        let scale = (0..n)
            .flat_map(|i| a.row(i).1.iter().copied())
            .fold(T::zero(), |m, v| m.max(v.abs()));
        for k in 0..n {
            let sk = lower.start[k];
            // row k of U
            for j in k..row_end[k] {
                let rj = upper_t.start[j];
                if rj > k {
                    continue;
                }
                let mut s = a.get(k, j);
                let t0 = sk.max(rj);
                {
                    let (_, lk) = lower.row(k);
                    let (_, uj) = upper_t.row(j);
                    for t in t0..k {
                        s -= lk[t - sk] * uj[t - rj];
                    }
                }
                upper_t.row_mut(j).1[k - rj] = s;
            }
            let ukk = upper_t.get(k, k);
            if !(ukk.abs() > scale * T::epsilon() * T::from_usize_lossy(n.max(1))) {
                return Err(Error::Factorization {
                    direction: None,
                    message: format!("zero pivot at step {k} in pivotless LU"),
                });
            }
            // column k of L
            let rk = upper_t.start[k];
            for i in k + 1..col_end[k] {
                let si = lower.start[i];
                if si > k {
                    continue;
                }
                let mut s = a.get(i, k);
                let t0 = si.max(rk);
                {
                    let (_, li) = lower.row(i);
                    let (_, uk) = upper_t.row(k);
                    for t in t0..k {
                        s -= li[t - si] * uk[t - rk];
                    }
                }
                lower.row_mut(i).1[k - si] = s / ukk;
            }
        }
        Ok(Self { lower, upper_t })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let (lo, vals) = self.lower.row(i);
            x[i] -= crate::scalar::dot(vals, &x[lo..i]);
        }
        for j in (0..n).rev() {
            let (lo, vals) = self.upper_t.row(j);
            let xj = x[j] / vals[j - lo];
            x[j] = xj;
            crate::scalar::axpy(-xj, &vals[..j - lo], &mut x[lo..j]);
        }
    }

    /// Solves `Aᵀ x = b` in place.
    pub fn solve_transpose_in_place(&self, x: &mut [T]) {
        let n = self.dim();
        for j in 0..n {
            let (lo, vals) = self.upper_t.row(j);
            let s = x[j] - crate::scalar::dot(&vals[..j - lo], &x[lo..j]);
            x[j] = s / vals[j - lo];
        }
        for i in (0..n).rev() {
            let (lo, vals) = self.lower.row(i);
            let xi = x[i];
            crate::scalar::axpy(-xi, vals, &mut x[lo..i]);
        }
    }
}

/// `reach[k] = max { j + 1 : first[j] <= k }`, at least `k + 1`.
fn envelope_reach(first: &[usize]) -> Vec<usize> {
    let n = first.len();
    let mut reach = vec![0usize; n];
    for (j, &f) in first.iter().enumerate() {
        reach[f] = reach[f].max(j + 1);
    }
    let mut running = 0;
    (0..n)
        .map(|k| {
            running = running.max(reach[k]);
            running.max(k + 1)
        })
        .collect()
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and
/// orthonormal eigenvectors as columns.
///
/// Householder tridiagonalization followed by implicit QL iterations.
pub fn symmetric_eigen<T: Real>(a: &Mat<T>) -> Result<(Vec<T>, Mat<T>)> {
    if !a.is_square() {
        return Err(Error::Parameter("symmetric_eigen needs a square matrix".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let mut v = a.clone();
    v.symmetrize();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;
    // sort ascending
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((values, vectors))
}

fn tridiagonalize<T: Real>(v: &mut Mat<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for &dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
                v[(j, i)] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = zero;
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = zero;
}

fn tridiagonal_ql<T: Real>(v: &mut Mat<T>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Factorization {
                        direction: None,
                        message: "symmetric tridiagonal QL did not converge".into(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

/// Eigenvalues of a general real square matrix (Hessenberg reduction plus
/// Francis double-shift QR). Returned unordered as complex numbers.
pub fn general_eigenvalues<T: Real>(a: &Mat<T>) -> Result<Vec<Complex<T>>> {
    if !a.is_square() {
        return Err(Error::Parameter("general_eigenvalues needs a square matrix".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    hessenberg_reduce(&mut h);
    hessenberg_qr(&mut h)
}

fn hessenberg_reduce<T: Real>(h: &mut Mat<T>) {
    let n = h.rows();
    let zero = T::zero();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![zero; n];
    for m in 1..high {
        let mut scale = zero;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == zero {
            continue;
        }
        let mut hh = zero;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > zero {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = zero;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = zero;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }
    for i in 2..n {
        for j in 0..i - 1 {
            h[(i, j)] = zero;
        }
    }
}

fn hessenberg_qr<T: Real>(hm: &mut Mat<T>) -> Result<Vec<Complex<T>>> {
    let nn = hm.rows() as isize;
    let zero = T::zero();
    let eps = T::epsilon();
    let mut d = vec![zero; nn as usize];
    let mut e = vec![zero; nn as usize];
    macro_rules! h {
        ($i:expr, $j:expr) => {
            hm[(($i) as usize, ($j) as usize)]
        };
    }
    let mut n = nn - 1;
    let low: isize = 0;
    let mut exshift = zero;
    let (mut p, mut q, mut r, mut s, mut z): (T, T, T, T, T);
    let (mut w, mut x, mut y);
    let mut norm = zero;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += h!(i, j).abs();
        }
    }
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    while n >= low {
        let mut l = n;
        while l > low {
            s = h!(l - 1, l - 1).abs() + h!(l, l).abs();
            if s == zero {
                s = norm;
            }
            if h!(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l == n {
            h!(n, n) += exshift;
            d[n as usize] = h!(n, n);
            e[n as usize] = zero;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = h!(n, n - 1) * h!(n - 1, n);
            p = (h!(n - 1, n - 1) - h!(n, n)) / T::lit(2.0);
            q = p * p + w;
            z = q.abs().sqrt();
            h!(n, n) += exshift;
            h!(n - 1, n - 1) += exshift;
            x = h!(n, n);
            if q >= zero {
                z = if p >= zero { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != zero {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = zero;
                e[n as usize] = zero;
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h!(n, n);
            y = zero;
            w = zero;
            if l < n {
                y = h!(n - 1, n - 1);
                w = h!(n, n - 1) * h!(n - 1, n);
            }
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h!(i, i) -= x;
                }
                s = h!(n, n - 1).abs() + h!(n - 1, n - 2).abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            if iter == 30 {
                s = (y - x) / T::lit(2.0);
                s = s * s + w;
                if s > zero {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / T::lit(2.0) + s);
                    for i in low..=n {
                        h!(i, i) -= s;
                    }
                    exshift += s;
                    x = T::lit(0.964);
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total_iter += 1;
            if total_iter > 100 * nn as usize + 100 {
                return Err(Error::Factorization {
                    direction: None,
                    message: "Hessenberg QR iteration did not converge".into(),
                });
            }
            let mut m = n - 2;
            loop {
                z = h!(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h!(m + 1, m) + h!(m, m + 1);
                q = h!(m + 1, m + 1) - z - r - s;
                r = h!(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h!(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h!(m - 1, m - 1).abs() + z.abs() + h!(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=n {
                h!(i, i - 2) = zero;
                if i > m + 2 {
                    h!(i, i - 3) = zero;
                }
            }
            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = h!(k, k - 1);
                    q = h!(k + 1, k - 1);
                    r = if notlast { h!(k + 2, k - 1) } else { zero };
                    x = p.abs() + q.abs() + r.abs();
                    if x == zero {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < zero {
                    s = -s;
                }
                if s != zero {
                    if k != m {
                        h!(k, k - 1) = -s * x;
                    } else if l != m {
                        h!(k, k - 1) = -h!(k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h!(k, j) + q * h!(k + 1, j);
                        if notlast {
                            p += r * h!(k + 2, j);
                            h!(k + 2, j) -= p * z;
                        }
                        h!(k, j) -= p * x;
                        h!(k + 1, j) -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * h!(i, k) + y * h!(i, k + 1);
                        if notlast {
                            p += z * h!(i, k + 2);
                            h!(i, k + 2) -= p * r;
                        }
                        h!(i, k) -= p;
                        h!(i, k + 1) -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(d.into_iter().zip(e).map(|(re, im)| Complex::new(re, im)).collect())
}

/// Eigenvector for an (approximate) eigenvalue via complex inverse iteration.
///
/// Returned with unit Euclidean norm. For a real eigenvalue the phase is
/// rotated so the vector is real up to rounding.
pub fn inverse_iteration<T: Real>(a: &Mat<T>, lambda: Complex<T>) -> Vec<Complex<T>> {
    let n = a.rows();
    let zero = Complex::new(T::zero(), T::zero());
    let scale = a.max_abs().max(lambda.norm()).max(T::min_positive_value());
    let tiny = scale * T::epsilon();
    let mut lu: Vec<Complex<T>> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let mut v = Complex::new(a[(i, j)], T::zero());
            if i == j {
                v -= lambda;
            }
            v
        })
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut piv = k;
        let mut best = lu[k * n + k].norm();
        for i in k + 1..n {
            let v = lu[i * n + k].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if piv != k {
            for j in 0..n {
                lu.swap(k * n + j, piv * n + j);
            }
            perm.swap(k, piv);
        }
        if lu[k * n + k].norm() < tiny {
            lu[k * n + k] = Complex::new(tiny, T::zero());
        }
        let pivot = lu[k * n + k];
        for i in k + 1..n {
            let f = lu[i * n + k] / pivot;
            lu[i * n + k] = f;
            if f == zero {
                continue;
            }
            for j in k + 1..n {
                let u = lu[k * n + j];
                lu[i * n + j] -= f * u;
            }
        }
    }
    // deterministic, non-degenerate start
    let mut x: Vec<Complex<T>> = (0..n)
        .map(|i| Complex::new(T::one() + T::lit(0.1) * T::from_usize_lossy(i % 7), T::zero()))
        .collect();
    let mut y = vec![zero; n];
    for _ in 0..3 {
        for i in 0..n {
            y[i] = x[perm[i]];
        }
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= lu[i * n + k] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= lu[i * n + k] * y[k];
            }
            y[i] = s / lu[i * n + i];
        }
        let nrm = y.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = *yi / nrm;
        }
    }
    // rotate so the largest component is real and positive
    let (imax, _) = x
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bv), (i, c)| if c.norm() > bv { (i, c.norm()) } else { (bi, bv) });
    let phase = x[imax].conj() / x[imax].norm();
    for xi in &mut x {
        *xi *= phase;
    }
    x
}

/// Orthonormalizes the columns of `x` (rows × cols) in place by twice-repeated
/// modified Gram–Schmidt. Columns that become numerically dependent are dropped;
/// the returned matrix has the surviving columns.
pub fn orthonormalize_columns<T: Real>(x: &Mat<T>) -> Mat<T> {
    let n = x.rows();
    let mut kept: Vec<Vec<T>> = Vec::new();
    for j in 0..x.cols() {
        let mut c = x.column(j);
        let original = crate::scalar::norm2(&c);
        if original == T::zero() {
            continue;
        }
        for _ in 0..2 {
            for q in &kept {
                let proj = crate::scalar::dot(q, &c);
                crate::scalar::axpy(-proj, q, &mut c);
            }
        }
        let nrm = crate::scalar::norm2(&c);
        if nrm > original * T::lit(1e3) * T::epsilon() * T::from_usize_lossy(n.max(1)) {
            crate::scalar::scale(T::one() / nrm, &mut c);
            kept.push(c);
        }
    }
    let mut out = Mat::zeros(n, kept.len());
    for (j, c) in kept.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}
