//! Kronecker-product operators applied by sum factorization.
//!
//! A Kronecker operator `F_d ⊗ … ⊗ F_2 ⊗ F_1` is stored as its univariate
//! factors in parametric-direction order `[F_1, F_2, …, F_d]`; `F_1` acts on
//! the fastest-varying index. Products are evaluated as `d` successive
//! mode contractions (direction 1 first), never by forming the full matrix.

use crate::error::{check_len, Error, Result};
use crate::linalg::{BandedLu, BandedMatrix, FullPivLu};
use crate::scalar::Real;

/// Applies a length-changing map along every mode in turn.
///
/// `apply(k, fiber_in, fiber_out)` is called for each mode-`k` fiber.
fn sweep_modes<T: Real>(
    input: &[T],
    dims_in: &[usize],
    dims_out: &[usize],
    mut apply: impl FnMut(usize, &[T], &mut [T]),
) -> Vec<T> {
    let d = dims_in.len();
    let mut dims: Vec<usize> = dims_in.to_vec();
    let mut max_len = input.len();
    for k in 0..d {
        dims[k] = dims_out[k];
        max_len = max_len.max(dims.iter().product());
    }
    let mut cur = Vec::with_capacity(max_len);
    cur.extend_from_slice(input);
    let mut next: Vec<T> = Vec::with_capacity(max_len);
    let max_fiber = dims_in.iter().chain(dims_out).copied().max().unwrap_or(0);
    let mut fin = vec![T::zero(); max_fiber];
    let mut fout = vec![T::zero(); max_fiber];
    dims.copy_from_slice(dims_in);
    for k in 0..d {
        let (n, m) = (dims[k], dims_out[k]);
        let inner: usize = dims[..k].iter().product();
        let outer: usize = dims[k + 1..].iter().product();
        next.clear();
        next.resize(inner * m * outer, T::zero());
        for o in 0..outer {
            let base_in = n * inner * o;
            let base_out = m * inner * o;
            for i in 0..inner {
                for c in 0..n {
                    fin[c] = cur[base_in + i + inner * c];
                }
                apply(k, &fin[..n], &mut fout[..m]);
                for r in 0..m {
                    next[base_out + i + inner * r] = fout[r];
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        dims[k] = m;
    }
    cur
}

/// `F_d ⊗ … ⊗ F_1` stored as univariate banded factors.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerOperator<T> {
    factors: Vec<BandedMatrix<T>>,
}

impl<T: Real> KroneckerOperator<T> {
    /// `factors[k]` acts on parametric direction `k` (direction 0 fastest).
    pub fn new(factors: Vec<BandedMatrix<T>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Parameter("Kronecker operator needs at least one factor".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[BandedMatrix<T>] {
        &self.factors
    }

    pub fn row_dims(&self) -> Vec<usize> {
        self.factors.iter().map(BandedMatrix::rows).collect()
    }

    pub fn col_dims(&self) -> Vec<usize> {
        self.factors.iter().map(BandedMatrix::cols).collect()
    }

    pub fn rows(&self) -> usize {
        self.row_dims().iter().product()
    }

    pub fn cols(&self) -> usize {
        self.col_dims().iter().product()
    }

    /// `(F_d ⊗ … ⊗ F_1) v`.
    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("Kronecker matvec input", self.cols(), v.len())?;
        Ok(sweep_modes(v, &self.col_dims(), &self.row_dims(), |k, x, y| {
            self.factors[k].matvec_into(x, y)
        }))
    }

    /// `(F_d ⊗ … ⊗ F_1)ᵀ v`.
    pub fn matvec_transpose(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("Kronecker transpose matvec input", self.rows(), v.len())?;
        Ok(sweep_modes(v, &self.row_dims(), &self.col_dims(), |k, x, y| {
            self.factors[k].matvec_transpose_into(x, y)
        }))
    }
}

/// Factor-wise lower Cholesky factors, `L = L_d ⊗ … ⊗ L_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerCholesky<T> {
    factors: Vec<BandedMatrix<T>>,
}

impl<T: Real> KroneckerCholesky<T> {
    pub fn new(op: &KroneckerOperator<T>) -> Result<Self> {
        let factors = op
            .factors
            .iter()
            .enumerate()
            .map(|(k, f)| {
                f.cholesky().map_err(|e| match e {
                    Error::Factorization { message, .. } => Error::Factorization {
                        direction: Some(k),
                        message,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[BandedMatrix<T>] {
        &self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(BandedMatrix::rows).collect()
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// `L⁻¹ v` (or `L⁻ᵀ v` when `transpose`).
    pub fn solve(&self, v: &[T], transpose: bool) -> Result<Vec<T>> {
        check_len("Kronecker triangular solve input", self.dim(), v.len())?;
        let dims = self.dims();
        Ok(sweep_modes(v, &dims, &dims, |k, x, y| {
            y.copy_from_slice(x);
            if transpose {
                self.factors[k].solve_lower_transpose_in_place(y);
            } else {
                self.factors[k].solve_lower_in_place(y);
            }
        }))
    }

    /// `L v` (or `Lᵀ v` when `transpose`).
    pub fn multiply(&self, v: &[T], transpose: bool) -> Result<Vec<T>> {
        check_len("Kronecker triangular multiply input", self.dim(), v.len())?;
        let dims = self.dims();
        Ok(sweep_modes(v, &dims, &dims, |k, x, y| {
            if transpose {
                self.factors[k].matvec_transpose_into(x, y);
            } else {
                self.factors[k].matvec_into(x, y);
            }
        }))
    }
}

/// Factor-wise pivotless LU of a square Kronecker operator.
#[derive(Debug, Clone)]
pub struct KroneckerLu<T> {
    factors: Vec<BandedLu<T>>,
}

impl<T: Real> KroneckerLu<T> {
    pub fn new(op: &KroneckerOperator<T>) -> Result<Self> {
        let factors = op
            .factors
            .iter()
            .enumerate()
            .map(|(k, f)| {
                BandedLu::new(f).map_err(|e| match e {
                    Error::Factorization { message, .. } => Error::Factorization {
                        direction: Some(k),
                        message,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(BandedLu::dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// `B⁻¹ v` (or `B⁻ᵀ v` when `transpose`).
    pub fn solve(&self, v: &[T], transpose: bool) -> Result<Vec<T>> {
        check_len("Kronecker LU solve input", self.dim(), v.len())?;
        let dims = self.dims();
        Ok(sweep_modes(v, &dims, &dims, |k, x, y| {
            y.copy_from_slice(x);
            if transpose {
                self.factors[k].solve_transpose_in_place(y);
            } else {
                self.factors[k].solve_in_place(y);
            }
        }))
    }
}

/// Factor-wise fully pivoted LU (dense univariate factors).
#[derive(Debug, Clone)]
pub struct KroneckerPivLu<T> {
    factors: Vec<FullPivLu<T>>,
}

impl<T: Real> KroneckerPivLu<T> {
    pub fn new(op: &KroneckerOperator<T>) -> Result<Self> {
        let factors = op
            .factors
            .iter()
            .enumerate()
            .map(|(k, f)| {
                FullPivLu::new(&f.to_dense()).map_err(|e| match e {
                    Error::Factorization { message, .. } => Error::Factorization {
                        direction: Some(k),
                        message,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(FullPivLu::dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn solve(&self, v: &[T], transpose: bool) -> Result<Vec<T>> {
        check_len("Kronecker pivoted LU solve input", self.dim(), v.len())?;
        let dims = self.dims();
        let mut scratch = vec![T::zero(); dims.iter().copied().max().unwrap_or(0)];
        Ok(sweep_modes(v, &dims, &dims, |k, x, y| {
            y.copy_from_slice(x);
            let s = &mut scratch[..x.len()];
            if transpose {
                self.factors[k].solve_transpose_in_place(y, s);
            } else {
                self.factors[k].solve_in_place(y, s);
            }
        }))
    }
}

/// `(F_d ⊗ … ⊗ F_1) v`.
pub fn kron_matvec<T: Real>(op: &KroneckerOperator<T>, v: &[T]) -> Result<Vec<T>> {
    op.matvec(v)
}

/// Per-factor Cholesky of a Kronecker operator with SPD factors.
pub fn kron_cholesky<T: Real>(op: &KroneckerOperator<T>) -> Result<KroneckerCholesky<T>> {
    KroneckerCholesky::new(op)
}

/// `L⁻¹ v` or `L⁻ᵀ v` by factor-wise triangular solves.
pub fn kron_tri_solve<T: Real>(ch: &KroneckerCholesky<T>, v: &[T], transpose: bool) -> Result<Vec<T>> {
    ch.solve(v, transpose)
}

/// Elementwise product `d ⊙ v`.
pub fn diag_scale<T: Real>(d: &[T], v: &[T]) -> Result<Vec<T>> {
    check_len("diagonal scaling", d.len(), v.len())?;
    Ok(d.iter().zip(v).map(|(&a, &b)| a * b).collect())
}

pub(crate) fn diag_scale_in_place<T: Real>(d: &[T], v: &mut [T]) {
    debug_assert_eq!(d.len(), v.len());
    for (vi, &di) in v.iter_mut().zip(d) {
        *vi *= di;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<f64> {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn banded(m: &Mat<f64>) -> BandedMatrix<f64> {
        BandedMatrix::from_dense(m, 0.0)
    }

    #[test]
    fn identity_factors() {
        let op = KroneckerOperator::new(vec![BandedMatrix::identity(3), BandedMatrix::identity(2)]).unwrap();
        let v: Vec<f64> = (0..6).map(|i| i as f64 * 0.7 - 1.0).collect();
        assert_eq!(op.matvec(&v).unwrap(), v);
        let ch = kron_cholesky(&op).unwrap();
        assert_eq!(ch.factors()[0].to_dense(), Mat::identity(3));
        assert_eq!(kron_tri_solve(&ch, &v, false).unwrap(), v);
        assert_eq!(kron_tri_solve(&ch, &v, true).unwrap(), v);
    }

    #[test]
    fn mixed_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng, 2, 2);
        let b = random(&mut rng, 3, 3);
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        // A ⊗ B: B acts on the fastest index
        let op = KroneckerOperator::new(vec![banded(&b), banded(&a)]).unwrap();
        let xy: Vec<f64> = x.iter().flat_map(|&xi| y.iter().map(move |&yj| xi * yj)).collect();
        let got = op.matvec(&xy).unwrap();
        let ax = a.matvec(&x);
        let by = b.matvec(&y);
        let expected: Vec<f64> = ax.iter().flat_map(|&u| by.iter().map(move |&w| u * w)).collect();
        for (g, e) in got.iter().zip(&expected) {
            assert_relative_eq!(g, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn rectangular_three_factor_against_dense_and_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f: Vec<Mat<f64>> = vec![random(&mut rng, 3, 2), random(&mut rng, 4, 5), random(&mut rng, 2, 3)];
        let op = KroneckerOperator::new(f.iter().map(banded).collect()).unwrap();
        assert_eq!(op.rows(), 24);
        assert_eq!(op.cols(), 30);
        let dense = f[2].kron(&f[1]).kron(&f[0]);
        let v: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (g, e) in op.matvec(&v).unwrap().iter().zip(dense.matvec(&v)) {
            assert_relative_eq!(*g, e, epsilon = 1e-13);
        }
        let fv = op.matvec(&v).unwrap();
        let ftw = op.matvec_transpose(&w).unwrap();
        let lhs: f64 = fv.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = v.iter().zip(&ftw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        assert!(matches!(op.matvec(&w), Err(Error::Shape { .. })));
    }

    #[test]
    fn scalar_cholesky_and_non_spd_direction() {
        let op = KroneckerOperator::new(vec![banded(&Mat::from_rows(&[vec![4.0]]))]).unwrap();
        let ch = kron_cholesky(&op).unwrap();
        assert_eq!(ch.factors()[0].get(0, 0), 2.0);
        let bad = KroneckerOperator::new(vec![
            BandedMatrix::identity(2),
            banded(&Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]])),
        ])
        .unwrap();
        match kron_cholesky(&bad) {
            Err(Error::Factorization { direction, .. }) => assert_eq!(direction, Some(1)),
            other => panic!("expected factorization error, got {other:?}"),
        }
    }

    #[test]
    fn diag_scale_examples() {
        assert_eq!(diag_scale(&[2.0, 3.0], &[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(diag_scale(&[1.0, 1.0], &[4.0, 5.0]).unwrap(), vec![4.0, 5.0]);
        let w = [4.0, 9.0, 0.25];
        let s: Vec<f64> = w.iter().map(|x: &f64| x.sqrt()).collect();
        let v = [1.0, -2.0, 3.0];
        let twice = diag_scale(&s, &diag_scale(&s, &v).unwrap()).unwrap();
        assert_eq!(twice, diag_scale(&w, &v).unwrap());
        assert!(diag_scale(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn lu_solvers_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f: Vec<Mat<f64>> = (0..3)
            .map(|k| {
                let mut m = random(&mut rng, 3 + k, 3 + k);
                for i in 0..3 + k {
                    m[(i, i)] += 4.0;
                }
                m
            })
            .collect();
        let op = KroneckerOperator::new(f.iter().map(banded).collect()).unwrap();
        let v: Vec<f64> = (0..op.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lu = KroneckerLu::new(&op).unwrap();
        let piv = KroneckerPivLu::new(&op).unwrap();
        let bv = op.matvec(&v).unwrap();
        let btv = op.matvec_transpose(&v).unwrap();
        for (a, b) in v.iter().zip(lu.solve(&bv, false).unwrap()) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        for (a, b) in v.iter().zip(lu.solve(&btv, true).unwrap()) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        for (a, b) in v.iter().zip(piv.solve(&bv, false).unwrap()) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        for (a, b) in v.iter().zip(piv.solve(&btv, true).unwrap()) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }
}
