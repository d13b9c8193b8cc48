//! Restarted Krylov eigensolvers for matrix-free operators.
//!
//! Both solvers keep an orthonormal basis `V`, its image `W = A V` and the
//! projection `H = Vᵀ W`. The basis grows by the orthogonalized newest image
//! (Lanczos/Arnoldi with full reorthogonalization) and is thick-restarted
//! onto the wanted Ritz vectors when it reaches the subspace limit.

use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error};
use crate::linalg::{general_eigenvalues, inverse_iteration, orthonormalize_columns, symmetric_eigen, Mat};
use crate::scalar::{axpy, dot, norm2, scale, Real};

/// Relative imaginary part above which a Ritz value is reported as complex.
const COMPLEX_THRESHOLD: f64 = 1e-8;
/// Relative asymmetry `|⟨Au,v⟩ - ⟨u,Av⟩|` tolerated by the symmetric solver,
/// raised to `100 ε` in single precision.
const SYMMETRY_THRESHOLD: f64 = 1e-8;
/// Expansions between Rayleigh–Ritz checks before the basis is full.
const CHECK_EVERY: usize = 8;

/// Square operator known only through its action `x ↦ A x`.
pub trait MatrixFreeOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T]) -> crate::Result<Vec<T>>;
}

impl<T: Real> MatrixFreeOperator<T> for Mat<T> {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[T]) -> crate::Result<Vec<T>> {
        check_len("dense operator input", self.cols(), x.len())?;
        Ok(self.matvec(x))
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T, F: Fn(&[T]) -> Vec<T>> MatrixFreeOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T]) -> crate::Result<Vec<T>> {
        check_len("operator input", self.dim, x.len())?;
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions<T> {
    pub num_pairs: usize,
    /// Residual tolerance relative to the largest Ritz value.
    pub tol: T,
    /// Maximum number of operator applications.
    pub max_iter: usize,
    pub seed: u64,
    /// Subspace limit; `max(2m + 10, 40)` when unset.
    pub subspace: Option<usize>,
}

impl<T: Real> Default for EigenOptions<T> {
    fn default() -> Self {
        Self {
            num_pairs: 20,
            tol: T::lit(1e-8),
            max_iter: 5000,
            seed: 0,
            subspace: None,
        }
    }
}

impl<T: Real> EigenOptions<T> {
    pub fn with_pairs(num_pairs: usize) -> Self {
        Self {
            num_pairs,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult<T> {
    /// Real parts, non-increasing.
    pub eigenvalues: Vec<T>,
    pub imag: Vec<T>,
    /// Set when `|imag| >= 1e-8 |real|`; the eigenvector is then the real part.
    pub complex: Vec<bool>,
    /// Unit-norm eigenvectors of the operator.
    pub eigenvectors: Vec<Vec<T>>,
    /// `‖A v - λ v‖` for each pair.
    pub residuals: Vec<T>,
    /// Operator applications spent in the Krylov iteration.
    pub n_iter: usize,
    pub restarts: usize,
    pub solve_seconds: f64,
}

impl<T: Real> EigenResult<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn num_complex(&self) -> usize {
        self.complex.iter().filter(|&&c| c).count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EigenError<T: Real> {
    #[error("eigensolver stopped after {} operator applications with {converged} of {} pairs converged", .partial.n_iter, .partial.len())]
    NotConverged {
        partial: Box<EigenResult<T>>,
        converged: usize,
    },
    #[error("operator contract violated: {0}")]
    OperatorContract(String),
    #[error(transparent)]
    Operator(#[from] Error),
}

/// Largest eigenpairs of a symmetric operator.
pub fn solve_symmetric<T: Real, A: MatrixFreeOperator<T> + ?Sized>(
    op: &A,
    opts: &EigenOptions<T>,
) -> Result<EigenResult<T>, EigenError<T>> {
    check_options(op.dim(), opts)?;
    probe_symmetry(op, opts.seed)?;
    Krylov::new(op, opts, true).run()
}

/// Eigenpairs with the largest real parts of a general operator.
pub fn solve_nonsymmetric<T: Real, A: MatrixFreeOperator<T> + ?Sized>(
    op: &A,
    opts: &EigenOptions<T>,
) -> Result<EigenResult<T>, EigenError<T>> {
    check_options(op.dim(), opts)?;
    Krylov::new(op, opts, false).run()
}

fn check_options<T: Real>(n: usize, opts: &EigenOptions<T>) -> Result<(), Error> {
    if opts.num_pairs == 0 || opts.num_pairs > n {
        return Err(Error::Parameter(format!(
            "requested {} eigenpairs of a dimension-{n} operator",
            opts.num_pairs
        )));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::Parameter("eigensolver tolerance must be positive".into()));
    }
    if opts.max_iter == 0 {
        return Err(Error::Parameter("eigensolver iteration limit must be positive".into()));
    }
    Ok(())
}

fn random_unit<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> Vec<T> {
    let mut v: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
    let nrm = norm2(&v);
    scale(T::one() / nrm, &mut v);
    v
}

fn probe_symmetry<T: Real, A: MatrixFreeOperator<T> + ?Sized>(op: &A, seed: u64) -> Result<(), EigenError<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_5E11);
    let n = op.dim();
    let u = random_unit::<T>(&mut rng, n);
    let v = random_unit::<T>(&mut rng, n);
    let au = op.apply(&u)?;
    let av = op.apply(&v)?;
    let (a, b) = (dot(&au, &v), dot(&u, &av));
    let size = norm2(&au).max(norm2(&av));
    let tol = T::lit(SYMMETRY_THRESHOLD).max(T::lit(100.0) * T::epsilon());
    if (a - b).abs() > tol * size {
        return Err(EigenError::OperatorContract(format!(
            "operator is not symmetric: <Au,v> = {a}, <u,Av> = {b}"
        )));
    }
    Ok(())
}

struct Ritz<T> {
    values: Vec<Complex<T>>,
    /// Coefficient vectors in the current basis (only for the wanted/kept pairs).
    coeffs: Vec<Vec<Complex<T>>>,
}

struct Krylov<'a, T: Real, A: ?Sized> {
    op: &'a A,
    opts: &'a EigenOptions<T>,
    symmetric: bool,
    n: usize,
    max_dim: usize,
    v: Vec<Vec<T>>,
    w: Vec<Vec<T>>,
    h: Vec<Vec<T>>,
    rng: ChaCha8Rng,
    matvecs: usize,
    restarts: usize,
    start: Instant,
}

impl<'a, T: Real, A: MatrixFreeOperator<T> + ?Sized> Krylov<'a, T, A> {
    fn new(op: &'a A, opts: &'a EigenOptions<T>, symmetric: bool) -> Self {
        let n = op.dim();
        let m = opts.num_pairs;
        let default_dim = (2 * m + 10).max(40);
        let max_dim = opts.subspace.unwrap_or(default_dim).max(m + 2).min(n);
        Self {
            op,
            opts,
            symmetric,
            n,
            max_dim,
            v: Vec::with_capacity(max_dim),
            w: Vec::with_capacity(max_dim),
            h: Vec::with_capacity(max_dim),
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            matvecs: 0,
            restarts: 0,
            start: Instant::now(),
        }
    }

    /// Orthogonalizes `x` against the basis (classical Gram–Schmidt, twice).
    /// Returns `None` if `x` lies numerically in the span.
    fn orthogonalize(&self, mut x: Vec<T>) -> Option<Vec<T>> {
        let original = norm2(&x);
        if original == T::zero() {
            return None;
        }
        for _ in 0..2 {
            let coeffs: Vec<T> = self.v.iter().map(|q| dot(q, &x)).collect();
            for (q, &c) in self.v.iter().zip(&coeffs) {
                axpy(-c, q, &mut x);
            }
        }
        let nrm = norm2(&x);
        if nrm <= original * T::lit(1e-10) {
            return None;
        }
        scale(T::one() / nrm, &mut x);
        Some(x)
    }

    fn fresh_direction(&mut self) -> Vec<T> {
        loop {
            let r = random_unit(&mut self.rng, self.n);
            if let Some(x) = self.orthogonalize(r) {
                return x;
            }
        }
    }

    fn push(&mut self, q: Vec<T>, aq: Vec<T>) {
        let j = self.v.len();
        self.v.push(q);
        self.w.push(aq);
        for row in self.h.iter_mut() {
            row.push(T::zero());
        }
        self.h.push(vec![T::zero(); j + 1]);
        for i in 0..=j {
            self.h[i][j] = dot(&self.v[i], &self.w[j]);
            self.h[j][i] = dot(&self.v[j], &self.w[i]);
        }
    }

    fn projected(&self) -> Mat<T> {
        let j = self.v.len();
        let mut hm = Mat::from_fn(j, j, |a, b| self.h[a][b]);
        if self.symmetric {
            hm.symmetrize();
        }
        hm
    }

    /// Ritz values sorted by decreasing real part, with coefficient vectors for
    /// the first `wanted`.
    fn rayleigh_ritz(&self, wanted: usize) -> Result<Ritz<T>, EigenError<T>> {
        let hm = self.projected();
        let j = hm.rows();
        let wanted = wanted.min(j);
        if self.symmetric {
            let (vals, vecs) = symmetric_eigen(&hm)?;
            let values: Vec<Complex<T>> = vals.iter().rev().map(|&x| Complex::new(x, T::zero())).collect();
            let coeffs = (0..wanted)
                .map(|k| {
                    vecs.column(j - 1 - k)
                        .into_iter()
                        .map(|x| Complex::new(x, T::zero()))
                        .collect()
                })
                .collect();
            Ok(Ritz { values, coeffs })
        } else {
            let mut values = general_eigenvalues(&hm)?;
            values.sort_by(|a, b| {
                b.re.partial_cmp(&a.re)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
            });
            let coeffs = values[..wanted].iter().map(|&l| inverse_iteration(&hm, l)).collect();
            Ok(Ritz { values, coeffs })
        }
    }

    /// Ritz vector (real and imaginary parts) and residual norm.
    fn ritz_pair(&self, theta: Complex<T>, x: &[Complex<T>]) -> (Vec<T>, Vec<T>, T) {
        let n = self.n;
        let (mut yr, mut yi) = (vec![T::zero(); n], vec![T::zero(); n]);
        let (mut zr, mut zi) = (vec![T::zero(); n], vec![T::zero(); n]);
        for (k, c) in x.iter().enumerate() {
            axpy(c.re, &self.v[k], &mut yr);
            axpy(c.re, &self.w[k], &mut zr);
            if c.im != T::zero() {
                axpy(c.im, &self.v[k], &mut yi);
                axpy(c.im, &self.w[k], &mut zi);
            }
        }
        // r = W x - θ V x
        let mut res = T::zero();
        for i in 0..n {
            let rr = zr[i] - (theta.re * yr[i] - theta.im * yi[i]);
            let ri = zi[i] - (theta.re * yi[i] + theta.im * yr[i]);
            res += rr * rr + ri * ri;
        }
        (yr, yi, res.sqrt())
    }

    fn extract(&self, ritz: &Ritz<T>) -> (EigenResult<T>, usize) {
        let m = self.opts.num_pairs;
        let scale_ref = ritz.values[0].norm().max(T::min_positive_value());
        let limit = self.opts.tol * scale_ref;
        let mut out = EigenResult {
            eigenvalues: Vec::with_capacity(m),
            imag: Vec::with_capacity(m),
            complex: Vec::with_capacity(m),
            eigenvectors: Vec::with_capacity(m),
            residuals: Vec::with_capacity(m),
            n_iter: self.matvecs,
            restarts: self.restarts,
            solve_seconds: self.start.elapsed().as_secs_f64(),
        };
        let mut converged = 0;
        for k in 0..m.min(ritz.coeffs.len()) {
            let theta = ritz.values[k];
            let (mut yr, _, res) = self.ritz_pair(theta, &ritz.coeffs[k]);
            let nrm = norm2(&yr);
            if nrm > T::zero() {
                scale(T::one() / nrm, &mut yr);
            }
            if res <= limit {
                converged += 1;
            }
            out.eigenvalues.push(theta.re);
            out.imag.push(theta.im);
            out.complex
                .push(theta.im.abs() >= T::lit(COMPLEX_THRESHOLD) * theta.re.abs());
            out.eigenvectors.push(yr);
            out.residuals.push(res);
        }
        (out, converged)
    }

    fn restart(&mut self, ritz: &Ritz<T>) {
        let j = self.v.len();
        let mut cols: Vec<Vec<T>> = Vec::new();
        for x in &ritz.coeffs {
            cols.push(x.iter().map(|c| c.re).collect());
            if x.iter().any(|c| c.im != T::zero()) {
                cols.push(x.iter().map(|c| c.im).collect());
            }
        }
        let mut xm = Mat::zeros(j, cols.len());
        for (c, col) in cols.iter().enumerate() {
            xm.set_column(c, col);
        }
        let q = orthonormalize_columns(&xm);
        let k = q.cols();
        let combine = |basis: &[Vec<T>]| -> Vec<Vec<T>> {
            (0..k)
                .map(|c| {
                    let mut y = vec![T::zero(); self.n];
                    for (i, b) in basis.iter().enumerate() {
                        axpy(q[(i, c)], b, &mut y);
                    }
                    y
                })
                .collect()
        };
        let nv = combine(&self.v);
        let nw = combine(&self.w);
        let hm = Mat::from_fn(j, j, |a, b| self.h[a][b]);
        let hq = q.transpose().matmul(&hm).matmul(&q);
        self.v = nv;
        self.w = nw;
        self.h = (0..k).map(|a| (0..k).map(|b| hq[(a, b)]).collect()).collect();
        self.restarts += 1;
    }

    fn run(mut self) -> Result<EigenResult<T>, EigenError<T>> {
        let m = self.opts.num_pairs;
        let keep = m + (self.max_dim - m) / 2;
        let mut candidate = Some(random_unit(&mut self.rng, self.n));
        let mut since_check = 0;
        loop {
            let q = match candidate.take() {
                Some(q) => q,
                None => self.fresh_direction(),
            };
            let aq = self.op.apply(&q)?;
            check_len("operator output", self.n, aq.len())?;
            self.matvecs += 1;
            candidate = if self.v.len() + 1 < self.n {
                let next = aq.clone();
                self.push(q, aq);
                self.orthogonalize(next)
            } else {
                self.push(q, aq);
                None
            };
            since_check += 1;
            let full = self.v.len() == self.max_dim;
            let exhausted = self.matvecs >= self.opts.max_iter;
            let due = self.v.len() > m && since_check >= CHECK_EVERY;
            if !(full || exhausted || due) {
                continue;
            }
            since_check = 0;
            let wanted = if full { keep } else { m };
            let ritz = self.rayleigh_ritz(wanted)?;
            let (result, converged) = self.extract(&ritz);
            if converged == m {
                return Ok(result);
            }
            if exhausted || self.v.len() == self.n {
                return Err(EigenError::NotConverged {
                    partial: Box::new(result),
                    converged,
                });
            }
            if full {
                self.restart(&ritz);
            }
        }
    }
}
