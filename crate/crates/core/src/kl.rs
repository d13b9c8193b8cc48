//! Truncated Karhunen–Loève expansions: sampling, normalization and
//! eigenvalue error metrics.
//!
//! Eigenfunctions are evaluated at parametric points `x̂`; the field value
//! belongs to the physical point `F(x̂)`.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bspline::{gauss_legendre, BasisSpace};
use crate::collocation::CollocationSetup;
use crate::eigen::EigenResult;
use crate::error::{check_len, Error, Result};
use crate::galerkin::GalerkinSetup;
use crate::geometry::{for_each_tensor_point, GeometryMap, PointSet};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Eigenfunction evaluator at a parametric point.
pub type ModeFn<T> = Arc<dyn Fn(&[T]) -> Result<T> + Send + Sync>;

/// Mean field evaluator at a parametric point.
pub type MeanFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

#[derive(Clone)]
pub enum Mean<T> {
    Constant(T),
    Field(MeanFn<T>),
}

impl<T: Real> Mean<T> {
    pub fn at(&self, x: &[T]) -> T {
        match self {
            Mean::Constant(c) => *c,
            Mean::Field(f) => f(x),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Mean<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mean::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Mean::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Clone)]
pub struct KLExpansion<T> {
    mean: Mean<T>,
    eigenvalues: Vec<T>,
    modes: Vec<ModeFn<T>>,
    truncation: usize,
    seed: u64,
}

impl<T: fmt::Debug> fmt::Debug for KLExpansion<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KLExpansion")
            .field("mean", &self.mean)
            .field("eigenvalues", &self.eigenvalues)
            .field("truncation", &self.truncation)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

impl<T: Real> KLExpansion<T> {
    /// Zero-mean expansion using every supplied pair.
    ///
    /// Negative eigenvalues down to `-1e-10 λ_1` are rounding noise and are
    /// clamped to zero; anything below is rejected.
    pub fn new(mut eigenvalues: Vec<T>, modes: Vec<ModeFn<T>>) -> Result<Self> {
        check_len("eigenfunction count", eigenvalues.len(), modes.len())?;
        let top = eigenvalues.first().copied().unwrap_or_else(T::zero).abs();
        let slack = T::lit(1e-10) * top;
        for (i, l) in eigenvalues.iter_mut().enumerate() {
            if !l.is_finite() || *l < -slack {
                return Err(Error::Domain(format!("eigenvalue {} is {l}; expected non-negative", i + 1)));
            }
            *l = l.max(T::zero());
        }
        if let Some(i) = eigenvalues.windows(2).position(|w| w[1] > w[0] + slack) {
            return Err(Error::Domain(format!("eigenvalues increase at position {}", i + 2)));
        }
        let truncation = eigenvalues.len();
        Ok(Self {
            mean: Mean::Constant(T::zero()),
            eigenvalues,
            modes,
            truncation,
            seed: 0,
        })
    }

    /// Modes `φ = Σ v_i b_i / √det DF` with `v = L⁻ᵀ v′`, sign-fixed.
    pub fn from_galerkin(setup: &GalerkinSetup<T>, res: &EigenResult<T>) -> Result<Self> {
        let mut modes: Vec<ModeFn<T>> = Vec::with_capacity(res.len());
        for v in &res.eigenvectors {
            let mut c = setup.back_transform(v)?;
            fix_sign(&mut c);
            let trial = setup.trial().clone();
            let geometry = setup.geometry().clone();
            modes.push(Arc::new(move |x: &[T]| {
                Ok(trial.eval_function(&c, x)? / geometry.jacobian_det(x)?.sqrt())
            }));
        }
        Self::new(res.eigenvalues.clone(), modes)
    }

    /// Modes `φ = Σ v_j R_j` rescaled to unit `L²(D)` norm, sign-fixed.
    /// Complex-flagged pairs are rejected.
    pub fn from_collocation(setup: &CollocationSetup<T>, res: &EigenResult<T>) -> Result<Self> {
        if let Some(i) = res.complex.iter().position(|&c| c) {
            return Err(Error::Domain(format!(
                "eigenpair {} is complex ({} + {}i)",
                i + 1,
                res.eigenvalues[i],
                res.imag[i]
            )));
        }
        let mut modes: Vec<ModeFn<T>> = Vec::with_capacity(res.len());
        for v in &res.eigenvectors {
            let mut c = setup.normalize(v)?;
            fix_sign(&mut c);
            let trial = setup.trial().clone();
            modes.push(Arc::new(move |x: &[T]| trial.eval_function(&c, x)));
        }
        Self::new(res.eigenvalues.clone(), modes)
    }

    /// Modes `Σ c_j N_j` (or `Σ c_j N_j / √det DF` with `inv_sqrt_det`) for
    /// coefficient vectors in `space`, sign-fixed and otherwise unscaled.
    pub fn from_spline_modes(
        space: &BasisSpace<T>,
        geometry: &GeometryMap<T>,
        eigenvalues: Vec<T>,
        coefficients: &[Vec<T>],
        inv_sqrt_det: bool,
    ) -> Result<Self> {
        let mut modes: Vec<ModeFn<T>> = Vec::with_capacity(coefficients.len());
        for c in coefficients {
            check_len("mode coefficients", space.dim(), c.len())?;
            let mut c = c.clone();
            fix_sign(&mut c);
            let space = space.clone();
            let geometry = geometry.clone();
            modes.push(Arc::new(move |x: &[T]| {
                let s = space.eval_function(&c, x)?;
                if inv_sqrt_det {
                    Ok(s / geometry.jacobian_det(x)?.sqrt())
                } else {
                    Ok(s)
                }
            }));
        }
        Self::new(eigenvalues, modes)
    }

    /// Rescales every mode to unit `L²(D)` norm (see [`Self::l2_gram`]).
    pub fn normalized(mut self, geometry: &GeometryMap<T>, space: &BasisSpace<T>, nq: usize) -> Result<Self> {
        let keep = self.truncation;
        self.truncation = self.modes.len();
        let g = self.l2_gram(geometry, space, nq)?;
        self.truncation = keep;
        for (i, f) in self.modes.iter_mut().enumerate() {
            let nrm = g[(i, i)].sqrt();
            if !(nrm > T::zero()) {
                return Err(Error::Domain(format!("mode {} has zero norm", i + 1)));
            }
            let inner = f.clone();
            *f = Arc::new(move |x: &[T]| Ok(inner(x)? / nrm));
        }
        Ok(self)
    }

    pub fn with_mean(mut self, mean: Mean<T>) -> Self {
        self.mean = mean;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_truncation(mut self, m: usize) -> Result<Self> {
        if m > self.eigenvalues.len() {
            return Err(Error::Truncation {
                requested: m,
                available: self.eigenvalues.len(),
            });
        }
        self.truncation = m;
        Ok(self)
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mean(&self) -> &Mean<T> {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn available(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eval_mode(&self, i: usize, x: &[T]) -> Result<T> {
        let f = self.modes.get(i).ok_or(Error::Truncation {
            requested: i + 1,
            available: self.modes.len(),
        })?;
        f(x)
    }

    /// `Σ_{i≤m} λ_i`.
    pub fn captured_variance(&self, m: usize) -> Result<T> {
        if m > self.eigenvalues.len() {
            return Err(Error::Truncation {
                requested: m,
                available: self.eigenvalues.len(),
            });
        }
        Ok(self.eigenvalues[..m].iter().copied().sum())
    }

    /// `Φ[i][j] = φ_i(x_j)` for the truncated modes.
    fn mode_table(&self, points: &PointSet<T>) -> Result<Vec<Vec<T>>> {
        (0..self.truncation)
            .into_par_iter()
            .map(|i| points.iter().map(|x| (self.modes[i])(x)).collect())
            .collect()
    }

    /// `Σ_{i≤M} λ_i φ_i(x)²`, the variance of the truncated field.
    pub fn pointwise_variance(&self, points: &PointSet<T>) -> Result<Vec<T>> {
        let table = self.mode_table(points)?;
        let mut var = vec![T::zero(); points.len()];
        for (row, &l) in table.iter().zip(&self.eigenvalues) {
            for (v, &p) in var.iter_mut().zip(row) {
                *v += l * p * p;
            }
        }
        Ok(var)
    }

    /// `μ(x) + Σ_{i≤M} √λ_i φ_i(x) ξ_i` for given `ξ`.
    pub fn realize(&self, points: &PointSet<T>, xi: &[T]) -> Result<Vec<T>> {
        check_len("standard normal draws", self.truncation, xi.len())?;
        let table = self.mode_table(points)?;
        Ok(self.combine(points, &table, xi))
    }

    fn combine(&self, points: &PointSet<T>, table: &[Vec<T>], xi: &[T]) -> Vec<T> {
        let mut out: Vec<T> = points.iter().map(|x| self.mean.at(x)).collect();
        for ((row, &l), &z) in table.iter().zip(&self.eigenvalues).zip(xi) {
            let c = l.sqrt() * z;
            for (o, &p) in out.iter_mut().zip(row) {
                *o += c * p;
            }
        }
        out
    }

    /// `draws × len(points)` matrix of independent realizations with
    /// i.i.d. standard normal `ξ_i`.
    ///
    /// Draw `r` uses its own ChaCha8 stream `r` of the seed, so rows do not
    /// depend on the thread count.
    pub fn sample_field(&self, points: &PointSet<T>, draws: usize, seed: u64) -> Result<Mat<T>> {
        let table = self.mode_table(points)?;
        let rows: Vec<Vec<T>> = (0..draws)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                let xi: Vec<T> = (0..self.truncation)
                    .map(|_| T::lit(StandardNormal.sample(&mut rng)))
                    .collect();
                self.combine(points, &table, &xi)
            })
            .collect();
        Ok(Mat::from_fn(draws, points.len(), |i, j| rows[i][j]))
    }

    /// Samples with the expansion's own seed.
    pub fn sample(&self, points: &PointSet<T>, draws: usize) -> Result<Mat<T>> {
        self.sample_field(points, draws, self.seed)
    }

    /// `G_ij = ∫_D φ_i φ_j dx` over the truncated modes, by `nq`-point Gauss
    /// rules on the elements of `space` mapped through `geometry`.
    pub fn l2_gram(&self, geometry: &GeometryMap<T>, space: &BasisSpace<T>, nq: usize) -> Result<Mat<T>> {
        let rule = gauss_legendre::<T>(nq)?;
        let per_dir: Vec<Vec<(T, T)>> = space
            .directions()
            .iter()
            .map(|kv| kv.elements().into_iter().flat_map(|(a, b)| rule.mapped(a, b).collect::<Vec<_>>()).collect())
            .collect();
        let m = self.truncation;
        let mut g = Mat::zeros(m, m);
        let mut vals = vec![T::zero(); m];
        for_each_tensor_point(&per_dir, |x, w| {
            let wd = w * geometry.jacobian_det(x)?;
            for (v, f) in vals.iter_mut().zip(&self.modes) {
                *v = f(x)?;
            }
            for i in 0..m {
                for j in 0..m {
                    g[(i, j)] += wd * vals[i] * vals[j];
                }
            }
            Ok(())
        })?;
        Ok(g)
    }

    /// `max_ij |G_ij − δ_ij|`.
    pub fn orthonormality_defect(&self, geometry: &GeometryMap<T>, space: &BasisSpace<T>, nq: usize) -> Result<T> {
        let g = self.l2_gram(geometry, space, nq)?;
        let mut worst = T::zero();
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let delta = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g[(i, j)] - delta).abs());
            }
        }
        Ok(worst)
    }
}

/// Flips `v` so that its first entry above `1e-8 max|v|` is positive.
pub fn fix_sign<T: Real>(v: &mut [T]) {
    let top = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let cut = T::lit(1e-8) * top;
    if let Some(&first) = v.iter().find(|x| x.abs() > cut) {
        if first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// `|λ_ref − λ_h| / λ_ref`.
pub fn relative_error<T: Real>(lambda_ref: T, lambda_h: T) -> Result<T> {
    if !(lambda_ref > T::zero()) {
        return Err(Error::Domain(format!("reference eigenvalue must be positive (got {lambda_ref})")));
    }
    Ok((lambda_ref - lambda_h).abs() / lambda_ref)
}

/// `(1/m) Σ_{i≤m} |λ_ref,i − λ_h,i| / λ_ref,i`.
pub fn mean_relative_error<T: Real>(reference: &[T], computed: &[T], m: usize) -> Result<T> {
    if m == 0 {
        return Err(Error::Domain("mean error over zero eigenvalues".into()));
    }
    if reference.len() < m || computed.len() < m {
        return Err(Error::Domain(format!(
            "need {m} eigenvalues, got {} reference and {} computed",
            reference.len(),
            computed.len()
        )));
    }
    let mut sum = T::zero();
    for (&r, &h) in reference.iter().zip(computed).take(m) {
        sum += relative_error(r, h)?;
    }
    Ok(sum / T::from_usize_lossy(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{solve_symmetric, EigenOptions};
    use crate::kernel::CovarianceKernel;

    fn constant_mode(v: f64) -> ModeFn<f64> {
        Arc::new(move |_x: &[f64]| Ok(v))
    }

    #[test]
    fn metric_triples() {
        assert_eq!(relative_error(2.0, 2.0).unwrap(), 0.0);
        assert!((relative_error(2.0f64, 1.9).unwrap() - 0.05).abs() <= 1e-15);
        assert_eq!(relative_error(1.0, 1.5).unwrap(), 0.5);
        assert!(relative_error(0.0, 1.0).is_err());
        assert!(relative_error(-1.0, 1.0).is_err());
        assert_eq!(mean_relative_error(&[1.0, 2.0], &[1.0, 2.0], 2).unwrap(), 0.0);
        assert!((mean_relative_error(&[1.0f64, 1.0], &[0.9, 1.1], 2).unwrap() - 0.1).abs() <= 1e-15);
        assert_eq!(
            mean_relative_error(&[2.0, 7.0], &[1.9, 3.0], 1).unwrap(),
            relative_error(2.0, 1.9).unwrap()
        );
        assert!(mean_relative_error(&[1.0], &[1.0, 2.0], 2).is_err());
        assert!(mean_relative_error(&[1.0, -1.0], &[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn empty_truncation_is_the_mean() {
        let kle = KLExpansion::new(vec![4.0], vec![constant_mode(0.5)])
            .unwrap()
            .with_mean(Mean::Constant(3.0))
            .with_truncation(0)
            .unwrap();
        let pts = PointSet::new(1, vec![0.0, 0.5, 1.0]).unwrap();
        let s = kle.sample_field(&pts, 4, 1).unwrap();
        for i in 0..4 {
            assert_eq!(s.row(i), &[3.0, 3.0, 3.0]);
        }
    }

    #[test]
    fn forced_draw() {
        let kle = KLExpansion::new(vec![4.0], vec![constant_mode(0.5)])
            .unwrap()
            .with_mean(Mean::Field(Arc::new(|x: &[f64]| x[0])));
        let pts = PointSet::new(2, vec![0.0, 0.0, 1.0, 2.0]).unwrap();
        assert_eq!(kle.realize(&pts, &[1.0]).unwrap(), vec![1.0, 2.0]);
        assert!(kle.realize(&pts, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn truncation_errors() {
        let kle = KLExpansion::new(vec![2.0, 1.0], vec![constant_mode(1.0), constant_mode(1.0)]).unwrap();
        assert_eq!(
            kle.clone().with_truncation(3).unwrap_err(),
            Error::Truncation { requested: 3, available: 2 }
        );
        assert!(KLExpansion::new(vec![1.0, 2.0], vec![constant_mode(1.0), constant_mode(1.0)]).is_err());
        assert!(KLExpansion::new(vec![1.0, -0.5], vec![constant_mode(1.0), constant_mode(1.0)]).is_err());
        let clamped = KLExpansion::new(vec![1.0, -1e-14], vec![constant_mode(1.0), constant_mode(1.0)]).unwrap();
        assert_eq!(clamped.eigenvalues(), &[1.0, 0.0]);
        assert_eq!(kle.captured_variance(1).unwrap(), 2.0);
        assert_eq!(kle.captured_variance(2).unwrap(), 3.0);
    }

    #[test]
    fn sampling_is_deterministic_across_threads() {
        let kle = KLExpansion::new(
            vec![2.0, 1.0],
            vec![
                Arc::new(|x: &[f64]| Ok(x[0])) as ModeFn<f64>,
                Arc::new(|x: &[f64]| Ok(1.0 - x[0])),
            ],
        )
        .unwrap();
        let pts = PointSet::new(1, vec![0.1, 0.4, 0.9]).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| kle.sample_field(&pts, 200, 7).unwrap());
        let b = four.install(|| kle.sample_field(&pts, 200, 7).unwrap());
        assert_eq!(a, b);
        let c = kle.sample_field(&pts, 200, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn monte_carlo_variance() {
        let g = GeometryMap::<f64>::unit(1).unwrap();
        let k = CovarianceKernel::exponential(1.0, 1.0).unwrap();
        let s = GalerkinSetup::from_mesh(g.clone(), k, 2, &[16], Default::default()).unwrap();
        let res = solve_symmetric(&s, &EigenOptions::with_pairs(6)).unwrap();
        let kle = KLExpansion::from_galerkin(&s, &res).unwrap();
        let pts = PointSet::new(1, vec![0.05, 0.3, 0.5, 0.81]).unwrap();
        let draws = 50_000;
        let samples = kle.sample_field(&pts, draws, 42).unwrap();
        let var = kle.pointwise_variance(&pts).unwrap();
        for (j, &v) in var.iter().enumerate() {
            let col: Vec<f64> = (0..draws).map(|i| samples[(i, j)]).collect();
            let m2: f64 = col.iter().map(|x| x * x).sum::<f64>() / draws as f64;
            let m4: f64 = col.iter().map(|x| x.powi(4)).sum::<f64>() / draws as f64;
            let se = ((m4 - m2 * m2) / draws as f64).sqrt();
            assert!((m2 - v).abs() < 3.0 * se, "point {j}: {m2} vs {v} (se {se})");
        }
        assert!(kle.orthonormality_defect(&g, s.trial(), 4).unwrap() < 1e-6);
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![1e-20, -0.5, 2.0];
        fix_sign(&mut v);
        assert_eq!(v, vec![-1e-20, 0.5, -2.0]);
        let mut z = vec![0.0, 0.0];
        fix_sign(&mut z);
        assert_eq!(z, vec![0.0, 0.0]);
    }
}
