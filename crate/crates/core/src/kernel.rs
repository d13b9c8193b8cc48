//! Isotropic covariance kernels and row-at-a-time kernel products.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::geometry::PointSet;
use crate::scalar::Real;

/// Rows handed to one rayon task in [`CovarianceKernel::apply_gamma`].
const ROW_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `σ² exp(-r / b)`
    Exponential,
    /// `σ² exp(-r² / b²)`
    Gaussian,
    /// `σ²` everywhere (rank-one covariance).
    Constant,
}

impl KernelKind {
    /// Kernels with a kink on the diagonal.
    pub fn is_rough(self) -> bool {
        matches!(self, KernelKind::Exponential)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Exponential => "exponential",
            KernelKind::Gaussian => "gaussian",
            KernelKind::Constant => "constant",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(KernelKind::Exponential),
            "gaussian" | "gauss" => Ok(KernelKind::Gaussian),
            "constant" => Ok(KernelKind::Constant),
            other => Err(Error::Parameter(format!(
                "unknown kernel kind `{other}` (expected exponential, gaussian or constant)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceKernel<T> {
    kind: KernelKind,
    variance: T,
    correlation_length: T,
    inv_b: T,
    inv_b2: T,
}

impl<T: Real> CovarianceKernel<T> {
    pub fn new(kind: KernelKind, variance: T, correlation_length: T) -> Result<Self> {
        if !(variance > T::zero()) || !variance.is_finite() {
            return Err(Error::Parameter(format!("kernel variance must be positive (got {variance})")));
        }
        if !(correlation_length > T::zero()) || !correlation_length.is_finite() {
            return Err(Error::Parameter(format!(
                "correlation length must be positive (got {correlation_length})"
            )));
        }
        Ok(Self {
            kind,
            variance,
            correlation_length,
            inv_b: correlation_length.recip(),
            inv_b2: (correlation_length * correlation_length).recip(),
        })
    }

    pub fn exponential(variance: T, correlation_length: T) -> Result<Self> {
        Self::new(KernelKind::Exponential, variance, correlation_length)
    }

    pub fn gaussian(variance: T, correlation_length: T) -> Result<Self> {
        Self::new(KernelKind::Gaussian, variance, correlation_length)
    }

    pub fn constant(variance: T) -> Result<Self> {
        Self::new(KernelKind::Constant, variance, T::one())
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn variance(&self) -> T {
        self.variance
    }

    pub fn correlation_length(&self) -> T {
        self.correlation_length
    }

    #[inline]
    fn eval_unchecked(&self, x: &[T], y: &[T]) -> T {
        let mut r2 = T::zero();
        for (&a, &b) in x.iter().zip(y) {
            let d = a - b;
            r2 += d * d;
        }
        match self.kind {
            KernelKind::Exponential => self.variance * (-(r2.sqrt() * self.inv_b)).exp(),
            KernelKind::Gaussian => self.variance * (-(r2 * self.inv_b2)).exp(),
            KernelKind::Constant => self.variance,
        }
    }

    /// `Γ(x, y)`.
    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        check_len("kernel argument dimension", x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    /// `[Γ(x, t) for t in targets]`.
    pub fn row(&self, x: &[T], targets: &PointSet<T>) -> Result<Vec<T>> {
        check_len("kernel row point dimension", targets.dim(), x.len())?;
        Ok(targets.iter().map(|t| self.eval_unchecked(x, t)).collect())
    }

    /// `out_l = Σ_k Γ(target_l, source_k) v_k`, one row at a time.
    ///
    /// Rows are spread over the current rayon pool; each row is summed in
    /// source order, so the result does not depend on the worker count.
    pub fn apply_gamma(&self, sources: &PointSet<T>, targets: &PointSet<T>, v: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); targets.len()];
        self.apply_gamma_into(sources, targets, v, &mut out)?;
        Ok(out)
    }

    pub fn apply_gamma_into(
        &self,
        sources: &PointSet<T>,
        targets: &PointSet<T>,
        v: &[T],
        out: &mut [T],
    ) -> Result<()> {
        check_len("kernel product input", sources.len(), v.len())?;
        check_len("kernel product output", targets.len(), out.len())?;
        check_len("kernel point dimension", sources.dim(), targets.dim())?;
        if self.kind == KernelKind::Constant {
            let s = v.iter().copied().fold(T::zero(), |a, b| a + b) * self.variance;
            out.iter_mut().for_each(|o| *o = s);
            return Ok(());
        }
        let d = sources.dim();
        let src = sources.coords();
        out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, chunk)| {
            for (r, o) in chunk.iter_mut().enumerate() {
                let x = targets.point(c * ROW_CHUNK + r);
                let mut acc = T::zero();
                for (y, &vk) in src.chunks_exact(d).zip(v) {
                    acc += self.eval_unchecked(x, y) * vk;
                }
                *o = acc;
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{symmetric_eigen, Mat};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointSet<f64> {
        PointSet::new(d, (0..n * d).map(|_| rng.random_range(-1.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let e = CovarianceKernel::exponential(1.0, 2.0).unwrap();
        let g = CovarianceKernel::gaussian(1.0, 2.0).unwrap();
        let x = [0.3, -1.0];
        assert_eq!(e.eval(&x, &x).unwrap(), 1.0);
        assert_eq!(g.eval(&x, &x).unwrap(), 1.0);
        let y = [0.3, 1.0];
        assert_relative_eq!(e.eval(&x, &y).unwrap(), 0.36787944117144233, epsilon = 1e-15);
        assert_relative_eq!(g.eval(&x, &y).unwrap(), 0.36787944117144233, epsilon = 1e-15);
        assert!(matches!(e.eval(&x, &[1.0]), Err(Error::Shape { .. })));
        assert!(CovarianceKernel::exponential(0.0, 1.0).is_err());
        assert!(CovarianceKernel::gaussian(1.0, -1.0).is_err());
    }

    #[test]
    fn row_examples() {
        let e = CovarianceKernel::exponential(2.5, 0.7).unwrap();
        let x = [0.1];
        let single = PointSet::new(1, vec![0.1]).unwrap();
        assert_eq!(e.row(&x, &single).unwrap(), vec![2.5]);
        let step = 0.3;
        let line = PointSet::new(1, (0..5).map(|k| 0.1 + k as f64 * step).collect()).unwrap();
        let r = e.row(&x, &line).unwrap();
        for (k, v) in r.iter().enumerate() {
            assert_relative_eq!(*v, 2.5 * (-(k as f64) * step / 0.7).exp(), max_relative = 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_points(&mut rng, 100, 3);
        let p = [0.2, 0.4, 0.9];
        let row = e.row(&p, &t).unwrap();
        for (i, v) in row.iter().enumerate() {
            assert_eq!(*v, e.eval(&p, t.point(i)).unwrap());
        }
    }

    #[test]
    fn apply_gamma_against_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = CovarianceKernel::gaussian(1.3, 0.8).unwrap();
        let src = random_points(&mut rng, 50, 2);
        let tgt = random_points(&mut rng, 40, 2);
        let v: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = Mat::from_fn(40, 50, |i, j| k.eval(tgt.point(i), src.point(j)).unwrap());
        let expect = dense.matvec(&v);
        for (a, b) in k.apply_gamma(&src, &tgt, &v).unwrap().iter().zip(&expect) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        assert_eq!(k.apply_gamma(&src, &tgt, &[0.0; 50]).unwrap(), vec![0.0; 40]);
        let one = PointSet::new(2, vec![0.5, 0.5]).unwrap();
        assert_eq!(k.apply_gamma(&one, &one, &[2.0]).unwrap(), vec![2.6]);
        assert!(k.apply_gamma(&src, &tgt, &v[..3]).is_err());
    }

    #[test]
    fn apply_gamma_symmetric_and_thread_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = CovarianceKernel::exponential(1.0, 0.5).unwrap();
        let pts = random_points(&mut rng, 300, 3);
        let v: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gv = k.apply_gamma(&pts, &pts, &v).unwrap();
        let gw = k.apply_gamma(&pts, &pts, &w).unwrap();
        let a: f64 = gv.iter().zip(&w).map(|(x, y)| x * y).sum();
        let b: f64 = v.iter().zip(&gw).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-11 * a.abs().max(1.0));
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let multi = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let s = single.install(|| k.apply_gamma(&pts, &pts, &v).unwrap());
        let m = multi.install(|| k.apply_gamma(&pts, &pts, &v).unwrap());
        assert_eq!(s, m);
    }

    #[test]
    fn gram_matrices_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = random_points(&mut rng, 30, 3);
        for k in [
            CovarianceKernel::exponential(1.7, 0.9).unwrap(),
            CovarianceKernel::gaussian(1.7, 0.9).unwrap(),
        ] {
            let g = Mat::from_fn(30, 30, |i, j| k.eval(pts.point(i), pts.point(j)).unwrap());
            let (vals, _) = symmetric_eigen(&g).unwrap();
            assert!(vals[0] >= -1e-9 * 1.7);
            for i in 0..30 {
                for j in 0..30 {
                    assert!(g[(i, j)] > 0.0 && g[(i, j)] <= 1.7);
                }
            }
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Exponential".parse::<KernelKind>().unwrap(), KernelKind::Exponential);
        assert_eq!("gaussian".parse::<KernelKind>().unwrap(), KernelKind::Gaussian);
        assert!("matern".parse::<KernelKind>().is_err());
        assert_eq!(KernelKind::Gaussian.to_string(), "gaussian");
    }
}
