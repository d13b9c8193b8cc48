//! Matrix-free isogeometric collocation of the covariance integral operator.
//!
//! The residual is collocated at the images of the trial Greville points:
//! `A_ij = ∫ Γ(x_i, x′) R_j(x′) dx′`, `Z_ij = R_j(x̂_i)`, and the operator
//! `Z⁻¹ A` is applied as interpolation at quadrature points, scaling by the
//! quadrature weights and `det DF`, a kernel product and an LU back-solve.

use rayon::prelude::*;

use crate::bspline::{gauss_legendre, univariate_collocation, BasisSpace, KnotVector};
use crate::eigen::MatrixFreeOperator;
use crate::error::{check_len, Error, Result};
use crate::geometry::{GeometryMap, PointSet};
use crate::kernel::CovarianceKernel;
use crate::linalg::{FullPivLu, Mat};
use crate::scalar::Real;
use crate::tensor::{KroneckerOperator, KroneckerPivLu};

#[derive(Debug, Clone)]
enum ZFactor<T> {
    Dense(FullPivLu<T>),
    Kronecker(KroneckerPivLu<T>),
}

#[derive(Debug, Clone)]
pub struct CollocationSetup<T> {
    trial: BasisSpace<T>,
    kernel: CovarianceKernel<T>,
    nq_per_dir: usize,
    local: usize,
    r_idx: Vec<usize>,
    r_vals: Vec<T>,
    weights: Vec<T>,
    jdet: Vec<T>,
    scaled: Vec<T>,
    quad_points: PointSet<T>,
    colloc_points: PointSet<T>,
    z: ZFactor<T>,
}

/// Tabulates the quadrature data and factorizes `Z` with full pivoting
/// (per direction when `bspline_z` is set).
pub fn build_collocation<T: Real>(
    trial: BasisSpace<T>,
    geometry: &GeometryMap<T>,
    kernel: CovarianceKernel<T>,
    nq_per_dir: usize,
    bspline_z: bool,
) -> Result<CollocationSetup<T>> {
    let d = trial.param_dim();
    check_len("geometry dimension", d, geometry.dim())?;
    if nq_per_dir == 0 {
        return Err(Error::Parameter("quadrature points per direction must be positive".into()));
    }
    if bspline_z && trial.is_rational() {
        return Err(Error::Parameter(
            "the Kronecker collocation matrix needs a non-rational trial space".into(),
        ));
    }
    let rule = gauss_legendre::<T>(nq_per_dir)?;
    // per direction: (node, weight, span), element-major
    let per_dir: Vec<Vec<Vec<(T, T, usize)>>> = trial
        .directions()
        .iter()
        .map(|kv| {
            kv.elements()
                .into_iter()
                .map(|(a, b)| {
                    let span = kv.find_span((a + b) * T::lit(0.5));
                    rule.mapped(a, b).map(|(x, w)| (x, w, span)).collect()
                })
                .collect()
        })
        .collect();
    let elem_counts: Vec<usize> = per_dir.iter().map(Vec::len).collect();
    let n_elem: usize = elem_counts.iter().product();
    let qpe = nq_per_dir.pow(d as u32);
    let nq_total = n_elem * qpe;
    let local = trial.local_dim();

    let mut r_idx = Vec::with_capacity(nq_total * local);
    let mut r_vals = Vec::with_capacity(nq_total * local);
    let mut weights = Vec::with_capacity(nq_total);
    let mut jdet = Vec::with_capacity(nq_total);
    let mut quad_points = PointSet::with_capacity(d, nq_total);
    let mut x = vec![T::zero(); d];
    let mut spans = vec![0usize; d];
    let (mut idx, mut vals) = (Vec::with_capacity(local), Vec::with_capacity(local));
    for e in 0..n_elem {
        let emulti = unravel(e, &elem_counts);
        for q in 0..qpe {
            let qmulti = unravel(q, &vec![nq_per_dir; d]);
            let mut w = T::one();
            for k in 0..d {
                let (node, wk, span) = per_dir[k][emulti[k]][qmulti[k]];
                x[k] = node;
                spans[k] = span;
                w *= wk;
            }
            trial.eval_in_spans(&x, &spans, &mut idx, &mut vals);
            r_idx.extend_from_slice(&idx);
            r_vals.extend_from_slice(&vals);
            let (p, det) = geometry.map_and_det(&x, &[])?;
            quad_points.push(&p);
            weights.push(w);
            jdet.push(det);
        }
    }
    let scaled: Vec<T> = weights.iter().zip(&jdet).map(|(&w, &j)| w * j).collect();

    let greville = trial.greville_points();
    let mut colloc_points = PointSet::with_capacity(d, greville.len());
    for g in &greville {
        colloc_points.push(&geometry.map_point(g)?);
    }
    let z = if bspline_z {
        let factors = trial
            .directions()
            .iter()
            .map(|kv: &KnotVector<T>| univariate_collocation(kv, &kv.greville()))
            .collect::<Result<Vec<_>>>()?;
        ZFactor::Kronecker(KroneckerPivLu::new(&KroneckerOperator::new(factors)?)?)
    } else {
        ZFactor::Dense(FullPivLu::new(&collocation_matrix(&trial, &greville)?)?)
    };
    Ok(CollocationSetup {
        trial,
        kernel,
        nq_per_dir,
        local,
        r_idx,
        r_vals,
        weights,
        jdet,
        scaled,
        quad_points,
        colloc_points,
        z,
    })
}

fn unravel(mut i: usize, counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .map(|&c| {
            let r = i % c;
            i /= c;
            r
        })
        .collect()
}

/// Dense `Z_ij = R_j(x̂_i)` at the given parametric points.
pub fn collocation_matrix<T: Real>(trial: &BasisSpace<T>, points: &[Vec<T>]) -> Result<Mat<T>> {
    let n = trial.dim();
    check_len("collocation points", n, points.len())?;
    let mut z = Mat::zeros(n, n);
    for (i, x) in points.iter().enumerate() {
        let (idx, vals) = trial.eval(x)?;
        for (&j, &v) in idx.iter().zip(&vals) {
            z[(i, j)] = v;
        }
    }
    Ok(z)
}

impl<T: Real> CollocationSetup<T> {
    /// Setup on a refined mesh of the geometry with a NURBS trial space and
    /// `nq_per_dir` Gauss points per direction (`p + 1` when `None`).
    pub fn from_mesh(
        geometry: &GeometryMap<T>,
        kernel: CovarianceKernel<T>,
        degree: usize,
        elements: &[usize],
        nq_per_dir: Option<usize>,
        bspline_z: bool,
    ) -> Result<Self> {
        let trial = geometry.nurbs_space(degree, elements)?;
        build_collocation(trial, geometry, kernel, nq_per_dir.unwrap_or(degree + 1), bspline_z)
    }

    pub fn dim(&self) -> usize {
        self.trial.dim()
    }

    pub fn trial(&self) -> &BasisSpace<T> {
        &self.trial
    }

    pub fn kernel(&self) -> &CovarianceKernel<T> {
        &self.kernel
    }

    pub fn nq_per_dir(&self) -> usize {
        self.nq_per_dir
    }

    pub fn num_quadrature_points(&self) -> usize {
        self.weights.len()
    }

    /// Parametric quadrature weights `W`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `det DF` at the quadrature points.
    pub fn jacobian_det(&self) -> &[T] {
        &self.jdet
    }

    pub fn quadrature_points(&self) -> &PointSet<T> {
        &self.quad_points
    }

    pub fn collocation_points(&self) -> &PointSet<T> {
        &self.colloc_points
    }

    /// Basis functions nonzero at quadrature point `q` and their values.
    pub fn basis_at_quadrature(&self, q: usize) -> (&[usize], &[T]) {
        let r = q * self.local..(q + 1) * self.local;
        (&self.r_idx[r.clone()], &self.r_vals[r])
    }

    /// `y_q = Σ_j R_j(x̂_q) v_j` at every quadrature point.
    pub fn interpolate_at_quadrature(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("collocation coefficients", self.dim(), v.len())?;
        let mut y = vec![T::zero(); self.num_quadrature_points()];
        self.interpolate_into(v, &mut y, false);
        Ok(y)
    }

    fn interpolate_into(&self, v: &[T], y: &mut [T], scaled: bool) {
        let loc = self.local;
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(q, yq)| {
            let idx = &self.r_idx[q * loc..(q + 1) * loc];
            let vals = &self.r_vals[q * loc..(q + 1) * loc];
            let mut s = T::zero();
            for (&j, &r) in idx.iter().zip(vals) {
                s += r * v[j];
            }
            *yq = if scaled { s * self.scaled[q] } else { s };
        });
    }

    /// `Z⁻¹ z` with the pivoted LU factors.
    pub fn solve_z(&self, z: &[T]) -> Result<Vec<T>> {
        check_len("collocation right-hand side", self.dim(), z.len())?;
        match &self.z {
            ZFactor::Dense(lu) => {
                let mut out = z.to_vec();
                let mut scratch = vec![T::zero(); z.len()];
                lu.solve_in_place(&mut out, &mut scratch);
                Ok(out)
            }
            ZFactor::Kronecker(lu) => lu.solve(z, false),
        }
    }

    /// `A′ v = Z⁻¹ A v`.
    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("collocation operator input", self.dim(), v.len())?;
        let mut y = vec![T::zero(); self.num_quadrature_points()];
        self.interpolate_into(v, &mut y, true);
        let z = self.kernel.apply_gamma(&self.quad_points, &self.colloc_points, &y)?;
        drop(y);
        self.solve_z(&z)
    }

    /// `(Σ_q W_q det DF_q φ(x_q)²)^{1/2}` for `φ = Σ v_j R_j`.
    pub fn l2_norm(&self, v: &[T]) -> Result<T> {
        let y = self.interpolate_at_quadrature(v)?;
        Ok(y.iter().zip(&self.scaled).map(|(&a, &w)| w * a * a).sum::<T>().sqrt())
    }

    /// `L²(D)` inner product of two trial functions by the setup quadrature.
    pub fn l2_inner(&self, u: &[T], v: &[T]) -> Result<T> {
        let yu = self.interpolate_at_quadrature(u)?;
        let yv = self.interpolate_at_quadrature(v)?;
        Ok(yu.iter().zip(&yv).zip(&self.scaled).map(|((&a, &b), &w)| w * a * b).sum())
    }

    /// Rescales `v` so that its trial function has unit `L²(D)` norm.
    pub fn normalize(&self, v: &[T]) -> Result<Vec<T>> {
        let nrm = self.l2_norm(v)?;
        if !(nrm > T::zero()) {
            return Err(Error::Domain("cannot normalize the zero function".into()));
        }
        Ok(v.iter().map(|&x| x / nrm).collect())
    }

    /// `Σ v_j R_j(x̂)`.
    pub fn eval_eigenfunction(&self, coeffs: &[T], x: &[T]) -> Result<T> {
        self.trial.eval_function(coeffs, x)
    }

    /// `Σ_q W_q det DF_q`, the quadrature volume of the domain.
    pub fn volume(&self) -> T {
        self.scaled.iter().copied().sum()
    }
}

impl<T: Real> MatrixFreeOperator<T> for CollocationSetup<T> {
    fn dim(&self) -> usize {
        self.trial.dim()
    }

    fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        CollocationSetup::apply(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{solve_nonsymmetric, EigenOptions};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_identity_z() {
        let g = GeometryMap::<f64>::unit(1).unwrap();
        let k = CovarianceKernel::exponential(1.0, 1.0).unwrap();
        let s = CollocationSetup::from_mesh(&g, k, 1, &[4], None, false).unwrap();
        let z = collocation_matrix(s.trial(), &s.trial().greville_points()).unwrap();
        assert_eq!(z, Mat::identity(5));
        if let ZFactor::Dense(lu) = &s.z {
            assert_eq!(lu.row_permutation(), &[0, 1, 2, 3, 4]);
        }
        let single = g.nurbs_space(2, &[1]).unwrap();
        let z2 = collocation_matrix(&single, &single.greville_points()).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.25, 0.5, 0.25], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(z2[(i, j)], expect[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn half_cylinder_quadrature_volume_and_constants() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        let k = CovarianceKernel::exponential(1.0, 5.0).unwrap();
        let s = CollocationSetup::from_mesh(&g, k, 2, &[4, 2, 2], Some(4), false).unwrap();
        let exact = std::f64::consts::PI * 1.5 * 10.0;
        assert_relative_eq!(s.volume(), exact, max_relative = 1e-8);
        let ones = s.interpolate_at_quadrature(&vec![1.0; s.dim()]).unwrap();
        for y in ones {
            assert!((y - 1.0).abs() < 1e-13);
        }
        for q in 0..s.num_quadrature_points() {
            assert!(s.basis_at_quadrature(q).0.len() <= 27);
        }
    }

    #[test]
    fn z_round_trip_and_kronecker_path() {
        let g = GeometryMap::<f64>::unit(2).unwrap();
        let k = CovarianceKernel::gaussian(1.0, 0.5).unwrap();
        let dense = CollocationSetup::from_mesh(&g, k, 4, &[3, 4], None, false).unwrap();
        let kron = CollocationSetup::from_mesh(&g, k, 4, &[3, 4], None, true).unwrap();
        let z = collocation_matrix(dense.trial(), &dense.trial().greville_points()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v: Vec<f64> = (0..dense.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let zv = z.matvec(&v);
        for (a, b) in v.iter().zip(dense.solve_z(&zv).unwrap()) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in dense.apply(&v).unwrap().iter().zip(kron.apply(&v).unwrap()) {
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
        let cyl = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 1.0).unwrap();
        assert!(CollocationSetup::from_mesh(&cyl, k, 2, &[2, 1, 1], None, true).is_err());
    }

    #[test]
    fn constant_kernel_rank_one() {
        let g = GeometryMap::<f64>::unit(1).unwrap();
        let k = CovarianceKernel::constant(1.0).unwrap();
        let s = CollocationSetup::from_mesh(&g, k, 3, &[5], None, false).unwrap();
        assert_eq!(s.apply(&vec![0.0; s.dim()]).unwrap(), vec![0.0; s.dim()]);
        let r = solve_nonsymmetric(&s, &EigenOptions::with_pairs(2)).unwrap();
        assert_relative_eq!(r.eigenvalues[0], 1.0, epsilon = 1e-10);
        assert!(r.eigenvalues[1].abs() < 1e-9);
        let v = s.normalize(&r.eigenvectors[0]).unwrap();
        let a = s.eval_eigenfunction(&v, &[0.1]).unwrap();
        let b = s.eval_eigenfunction(&v, &[0.9]).unwrap();
        assert_relative_eq!(a.abs(), 1.0, max_relative = 1e-8);
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }
}
