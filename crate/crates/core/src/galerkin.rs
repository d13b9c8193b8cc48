//! Matrix-free Galerkin operator with interpolation-based quadrature.
//!
//! Trial functions are `b_i(x̂) / √det DF(x̂)` with plain B-splines `b_i`, so the
//! mass matrix is the parametric B-spline mass `Z = ⊗ Z_k`. The kernel
//! `√det DF(x̂) Γ(F x̂, F ŷ) √det DF(ŷ)` is interpolated in an auxiliary spline
//! space at its Greville points, which gives
//! `A = Mᵀ B̃⁻¹ J Γ J B̃⁻ᵀ M` with Kronecker `M` and `B̃`.

use std::str::FromStr;

use rayon::prelude::*;

use crate::bspline::{greville_collocation, univariate_mass, BasisSpace};
use crate::eigen::MatrixFreeOperator;
use crate::error::{check_len, Error, Result};
use crate::geometry::{GeometryMap, PointSet, Side};
use crate::kernel::{CovarianceKernel, KernelKind};
use crate::linalg::{BandedLu, Mat};
use crate::scalar::Real;
use crate::tensor::{diag_scale_in_place, KroneckerCholesky, KroneckerLu, KroneckerOperator};

/// Continuity of the interpolation space at ordinary element interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpContinuity {
    /// `C^0` for rough kernels, `C^{p-1}` otherwise.
    #[default]
    Auto,
    C0,
    Cpm1,
}

impl InterpContinuity {
    pub fn resolve(self, kind: KernelKind, degree: usize) -> isize {
        let smooth = degree as isize - 1;
        match self {
            InterpContinuity::C0 => 0.min(smooth),
            InterpContinuity::Cpm1 => smooth,
            InterpContinuity::Auto if kind.is_rough() => 0.min(smooth),
            InterpContinuity::Auto => smooth,
        }
    }
}

impl FromStr for InterpContinuity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "c0" => Ok(Self::C0),
            "cpm1" | "c^{p-1}" | "cp-1" => Ok(Self::Cpm1),
            other => Err(Error::Parameter(format!(
                "unknown interpolation continuity `{other}` (expected auto, c0 or cpm1)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinSetup<T> {
    trial: BasisSpace<T>,
    interp: BasisSpace<T>,
    geometry: GeometryMap<T>,
    kernel: CovarianceKernel<T>,
    mass: KroneckerOperator<T>,
    chol: KroneckerCholesky<T>,
    mixed: KroneckerOperator<T>,
    colloc: KroneckerOperator<T>,
    colloc_lu: KroneckerLu<T>,
    jacobian_sqrt: Vec<T>,
    points: PointSet<T>,
}

/// Assembles the Kronecker factors, Jacobian weights and Greville points.
pub fn build_galerkin<T: Real>(
    trial: BasisSpace<T>,
    interp: BasisSpace<T>,
    geometry: GeometryMap<T>,
    kernel: CovarianceKernel<T>,
) -> Result<GalerkinSetup<T>> {
    let d = trial.param_dim();
    check_len("interpolation space dimension", d, interp.param_dim())?;
    check_len("geometry dimension", d, geometry.dim())?;
    if trial.is_rational() {
        return Err(Error::Parameter("Galerkin trial space must be a plain B-spline space".into()));
    }
    for k in 0..d {
        if trial.directions()[k].breaks() != interp.directions()[k].breaks() {
            return Err(Error::Parameter(format!(
                "trial and interpolation meshes differ in direction {k}"
            )));
        }
    }
    if interp.dim() < trial.dim() {
        return Err(Error::Parameter(format!(
            "interpolation space dimension {} below trial dimension {}",
            interp.dim(),
            trial.dim()
        )));
    }
    let mass = KroneckerOperator::new(
        trial.directions().iter().map(|kv| univariate_mass(kv, kv)).collect(),
    )?;
    let chol = KroneckerCholesky::new(&mass)?;
    let mixed = KroneckerOperator::new(
        interp
            .directions()
            .iter()
            .zip(trial.directions())
            .map(|(ik, tk)| univariate_mass(ik, tk))
            .collect(),
    )?;
    let colloc = KroneckerOperator::new(interp.directions().iter().map(greville_collocation).collect())?;
    let colloc_lu = KroneckerLu::new(&colloc)?;

    // one-sided geometry evaluation at duplicated Greville points of C^-1 breaks
    let per_dir: Vec<Vec<(T, Side)>> = interp
        .directions()
        .iter()
        .map(|kv| {
            kv.greville()
                .into_iter()
                .enumerate()
                .map(|(i, g)| {
                    let side = if kv.span_for_basis(i, g) != kv.find_span(g) {
                        Side::Left
                    } else {
                        Side::Right
                    };
                    (g, side)
                })
                .collect()
        })
        .collect();
    let nt = interp.dim();
    let mut points = PointSet::with_capacity(d, nt);
    let mut jacobian_sqrt = Vec::with_capacity(nt);
    let mut x = vec![T::zero(); d];
    let mut sides = vec![Side::Right; d];
    for lin in 0..nt {
        for (k, &i) in interp.multi_index(lin).iter().enumerate() {
            (x[k], sides[k]) = per_dir[k][i];
        }
        let (p, det) = geometry.map_and_det(&x, &sides)?;
        points.push(&p);
        jacobian_sqrt.push(det.sqrt());
    }
    Ok(GalerkinSetup {
        trial,
        interp,
        geometry,
        kernel,
        mass,
        chol,
        mixed,
        colloc,
        colloc_lu,
        jacobian_sqrt,
        points,
    })
}

impl<T: Real> GalerkinSetup<T> {
    /// Setup on `elements` uniform elements per direction (geometry breaks
    /// inserted) with a maximally smooth degree-`degree` trial space.
    pub fn from_mesh(
        geometry: GeometryMap<T>,
        kernel: CovarianceKernel<T>,
        degree: usize,
        elements: &[usize],
        continuity: InterpContinuity,
    ) -> Result<Self> {
        let trial = geometry.bspline_space(degree, elements)?;
        let c = continuity.resolve(kernel.kind(), degree);
        let interp = geometry.interpolation_space(degree, elements, c)?;
        build_galerkin(trial, interp, geometry, kernel)
    }

    /// Trial dimension `N`.
    pub fn dim(&self) -> usize {
        self.trial.dim()
    }

    /// Interpolation dimension `Ñ`.
    pub fn interp_dim(&self) -> usize {
        self.interp.dim()
    }

    pub fn trial(&self) -> &BasisSpace<T> {
        &self.trial
    }

    pub fn interp(&self) -> &BasisSpace<T> {
        &self.interp
    }

    pub fn geometry(&self) -> &GeometryMap<T> {
        &self.geometry
    }

    pub fn kernel(&self) -> &CovarianceKernel<T> {
        &self.kernel
    }

    /// `Z = ⊗ Z_k`.
    pub fn mass(&self) -> &KroneckerOperator<T> {
        &self.mass
    }

    /// `L` with `Z = L Lᵀ`.
    pub fn cholesky(&self) -> &KroneckerCholesky<T> {
        &self.chol
    }

    /// `M = ⊗ M_k` (`Ñ × N`).
    pub fn mixed_mass(&self) -> &KroneckerOperator<T> {
        &self.mixed
    }

    /// `B̃ = ⊗ B̃_k`, rows indexed by Greville points.
    pub fn collocation(&self) -> &KroneckerOperator<T> {
        &self.colloc
    }

    /// Diagonal of `J`: `√det DF` at the interpolation Greville points.
    pub fn jacobian_sqrt(&self) -> &[T] {
        &self.jacobian_sqrt
    }

    /// Physical images of the interpolation Greville points.
    pub fn points(&self) -> &PointSet<T> {
        &self.points
    }

    /// `A′ v′ = L⁻¹ Mᵀ B̃⁻¹ J Γ J B̃⁻ᵀ M L⁻ᵀ v′`.
    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("Galerkin operator input", self.dim(), v.len())?;
        let w = self.chol.solve(v, true)?;
        let w = self.mixed.matvec(&w)?;
        let mut w = self.colloc_lu.solve(&w, true)?;
        diag_scale_in_place(&self.jacobian_sqrt, &mut w);
        let mut w = self.kernel.apply_gamma(&self.points, &self.points, &w)?;
        diag_scale_in_place(&self.jacobian_sqrt, &mut w);
        let w = self.colloc_lu.solve(&w, false)?;
        let w = self.mixed.matvec_transpose(&w)?;
        self.chol.solve(&w, false)
    }

    /// Spline coefficients `v = L⁻ᵀ v′` of an eigenvector of the standard form.
    pub fn back_transform(&self, v: &[T]) -> Result<Vec<T>> {
        self.chol.solve(v, true)
    }

    /// `Σ v_i b_i(x̂) / √det DF(x̂)`.
    pub fn eval_eigenfunction(&self, coeffs: &[T], x: &[T]) -> Result<T> {
        let s = self.trial.eval_function(coeffs, x)?;
        Ok(s / self.geometry.jacobian_det(x)?.sqrt())
    }

    /// `trace(A′)`, the sum of all `N` discrete eigenvalues.
    ///
    /// Uses `trace(A′) = Σ_kl J_k Γ_kl J_l S_lk` with the Kronecker matrix
    /// `S = B̃⁻ᵀ M Z⁻¹ Mᵀ B̃⁻¹`; cost is that of one operator application.
    pub fn trace(&self) -> Result<T> {
        let s_factors: Vec<Mat<T>> = (0..self.trial.param_dim())
            .map(|k| self.trace_factor(k))
            .collect::<Result<_>>()?;
        let n = self.interp_dim();
        let multi: Vec<Vec<usize>> = (0..n).map(|l| self.interp.multi_index(l)).collect();
        let total: T = (0..n)
            .into_par_iter()
            .with_min_len(16)
            .map(|k| {
                let xk = self.points.point(k);
                let mut acc = T::zero();
                for l in 0..n {
                    let mut s = T::one();
                    for (d, f) in s_factors.iter().enumerate() {
                        s *= f[(multi[l][d], multi[k][d])];
                    }
                    if s != T::zero() {
                        acc += self.jacobian_sqrt[l]
                            * self.kernel.eval(self.points.point(l), xk).expect("matching dimensions")
                            * s;
                    }
                }
                acc * self.jacobian_sqrt[k]
            })
            .collect::<Vec<T>>()
            .into_iter()
            .sum();
        Ok(total)
    }

    fn trace_factor(&self, k: usize) -> Result<Mat<T>> {
        let b = BandedLu::new(&self.colloc.factors()[k])?;
        let m = self.mixed.factors()[k].to_dense();
        let l = &self.chol.factors()[k];
        let (nt, n) = (m.rows(), m.cols());
        // X = B̃⁻ᵀ M, then Y = L⁻¹ Xᵀ so that S = Yᵀ Y
        let mut x = Mat::zeros(nt, n);
        for j in 0..n {
            let mut c = m.column(j);
            b.solve_transpose_in_place(&mut c);
            x.set_column(j, &c);
        }
        let mut y = Mat::zeros(n, nt);
        for i in 0..nt {
            let mut c = x.row(i).to_vec();
            l.solve_lower_in_place(&mut c);
            y.set_column(i, &c);
        }
        Ok(y.transpose().matmul(&y))
    }
}

impl<T: Real> MatrixFreeOperator<T> for GalerkinSetup<T> {
    fn dim(&self) -> usize {
        self.trial.dim()
    }

    fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        GalerkinSetup::apply(self, x)
    }
}
