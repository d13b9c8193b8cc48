//! Spline geometry maps `F: [0,1]^d -> D` and physical point sets.

use crate::bspline::{gauss_legendre, BasisSpace, KnotVector, SpaceRole};
use crate::error::{check_len, Error, Result};
use crate::linalg::BandedMatrix;
use crate::scalar::Real;
use crate::tensor::{KroneckerLu, KroneckerOperator};

/// Which one-sided limit to take at a knot where the map is only `C^0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Side {
    Left,
    #[default]
    Right,
}

/// Flat list of points of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<T> {
    dim: usize,
    coords: Vec<T>,
}

impl<T: Real> PointSet<T> {
    pub fn new(dim: usize, coords: Vec<T>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::Parameter(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<T>]) -> Result<Self> {
        let dim = points.first().map_or(1, Vec::len);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            check_len("point dimension", dim, p.len())?;
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            coords: Vec::with_capacity(dim * n),
        }
    }

    pub fn push(&mut self, p: &[T]) {
        debug_assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.dim)
    }
}

/// Tensor-product (rational) spline map from `[0,1]^d` onto a `d`-dimensional domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMap<T> {
    space: BasisSpace<T>,
    control_points: Vec<T>,
}

impl<T: Real> GeometryMap<T> {
    /// `control_points` holds `d` coordinates per basis function of `space`,
    /// in the space's linear order.
    pub fn new(space: BasisSpace<T>, control_points: Vec<T>) -> Result<Self> {
        let d = space.param_dim();
        check_len("geometry control points", space.dim() * d, control_points.len())?;
        Ok(Self {
            space,
            control_points,
        })
    }

    /// Affine map of `[0,1]^d` onto the box `Π [lo_k, hi_k]`.
    pub fn boxed(extents: &[(T, T)]) -> Result<Self> {
        let d = extents.len();
        if extents.iter().any(|&(lo, hi)| !(hi > lo)) {
            return Err(Error::Parameter("box extents must satisfy lo < hi".into()));
        }
        let kv = KnotVector::new(vec![T::zero(), T::zero(), T::one(), T::one()], 1)?;
        let space = BasisSpace::new(vec![kv; d], SpaceRole::Trial)?;
        let mut cps = Vec::with_capacity(space.dim() * d);
        for lin in 0..space.dim() {
            for (k, &i) in space.multi_index(lin).iter().enumerate() {
                cps.push(if i == 0 { extents[k].0 } else { extents[k].1 });
            }
        }
        Self::new(space, cps)
    }

    /// Identity map of the unit interval, square or cube.
    pub fn unit(d: usize) -> Result<Self> {
        Self::boxed(&vec![(T::zero(), T::one()); d])
    }

    /// Quadratic NURBS half-annulus swept along the axis.
    ///
    /// Direction 0 runs along the 180° arc (two rational quarter segments,
    /// `C^0` at the crown `ξ = 1/2`), direction 1 runs from the inner to
    /// the outer radius and direction 2 along the axis.
    pub fn half_cylinder(inner_r: T, outer_r: T, length: T) -> Result<Self> {
        if !(inner_r > T::zero() && outer_r > inner_r && length > T::zero()) {
            return Err(Error::Parameter(format!(
                "half cylinder needs 0 < inner_r < outer_r and length > 0 (got {inner_r}, {outer_r}, {length})"
            )));
        }
        let (z, o, h) = (T::zero(), T::one(), T::lit(0.5));
        let arc = KnotVector::new(vec![z, z, z, h, h, o, o, o], 2)?;
        let lin = KnotVector::new(vec![z, z, o, o], 1)?;
        let c = T::FRAC_1_SQRT_2();
        // unit-radius arc, clockwise from (-1, 0) over (0, 1) to (1, 0)
        let unit_arc = [(-o, z), (-o, o), (z, o), (o, o), (o, z)];
        let arc_w = [o, c, o, c, o];
        let space = BasisSpace::new(vec![arc, lin.clone(), lin], SpaceRole::Trial)?;
        let mut cps = Vec::with_capacity(space.dim() * 3);
        let mut weights = Vec::with_capacity(space.dim());
        for lin_idx in 0..space.dim() {
            let mi = space.multi_index(lin_idx);
            let r = if mi[1] == 0 { inner_r } else { outer_r };
            let zc = if mi[2] == 0 { z } else { length };
            let (ax, ay) = unit_arc[mi[0]];
            cps.extend_from_slice(&[r * ax, r * ay, zc]);
            weights.push(arc_w[mi[0]]);
        }
        let space = space.with_weights(weights)?;
        Self::new(space, cps)
    }

    pub fn space(&self) -> &BasisSpace<T> {
        &self.space
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.space.param_dim()
    }

    pub fn control_points(&self) -> &[T] {
        &self.control_points
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        check_len("parametric point", self.dim(), x.len())?;
        if x.iter().any(|&c| !(c >= T::zero() && c <= T::one())) {
            return Err(Error::Domain(format!("parametric point {x:?} outside [0,1]^d")));
        }
        Ok(())
    }

    fn spans(&self, x: &[T], sides: &[Side]) -> [usize; 3] {
        let mut s = [0; 3];
        for (k, kv) in self.space.directions().iter().enumerate() {
            s[k] = match sides.get(k).copied().unwrap_or_default() {
                Side::Right => kv.find_span(x[k]),
                Side::Left => kv.find_span_left(x[k]),
            };
        }
        s
    }

    /// Point and Jacobian (row `i` = ∂F_i/∂x̂) on the given one-sided spans.
    fn eval_raw(&self, x: &[T], sides: &[Side], point: &mut [T], jac: &mut [[T; 3]; 3]) {
        let d = self.dim();
        let spans = self.spans(x, sides);
        let dirs = self.space.directions();
        let mut vals = [[T::zero(); 8]; 3];
        let mut ders = [[T::zero(); 8]; 3];
        let mut nloc = [1usize; 3];
        let mut first = [0usize; 3];
        for k in 0..d {
            let p = dirs[k].degree();
            assert!(p < 8, "geometry degree too high");
            dirs[k].basis_and_derivative_in_span(spans[k], x[k], &mut vals[k][..=p], &mut ders[k][..=p]);
            nloc[k] = p + 1;
            first[k] = spans[k] - p;
        }
        let shape = self.space.shape();
        let weights = self.space.weights();
        let mut w_sum = T::zero();
        let mut dw = [T::zero(); 3];
        let mut a = [T::zero(); 3];
        let mut da = [[T::zero(); 3]; 3];
        for c in 0..nloc[2] {
            for b in 0..nloc[1] {
                for l in 0..nloc[0] {
                    let loc = [l, b, c];
                    let mut idx = 0;
                    let mut stride = 1;
                    for k in 0..d {
                        idx += (first[k] + loc[k]) * stride;
                        stride *= shape[k];
                    }
                    let w = weights.map_or(T::one(), |ws| ws[idx]);
                    let mut n = w;
                    let mut dn = [w; 3];
                    for k in 0..d {
                        n *= vals[k][loc[k]];
                        for (j, dnj) in dn.iter_mut().enumerate().take(d) {
                            *dnj *= if j == k { ders[k][loc[k]] } else { vals[k][loc[k]] };
                        }
                    }
                    w_sum += n;
                    for j in 0..d {
                        dw[j] += dn[j];
                    }
                    let cp = &self.control_points[idx * d..(idx + 1) * d];
                    for i in 0..d {
                        a[i] += n * cp[i];
                        for j in 0..d {
                            da[i][j] += dn[j] * cp[i];
                        }
                    }
                }
            }
        }
        for i in 0..d {
            point[i] = a[i] / w_sum;
            for j in 0..d {
                jac[i][j] = (da[i][j] - point[i] * dw[j]) / w_sum;
            }
        }
    }

    /// `F(x̂)`.
    pub fn map_point(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_point(x)?;
        let mut p = vec![T::zero(); self.dim()];
        let mut jac = [[T::zero(); 3]; 3];
        self.eval_raw(x, &[], &mut p, &mut jac);
        Ok(p)
    }

    /// Jacobian matrix `DF(x̂)` as rows.
    pub fn jacobian(&self, x: &[T], sides: &[Side]) -> Result<Vec<Vec<T>>> {
        self.check_point(x)?;
        let d = self.dim();
        let mut p = vec![T::zero(); d];
        let mut jac = [[T::zero(); 3]; 3];
        self.eval_raw(x, sides, &mut p, &mut jac);
        Ok((0..d).map(|i| jac[i][..d].to_vec()).collect())
    }

    /// `det DF(x̂)`, evaluated from the right at knots.
    pub fn jacobian_det(&self, x: &[T]) -> Result<T> {
        self.map_and_det(x, &[]).map(|(_, det)| det)
    }

    /// `F(x̂)` together with `det DF(x̂)` taken on the requested sides.
    pub fn map_and_det(&self, x: &[T], sides: &[Side]) -> Result<(Vec<T>, T)> {
        self.check_point(x)?;
        let d = self.dim();
        let mut p = vec![T::zero(); d];
        let mut jac = [[T::zero(); 3]; 3];
        self.eval_raw(x, sides, &mut p, &mut jac);
        let det = match d {
            1 => jac[0][0],
            2 => jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
            _ => {
                jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
                    - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                    + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0])
            }
        };
        if !(det > T::zero()) {
            return Err(Error::DegenerateGeometry {
                det: det.to_f64_lossy(),
                point: x.iter().map(|c| c.to_f64_lossy()).collect(),
            });
        }
        Ok((p, det))
    }

    /// Rational weight function `Σ w_i N_i(x̂)` (identically 1 for B-spline maps).
    pub fn weight(&self, x: &[T]) -> Result<T> {
        match self.space.weights() {
            None => Ok(T::one()),
            Some(_) => {
                let plain = BasisSpace::new(self.space.directions().to_vec(), SpaceRole::Trial)?;
                plain.eval_function(self.space.weights().expect("rational"), x)
            }
        }
    }

    /// `|D|` by Gauss quadrature with `nq` points per direction on every geometry element.
    pub fn volume(&self, nq: usize) -> Result<T> {
        let rule = gauss_legendre::<T>(nq)?;
        let per_dir: Vec<Vec<(T, T)>> = self
            .space
            .directions()
            .iter()
            .map(|kv| {
                kv.elements()
                    .into_iter()
                    .flat_map(|(a, b)| rule.mapped(a, b).collect::<Vec<_>>())
                    .collect()
            })
            .collect();
        let mut total = T::zero();
        for_each_tensor_point(&per_dir, |x, w| {
            total += w * self.jacobian_det(x)?;
            Ok(())
        })?;
        Ok(total)
    }

    /// Interior breakpoints of direction `k` with the geometry's continuity there.
    pub fn break_continuity(&self, k: usize) -> Vec<(T, isize)> {
        let kv = &self.space.directions()[k];
        let b = kv.breaks();
        b[1..b.len() - 1]
            .iter()
            .copied()
            .zip(kv.interior_continuity())
            .collect()
    }

    /// Knot vector of degree `degree` over `elements` uniform elements, with
    /// the geometry's breakpoints inserted.
    ///
    /// Interior continuity is `continuity` (capped at `degree - 1`), lowered to
    /// the geometry's continuity at geometry breakpoints; `geometry_c0` replaces
    /// the continuity wherever the geometry is only `C^0` (or less).
    pub fn refined_knots(
        &self,
        k: usize,
        degree: usize,
        elements: usize,
        continuity: isize,
        geometry_c0: Option<isize>,
    ) -> Result<KnotVector<T>> {
        if elements == 0 {
            return Err(Error::Parameter("element count must be positive".into()));
        }
        let target = continuity.min(degree as isize - 1);
        let geo = self.break_continuity(k);
        let eps = T::lit(64.0) * T::epsilon();
        let mut breaks: Vec<(T, isize)> = (1..elements)
            .map(|i| (T::from_usize_lossy(i) / T::from_usize_lossy(elements), target))
            .collect();
        for &(g, gc) in &geo {
            let c = match geometry_c0 {
                Some(c0) if gc <= 0 => c0,
                _ => target.min(gc),
            };
            match breaks.iter_mut().find(|(b, _)| (*b - g).abs() <= eps) {
                Some(entry) => *entry = (g, c),
                None => breaks.push((g, c)),
            }
        }
        breaks.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite breakpoints"));
        let mut pts = vec![T::zero()];
        pts.extend(breaks.iter().map(|b| b.0));
        pts.push(T::one());
        let mult = breaks
            .iter()
            .map(|&(_, c)| crate::bspline::multiplicity_for(degree, c.max(-1)))
            .collect::<Result<Vec<_>>>()?;
        KnotVector::from_breaks(degree, &pts, &mult)
    }

    fn check_elements(&self, elements: &[usize]) -> Result<()> {
        check_len("elements per direction", self.dim(), elements.len())
    }

    /// Maximally smooth B-spline space (non-rational) on the refined mesh.
    pub fn bspline_space(&self, degree: usize, elements: &[usize]) -> Result<BasisSpace<T>> {
        self.check_elements(elements)?;
        let dirs = (0..self.dim())
            .map(|k| self.refined_knots(k, degree, elements[k], degree as isize - 1, None))
            .collect::<Result<Vec<_>>>()?;
        BasisSpace::new(dirs, SpaceRole::Trial)
    }

    /// Interpolation space on the refined mesh: `C^continuity` at element
    /// interfaces and `C^-1` where the geometry is `C^0`.
    pub fn interpolation_space(&self, degree: usize, elements: &[usize], continuity: isize) -> Result<BasisSpace<T>> {
        self.check_elements(elements)?;
        let dirs = (0..self.dim())
            .map(|k| self.refined_knots(k, degree, elements[k], continuity, Some(-1)))
            .collect::<Result<Vec<_>>>()?;
        BasisSpace::new(dirs, SpaceRole::Interpolation)
    }

    /// NURBS space on the refined mesh whose weight function interpolates the
    /// geometry weight at the Greville points (exact when the refined space
    /// contains the geometry's).
    pub fn nurbs_space(&self, degree: usize, elements: &[usize]) -> Result<BasisSpace<T>> {
        let plain = self.bspline_space(degree, elements)?;
        if !self.space.is_rational() {
            return Ok(plain);
        }
        let op = KroneckerOperator::new(
            plain
                .directions()
                .iter()
                .map(crate::bspline::greville_collocation)
                .collect::<Vec<BandedMatrix<T>>>(),
        )?;
        let lu = KroneckerLu::new(&op)?;
        let values = plain
            .greville_points()
            .iter()
            .map(|x| self.weight(x))
            .collect::<Result<Vec<_>>>()?;
        let w = lu.solve(&values, false)?;
        plain.with_weights(w)
    }

    /// Largest distance between corners of any element of the given mesh.
    pub fn max_element_diameter(&self, space: &BasisSpace<T>) -> Result<T> {
        let d = self.dim();
        let elems: Vec<Vec<(T, T)>> = space.directions().iter().map(KnotVector::elements).collect();
        let counts: Vec<usize> = elems.iter().map(Vec::len).collect();
        let total: usize = counts.iter().product();
        let mut h = T::zero();
        let mut corners: Vec<Vec<T>> = Vec::with_capacity(1 << d);
        for e in 0..total {
            let mut rem = e;
            let idx: Vec<usize> = counts
                .iter()
                .map(|&c| {
                    let i = rem % c;
                    rem /= c;
                    i
                })
                .collect();
            corners.clear();
            for mask in 0..(1usize << d) {
                let x: Vec<T> = (0..d)
                    .map(|k| {
                        let (a, b) = elems[k][idx[k]];
                        if mask >> k & 1 == 0 {
                            a
                        } else {
                            b
                        }
                    })
                    .collect();
                corners.push(self.map_point(&x)?);
            }
            for i in 0..corners.len() {
                for j in i + 1..corners.len() {
                    let dist = corners[i]
                        .iter()
                        .zip(&corners[j])
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum::<T>()
                        .sqrt();
                    h = h.max(dist);
                }
            }
        }
        Ok(h)
    }
}

/// Calls `f(x, w)` for every point of the tensor grid built from per-direction
/// `(node, weight)` lists, direction 0 fastest.
pub(crate) fn for_each_tensor_point<T: Real>(
    per_dir: &[Vec<(T, T)>],
    mut f: impl FnMut(&[T], T) -> Result<()>,
) -> Result<()> {
    let d = per_dir.len();
    let counts: Vec<usize> = per_dir.iter().map(Vec::len).collect();
    let total: usize = counts.iter().product();
    let mut x = vec![T::zero(); d];
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut w = T::one();
        for k in 0..d {
            let (node, wk) = per_dir[k][idx[k]];
            x[k] = node;
            w *= wk;
        }
        f(&x, w)?;
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn box_maps() {
        let id = GeometryMap::<f64>::unit(2).unwrap();
        assert_eq!(id.map_point(&[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
        assert_relative_eq!(id.jacobian_det(&[0.1, 0.9]).unwrap(), 1.0, epsilon = 1e-15);
        let b = GeometryMap::<f64>::boxed(&[(0.0, 2.0), (0.0, 3.0)]).unwrap();
        let p = b.map_point(&[0.5, 0.5]).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(p[1], 1.5, epsilon = 1e-15);
        assert_relative_eq!(b.jacobian_det(&[0.2, 0.6]).unwrap(), 6.0, epsilon = 1e-14);
        assert!(matches!(id.map_point(&[1.2, 0.0]), Err(Error::Domain(_))));
        assert!(GeometryMap::<f64>::boxed(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn half_cylinder_corners_and_crown() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        assert_eq!(g.map_point(&[0.0, 0.0, 0.0]).unwrap(), g.control_points()[..3].to_vec());
        let crown = g.map_point(&[0.5, 0.3, 0.4]).unwrap();
        assert!(crown[0].abs() < 1e-14);
        assert_relative_eq!(crown[1], 1.3, epsilon = 1e-14);
        assert_relative_eq!(crown[2], 4.0, epsilon = 1e-14);
        assert!(GeometryMap::<f64>::half_cylinder(2.0, 1.0, 1.0).is_err());
        assert!(GeometryMap::<f64>::half_cylinder(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn half_cylinder_circle_exactness() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        for eta in [0.0, 0.25, 1.0] {
            let r = 1.0 + eta;
            for i in 0..=40 {
                let p = g.map_point(&[i as f64 / 40.0, eta, 0.7]).unwrap();
                assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn half_cylinder_volume() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        let exact = std::f64::consts::PI * (4.0 - 1.0) / 2.0 * 10.0;
        assert_relative_eq!(g.volume(12).unwrap(), exact, max_relative = 1e-8);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..0.99)).collect();
            if (x[0] - 0.5).abs() < 0.01 {
                continue;
            }
            let mut fd = [[0.0; 3]; 3];
            for j in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let (fp, fm) = (g.map_point(&xp).unwrap(), g.map_point(&xm).unwrap());
                for i in 0..3 {
                    fd[i][j] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            let det = fd[0][0] * (fd[1][1] * fd[2][2] - fd[1][2] * fd[2][1])
                - fd[0][1] * (fd[1][0] * fd[2][2] - fd[1][2] * fd[2][0])
                + fd[0][2] * (fd[1][0] * fd[2][1] - fd[1][1] * fd[2][0]);
            assert_relative_eq!(g.jacobian_det(&x).unwrap(), det, max_relative = 1e-6);
        }
    }

    #[test]
    fn half_cylinder_positive_at_gauss_points() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        let trial = g.bspline_space(3, &[6, 3, 2]).unwrap();
        let rule = gauss_legendre::<f64>(4).unwrap();
        let per_dir: Vec<Vec<(f64, f64)>> = trial
            .directions()
            .iter()
            .map(|kv| kv.elements().into_iter().flat_map(|(a, b)| rule.mapped(a, b).collect::<Vec<_>>()).collect())
            .collect();
        for_each_tensor_point(&per_dir, |x, _| {
            assert!(g.jacobian_det(x)? > 0.0);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn sided_jacobian_at_the_crown() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        let x = [0.5, 0.5, 0.5];
        let (_, right) = g.map_and_det(&x, &[Side::Right]).unwrap();
        let (_, left) = g.map_and_det(&x, &[Side::Left]).unwrap();
        let near_l = g.jacobian_det(&[0.5 - 1e-9, 0.5, 0.5]).unwrap();
        let near_r = g.jacobian_det(&[0.5 + 1e-9, 0.5, 0.5]).unwrap();
        assert_relative_eq!(left, near_l, max_relative = 1e-7);
        assert_relative_eq!(right, near_r, max_relative = 1e-7);
    }

    #[test]
    fn refined_knots_respect_geometry_breaks() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        let trial = g.refined_knots(0, 3, 4, 2, None).unwrap();
        assert_eq!(trial.interior_continuity(), vec![2, 0, 2]);
        let interp = g.refined_knots(0, 2, 4, 0, Some(-1)).unwrap();
        assert_eq!(interp.interior_continuity(), vec![0, -1, 0]);
        let odd = g.refined_knots(0, 2, 3, 1, None).unwrap();
        assert_eq!(odd.num_elements(), 4);
        let sq = GeometryMap::<f64>::unit(2).unwrap();
        let s = sq.interpolation_space(2, &[3, 2], 1).unwrap();
        assert_eq!(s.shape(), vec![5, 4]);
    }

    #[test]
    fn nurbs_space_reproduces_weight_function() {
        let g = GeometryMap::<f64>::half_cylinder(1.0, 2.0, 10.0).unwrap();
        let s = g.nurbs_space(2, &[4, 2, 2]).unwrap();
        assert!(s.is_rational());
        let plain = BasisSpace::new(s.directions().to_vec(), SpaceRole::Trial).unwrap();
        for x in [[0.1, 0.2, 0.3], [0.6, 0.9, 0.1], [0.5, 0.5, 0.5]] {
            assert_relative_eq!(
                plain.eval_function(s.weights().unwrap(), &x).unwrap(),
                g.weight(&x).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn element_diameter_of_box() {
        let b = GeometryMap::<f64>::boxed(&[(0.0, 3.0), (0.0, 4.0)]).unwrap();
        let s = b.bspline_space(2, &[1, 1]).unwrap();
        assert_relative_eq!(b.max_element_diameter(&s).unwrap(), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn point_set_layout() {
        let ps = PointSet::from_points(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps.point(1), &[3.0, 4.0]);
        assert!(PointSet::<f64>::new(2, vec![1.0]).is_err());
    }
}
