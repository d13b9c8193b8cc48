//! Univariate and tensor-product B-spline/NURBS machinery.
//!
//! The parametric domain is always `[0, 1]^d`. Tensor-product indices are
//! linearized with parametric direction 0 varying fastest.

use std::collections::BTreeMap;

use crate::error::{check_len, Error, Result};
use crate::linalg::BandedMatrix;
use crate::scalar::Real;

/// Open (clamped) knot vector on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T> {
    knots: Vec<T>,
    degree: usize,
}

impl<T: Real> KnotVector<T> {
    pub fn new(knots: Vec<T>, degree: usize) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::InvalidKnots(format!(
                "{} knots cannot carry a degree-{p} basis",
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidKnots("knots must be non-decreasing".into()));
        }
        let (first, last) = (knots[0], knots[knots.len() - 1]);
        if first != T::zero() || last != T::one() {
            return Err(Error::InvalidKnots("knots must span exactly [0, 1]".into()));
        }
        let lead = knots.iter().take_while(|&&k| k == first).count();
        let trail = knots.iter().rev().take_while(|&&k| k == last).count();
        if lead != p + 1 || trail != p + 1 {
            return Err(Error::InvalidKnots(format!(
                "end knots must repeat exactly p+1 = {} times (found {lead} and {trail})",
                p + 1
            )));
        }
        let mut i = lead;
        while i < knots.len() - trail {
            let m = knots[i..].iter().take_while(|&&k| k == knots[i]).count();
            if m > p + 1 {
                return Err(Error::InvalidKnots(format!(
                    "interior knot {} has multiplicity {m} > p+1",
                    knots[i]
                )));
            }
            i += m;
        }
        Ok(Self { knots, degree })
    }

    /// Uniform mesh with `elements` elements and `C^continuity` at interior breaks.
    pub fn uniform(degree: usize, elements: usize, continuity: isize) -> Result<Self> {
        if elements == 0 {
            return Err(Error::Parameter("element count must be positive".into()));
        }
        let breaks: Vec<T> = (0..=elements)
            .map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(elements))
            .collect();
        let m = multiplicity_for(degree, continuity)?;
        Self::from_breaks(degree, &breaks, &vec![m; elements - 1])
    }

    /// Knot vector from strictly increasing breakpoints (first 0, last 1) and
    /// the multiplicity of every interior breakpoint.
    pub fn from_breaks(degree: usize, breaks: &[T], interior_multiplicity: &[usize]) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::InvalidKnots("need at least two breakpoints".into()));
        }
        check_len("interior multiplicities", breaks.len() - 2, interior_multiplicity.len())?;
        let mut knots = vec![breaks[0]; degree + 1];
        for (b, &m) in breaks[1..breaks.len() - 1].iter().zip(interior_multiplicity) {
            knots.extend(std::iter::repeat_n(*b, m));
        }
        knots.extend(std::iter::repeat_n(breaks[breaks.len() - 1], degree + 1));
        Self::new(knots, degree)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    #[inline]
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values.
    pub fn breaks(&self) -> Vec<T> {
        let mut b: Vec<T> = Vec::new();
        for &k in &self.knots {
            if b.last() != Some(&k) {
                b.push(k);
            }
        }
        b
    }

    /// Multiplicity of each interior breakpoint.
    pub fn interior_multiplicities(&self) -> Vec<usize> {
        let b = self.breaks();
        b[1..b.len() - 1]
            .iter()
            .map(|v| self.knots.iter().filter(|&&k| k == *v).count())
            .collect()
    }

    /// Continuity `p - m` at each interior breakpoint.
    pub fn interior_continuity(&self) -> Vec<isize> {
        self.interior_multiplicities()
            .into_iter()
            .map(|m| self.degree as isize - m as isize)
            .collect()
    }

    pub fn num_elements(&self) -> usize {
        self.breaks().len() - 1
    }

    /// `(lo, hi)` of every non-empty knot span.
    pub fn elements(&self) -> Vec<(T, T)> {
        self.breaks().windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn check_domain(&self, x: T) -> Result<()> {
        if x >= T::zero() && x <= T::one() {
            Ok(())
        } else {
            Err(Error::Domain(format!("parametric coordinate {x} outside [0, 1]")))
        }
    }

    /// Span index `s` with `t_s <= x < t_{s+1}` (the last non-empty span at `x = 1`).
    pub fn find_span(&self, x: T) -> usize {
        let n = self.num_basis();
        let p = self.degree;
        if x >= self.knots[n] {
            return n - 1;
        }
        if x <= self.knots[p] {
            return p;
        }
        // upper_bound over knots[p..=n]
        let slice = &self.knots[p..=n];
        let ub = slice.partition_point(|&k| k <= x);
        p + ub - 1
    }

    /// Span index `s` with `t_s < x <= t_{s+1}` (the first non-empty span at `x = 0`).
    pub fn find_span_left(&self, x: T) -> usize {
        let n = self.num_basis();
        let p = self.degree;
        if x <= self.knots[p] {
            return p;
        }
        if x >= self.knots[n] {
            return n - 1;
        }
        let slice = &self.knots[p..=n];
        let lb = slice.partition_point(|&k| k < x);
        p + lb - 1
    }

    /// Span used to evaluate at `x` on behalf of basis function `i`: the
    /// right-continuous span unless that span lies outside the support of `i`.
    pub fn span_for_basis(&self, i: usize, x: T) -> usize {
        let s = self.find_span(x);
        if s > i + self.degree || self.knots[s] == self.knots[s + 1] {
            self.find_span_left(x)
        } else {
            s
        }
    }

    /// Values of the `p + 1` basis functions supported on span `span`, at `x`.
    pub fn basis_in_span(&self, span: usize, x: T, out: &mut [T]) {
        let p = self.degree;
        debug_assert_eq!(out.len(), p + 1);
        let mut left = [T::zero(); 32];
        let mut right = [T::zero(); 32];
        assert!(p < 32, "degree too high");
        out[0] = T::one();
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = T::zero();
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// Basis values and first derivatives on span `span` at `x`.
    pub fn basis_and_derivative_in_span(&self, span: usize, x: T, values: &mut [T], derivs: &mut [T]) {
        let p = self.degree;
        self.basis_in_span(span, x, values);
        derivs.iter_mut().for_each(|d| *d = T::zero());
        if p == 0 {
            return;
        }
        // degree p-1 values on the same span, indices span-p+1 ..= span
        let lower = KnotVector {
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
            degree: p - 1,
        };
        let mut low = vec![T::zero(); p];
        lower.basis_in_span(span - 1, x, &mut low);
        let pt = T::from_usize_lossy(p);
        // N'_{i,p} = p/(t_{i+p}-t_i) N_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) N_{i+1,p-1}
        for k in 0..=p {
            let i = span - p + k;
            let mut d = T::zero();
            if k >= 1 {
                let den = self.knots[i + p] - self.knots[i];
                if den > T::zero() {
                    d += pt / den * low[k - 1];
                }
            }
            if k < p {
                let den = self.knots[i + p + 1] - self.knots[i + 1];
                if den > T::zero() {
                    d -= pt / den * low[k];
                }
            }
            derivs[k] = d;
        }
    }

    /// Index of the first possibly-nonzero basis function at `x` and the
    /// `p + 1` values there.
    pub fn eval_basis(&self, x: T) -> Result<(usize, Vec<T>)> {
        self.check_domain(x)?;
        let span = self.find_span(x);
        let mut out = vec![T::zero(); self.degree + 1];
        self.basis_in_span(span, x, &mut out);
        Ok((span - self.degree, out))
    }

    /// Greville abscissae `(t_{i+1} + … + t_{i+p}) / p`; element midpoints for `p = 0`.
    pub fn greville(&self) -> Vec<T> {
        let p = self.degree;
        let n = self.num_basis();
        if p == 0 {
            return (0..n)
                .map(|i| (self.knots[i] + self.knots[i + 1]) * T::lit(0.5))
                .collect();
        }
        let pt = T::from_usize_lossy(p);
        (0..n)
            .map(|i| {
                let s: T = self.knots[i + 1..=i + p].iter().copied().sum();
                (s / pt).max(T::zero()).min(T::one())
            })
            .collect()
    }
}

/// Multiplicity of an interior knot for `C^continuity` (`-1 <= continuity < p`).
pub fn multiplicity_for(degree: usize, continuity: isize) -> Result<usize> {
    if continuity < -1 || continuity >= degree as isize {
        return Err(Error::Parameter(format!(
            "continuity C^{continuity} not available for degree {degree}"
        )));
    }
    Ok((degree as isize - continuity) as usize)
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights affinely mapped to `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

/// `n`-point Gauss–Legendre rule (exact for polynomials of degree `2n - 1`).
pub fn gauss_legendre<T: Real>(n: usize) -> Result<QuadratureRule<T>> {
    if n == 0 {
        return Err(Error::Parameter("Gauss-Legendre rule needs n >= 1".into()));
    }
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence
            let (mut p0, mut p1) = (1.0f64, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        nodes: nodes.into_iter().map(T::lit).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    })
}

fn merged_breaks<T: Real>(a: &KnotVector<T>, b: &KnotVector<T>) -> Vec<T> {
    let mut all: Vec<T> = a.breaks().into_iter().chain(b.breaks()).collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup();
    all
}

fn accumulate_to_banded<T: Real>(rows: usize, cols: usize, entries: Vec<BTreeMap<usize, T>>) -> BandedMatrix<T> {
    let ranges: Vec<(usize, usize)> = entries
        .iter()
        .map(|row| match (row.keys().next(), row.keys().next_back()) {
            (Some(&a), Some(&b)) => (a, b + 1),
            _ => (0, 0),
        })
        .collect();
    let mut m = BandedMatrix::from_row_ranges(rows, cols, &ranges);
    for (i, row) in entries.into_iter().enumerate() {
        for (j, v) in row {
            m.add(i, j, v);
        }
    }
    m
}

/// Mass matrix `∫ row_i(x) col_j(x) dx` over `[0, 1]`, exact for the polynomial
/// integrand (Gauss rule on every span of the merged mesh).
pub fn univariate_mass<T: Real>(rows: &KnotVector<T>, cols: &KnotVector<T>) -> BandedMatrix<T> {
    let (pr, pc) = (rows.degree(), cols.degree());
    let nq = (pr + pc + 2).div_ceil(2);
    let rule = gauss_legendre::<T>(nq).expect("nq >= 1");
    let mut entries: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); rows.num_basis()];
    let mut vr = vec![T::zero(); pr + 1];
    let mut vc = vec![T::zero(); pc + 1];
    for w in merged_breaks(rows, cols).windows(2) {
        let mid = (w[0] + w[1]) * T::lit(0.5);
        let sr = rows.find_span(mid);
        let sc = cols.find_span(mid);
        for (x, wt) in rule.mapped(w[0], w[1]) {
            rows.basis_in_span(sr, x, &mut vr);
            cols.basis_in_span(sc, x, &mut vc);
            for (a, &ra) in vr.iter().enumerate() {
                let row = &mut entries[sr - pr + a];
                for (b, &cb) in vc.iter().enumerate() {
                    *row.entry(sc - pc + b).or_insert(T::zero()) += wt * ra * cb;
                }
            }
        }
    }
    accumulate_to_banded(rows.num_basis(), cols.num_basis(), entries)
}

/// Collocation matrix `B[i][j] = basis_j(points[i])`.
///
/// Row `i` is evaluated on the span that lies in the support of basis `i`,
/// which keeps Greville collocation unisolvent across `C^-1` breaks.
pub fn univariate_collocation<T: Real>(kv: &KnotVector<T>, points: &[T]) -> Result<BandedMatrix<T>> {
    let n = kv.num_basis();
    check_len("collocation points", n, points.len())?;
    let p = kv.degree();
    let mut vals = vec![T::zero(); p + 1];
    let mut spans = Vec::with_capacity(n);
    for (i, &x) in points.iter().enumerate() {
        kv.check_domain(x)?;
        spans.push(kv.span_for_basis(i, x));
    }
    let ranges: Vec<_> = spans.iter().map(|&s| (s - p, s + 1)).collect();
    let mut m = BandedMatrix::from_row_ranges(n, n, &ranges);
    for (i, (&x, &s)) in points.iter().zip(&spans).enumerate() {
        kv.basis_in_span(s, x, &mut vals);
        m.row_mut(i).1.copy_from_slice(&vals);
    }
    Ok(m)
}

/// Collocation matrix of a knot vector at its own Greville abscissae.
pub fn greville_collocation<T: Real>(kv: &KnotVector<T>) -> BandedMatrix<T> {
    univariate_collocation(kv, &kv.greville()).expect("Greville points match basis dimension")
}

/// Role a tensor-product space plays in a discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceRole {
    Trial,
    Interpolation,
}

/// Tensor-product B-spline space, optionally rational (NURBS).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpace<T> {
    directions: Vec<KnotVector<T>>,
    weights: Option<Vec<T>>,
    role: SpaceRole,
}

impl<T: Real> BasisSpace<T> {
    pub fn new(directions: Vec<KnotVector<T>>, role: SpaceRole) -> Result<Self> {
        if directions.is_empty() || directions.len() > 3 {
            return Err(Error::Parameter(format!(
                "parametric dimension {} not supported (1..=3)",
                directions.len()
            )));
        }
        Ok(Self {
            directions,
            weights: None,
            role,
        })
    }

    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        check_len("rational weights", self.dim(), weights.len())?;
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::Parameter("rational weights must be strictly positive".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    #[inline]
    pub fn directions(&self) -> &[KnotVector<T>] {
        &self.directions
    }

    #[inline]
    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    pub fn is_rational(&self) -> bool {
        self.weights.is_some()
    }

    pub fn role(&self) -> SpaceRole {
        self.role
    }

    /// Parametric dimension `d`.
    #[inline]
    pub fn param_dim(&self) -> usize {
        self.directions.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.directions.iter().map(KnotVector::num_basis).collect()
    }

    pub fn dim(&self) -> usize {
        self.shape().iter().product()
    }

    /// Number of local basis functions per tensor element, `Π (p_k + 1)`.
    pub fn local_dim(&self) -> usize {
        self.directions.iter().map(|k| k.degree() + 1).product()
    }

    pub fn num_elements(&self) -> usize {
        self.directions.iter().map(KnotVector::num_elements).product()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (k, &i) in multi.iter().enumerate() {
            idx += i * stride;
            stride *= self.directions[k].num_basis();
        }
        idx
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        self.directions
            .iter()
            .map(|kv| {
                let n = kv.num_basis();
                let i = idx % n;
                idx /= n;
                i
            })
            .collect()
    }

    /// Tensor-product Greville points, one per basis function, in linear order.
    pub fn greville_points(&self) -> Vec<Vec<T>> {
        let per_dir: Vec<Vec<T>> = self.directions.iter().map(KnotVector::greville).collect();
        (0..self.dim())
            .map(|lin| {
                self.multi_index(lin)
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| per_dir[k][i])
                    .collect()
            })
            .collect()
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        check_len("parametric point", self.param_dim(), x.len())?;
        for &c in x {
            if !(c >= T::zero() && c <= T::one()) {
                return Err(Error::Domain(format!("parametric point {x:?} outside [0,1]^d")));
            }
        }
        Ok(())
    }

    /// Nonzero basis functions at `x` on the given per-direction spans.
    pub fn eval_in_spans(&self, x: &[T], spans: &[usize], indices: &mut Vec<usize>, values: &mut Vec<T>) {
        let d = self.param_dim();
        let mut local: Vec<Vec<T>> = Vec::with_capacity(d);
        for (k, kv) in self.directions.iter().enumerate() {
            let mut v = vec![T::zero(); kv.degree() + 1];
            kv.basis_in_span(spans[k], x[k], &mut v);
            local.push(v);
        }
        indices.clear();
        values.clear();
        let firsts: Vec<usize> = self
            .directions
            .iter()
            .zip(spans)
            .map(|(kv, &s)| s - kv.degree())
            .collect();
        tensor_expand(self, &firsts, &local, indices, values);
        if let Some(w) = &self.weights {
            let mut denom = T::zero();
            for (v, &i) in values.iter_mut().zip(indices.iter()) {
                *v *= w[i];
                denom += *v;
            }
            for v in values.iter_mut() {
                *v /= denom;
            }
        }
    }

    /// Nonzero basis functions (B-spline or NURBS) at parametric point `x`.
    pub fn eval(&self, x: &[T]) -> Result<(Vec<usize>, Vec<T>)> {
        self.check_point(x)?;
        let spans: Vec<usize> = self
            .directions
            .iter()
            .zip(x)
            .map(|(kv, &c)| kv.find_span(c))
            .collect();
        let mut idx = Vec::new();
        let mut vals = Vec::new();
        self.eval_in_spans(x, &spans, &mut idx, &mut vals);
        Ok((idx, vals))
    }

    /// Evaluates `Σ coeffs_i basis_i(x)`.
    pub fn eval_function(&self, coeffs: &[T], x: &[T]) -> Result<T> {
        check_len("coefficient vector", self.dim(), coeffs.len())?;
        let (idx, vals) = self.eval(x)?;
        Ok(idx.iter().zip(&vals).map(|(&i, &v)| coeffs[i] * v).sum())
    }
}

/// Expands per-direction local values into tensor-product indices/values.
pub(crate) fn tensor_expand<T: Real>(
    space: &BasisSpace<T>,
    firsts: &[usize],
    local: &[Vec<T>],
    indices: &mut Vec<usize>,
    values: &mut Vec<T>,
) {
    let shape = space.shape();
    match local.len() {
        1 => {
            for (a, &va) in local[0].iter().enumerate() {
                indices.push(firsts[0] + a);
                values.push(va);
            }
        }
        2 => {
            for (b, &vb) in local[1].iter().enumerate() {
                for (a, &va) in local[0].iter().enumerate() {
                    indices.push(firsts[0] + a + shape[0] * (firsts[1] + b));
                    values.push(va * vb);
                }
            }
        }
        3 => {
            for (c, &vc) in local[2].iter().enumerate() {
                for (b, &vb) in local[1].iter().enumerate() {
                    let vbc = vb * vc;
                    for (a, &va) in local[0].iter().enumerate() {
                        indices.push(
                            firsts[0] + a + shape[0] * (firsts[1] + b + shape[1] * (firsts[2] + c)),
                        );
                        values.push(va * vbc);
                    }
                }
            }
        }
        _ => unreachable!("parametric dimension checked at construction"),
    }
}
