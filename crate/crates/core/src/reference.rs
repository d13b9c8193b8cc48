//! Dense assembled systems for small problems, a dense generalized
//! eigensolver, and the closed-form spectrum of the 1D exponential kernel.

use std::time::Instant;

use rayon::prelude::*;

use crate::bspline::{gauss_legendre, BasisSpace};
use crate::eigen::EigenResult;
use crate::error::{check_len, Error, Result};
use crate::galerkin::GalerkinSetup;
use crate::geometry::{GeometryMap, PointSet};
use crate::kernel::CovarianceKernel;
use crate::linalg::{general_eigenvalues, inverse_iteration, symmetric_eigen, FullPivLu, Mat};
use crate::scalar::{norm2, Real};

/// Default limit on the number of quadrature points of a dense assembly.
pub const QUADRATURE_CAP: usize = 20_000;
/// Largest system handed to the dense eigensolver.
pub const DENSE_SOLVE_CAP: usize = 2_000;
const BLOCK_ROWS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseMethod {
    GalerkinGauss,
    Collocation,
    GalerkinIbqDense,
}

impl DenseMethod {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, DenseMethod::Collocation)
    }
}

/// `A v = λ Z v` in assembled form.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem<T> {
    pub a: Mat<T>,
    pub z: Mat<T>,
    pub method: DenseMethod,
}

/// Dense eigenpairs together with the spline coefficients of each mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution<T> {
    pub result: EigenResult<T>,
    pub coefficients: Vec<Vec<T>>,
}

struct QuadTable<T> {
    points: PointSet<T>,
    weights: Vec<T>,
    det: Vec<T>,
    basis: Vec<(Vec<usize>, Vec<T>)>,
    /// Points per element; points are stored element by element.
    per_elem: usize,
}

/// Per-direction element intervals with their knot spans.
fn element_spans<T: Real>(trial: &BasisSpace<T>) -> Vec<Vec<(T, T, usize)>> {
    trial
        .directions()
        .iter()
        .map(|kv| {
            kv.elements()
                .into_iter()
                .map(|(a, b)| (a, b, kv.find_span((a + b) * T::lit(0.5))))
                .collect()
        })
        .collect()
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

fn quadrature_table<T: Real>(
    trial: &BasisSpace<T>,
    g: &GeometryMap<T>,
    nq: usize,
    cap: usize,
) -> Result<QuadTable<T>> {
    let d = trial.param_dim();
    let per_elem = nq.pow(d as u32);
    let requested = trial.num_elements() * per_elem;
    if requested > cap {
        return Err(Error::SizeCap {
            what: "quadrature points",
            requested,
            cap,
        });
    }
    let rule = gauss_legendre::<T>(nq)?;
    let elems = element_spans(trial);
    let counts: Vec<usize> = elems.iter().map(Vec::len).collect();
    let mut table = QuadTable {
        points: PointSet::with_capacity(d, requested),
        weights: Vec::with_capacity(requested),
        det: Vec::with_capacity(requested),
        basis: Vec::with_capacity(requested),
        per_elem,
    };
    let mut x = vec![T::zero(); d];
    let mut spans = vec![0; d];
    for e in 0..trial.num_elements() {
        let em = unravel(e, &counts);
        for q in 0..per_elem {
            let qm = unravel(q, &vec![nq; d]);
            let mut w = T::one();
            for k in 0..d {
                let (a, b, span) = elems[k][em[k]];
                let h = b - a;
                x[k] = a + h * (rule.nodes[qm[k]] + T::one()) * T::lit(0.5);
                w *= rule.weights[qm[k]] * h * T::lit(0.5);
                spans[k] = span;
            }
            let (p, det) = g.map_and_det(&x, &[])?;
            let (mut idx, mut vals) = (Vec::new(), Vec::new());
            trial.eval_in_spans(&x, &spans, &mut idx, &mut vals);
            table.points.push(&p);
            table.weights.push(w);
            table.det.push(det);
            table.basis.push((idx, vals));
        }
    }
    Ok(table)
}

/// Rule for `∫_0^1 ∫_0^1 f(x, y) dy dx` split along `x = y` into two
/// collapsed triangles, so integrands with a kink on the diagonal are
/// integrated at the rate of smooth ones.
fn diagonal_pair_rule<T: Real>(nq: usize) -> Result<Vec<(T, T, T)>> {
    let rule = gauss_legendre::<T>(nq)?;
    let unit: Vec<(T, T)> = rule.mapped(T::zero(), T::one()).collect();
    let mut out = Vec::with_capacity(2 * nq * nq);
    for &(u, wu) in &unit {
        for &(v, wv) in &unit {
            let (x, y, w) = (u, u * v, wu * wv * u);
            out.push((x, y, w));
            out.push((y, x, w));
        }
    }
    Ok(out)
}

/// Galerkin matrices for the trial functions `b_i / √det DF` by Gauss quadrature:
/// `A_ij = ∫∫ φ_i Γ φ_j`, `Z_ij = ∫ φ_i φ_j = ∫ b_i b_j dx̂`.
///
/// Pairs of distinct elements use the tensor Gauss rule; the pair of an
/// element with itself is split along the diagonal in every direction.
pub fn assemble_galerkin_dense<T: Real>(
    trial: &BasisSpace<T>,
    g: &GeometryMap<T>,
    k: &CovarianceKernel<T>,
    nq: usize,
) -> Result<DenseSystem<T>> {
    assemble_galerkin_dense_capped(trial, g, k, nq, QUADRATURE_CAP)
}

pub fn assemble_galerkin_dense_capped<T: Real>(
    trial: &BasisSpace<T>,
    g: &GeometryMap<T>,
    k: &CovarianceKernel<T>,
    nq: usize,
    cap: usize,
) -> Result<DenseSystem<T>> {
    check_len("geometry dimension", trial.param_dim(), g.dim())?;
    let t = quadrature_table(trial, g, nq, cap)?;
    let n = trial.dim();
    let nqt = t.weights.len();
    let pe = t.per_elem;
    // U_qi = w_q √det_q b_i(x_q), so that A = Uᵀ Γ U
    let u_scale: Vec<T> = t.weights.iter().zip(&t.det).map(|(&w, &j)| w * j.sqrt()).collect();
    let mut a = Mat::zeros(n, n);
    let mut z = Mat::zeros(n, n);
    for (q, (idx, vals)) in t.basis.iter().enumerate() {
        for (&i, &bi) in idx.iter().zip(vals) {
            for (&j, &bj) in idx.iter().zip(vals) {
                z[(i, j)] += t.weights[q] * bi * bj;
            }
        }
    }
    for start in (0..nqt).step_by(BLOCK_ROWS) {
        let end = (start + BLOCK_ROWS).min(nqt);
        // P[q, :] = Σ_r Γ(x_q, x_r) U[r, :] over points r of other elements
        let block: Vec<Vec<T>> = (start..end)
            .into_par_iter()
            .map(|q| {
                let xq = t.points.point(q);
                let own = q / pe;
                let mut row = vec![T::zero(); n];
                for r in 0..nqt {
                    if r / pe == own {
                        continue;
                    }
                    let gv = k.eval(xq, t.points.point(r)).expect("matching dimensions") * u_scale[r];
                    let (idx, vals) = &t.basis[r];
                    for (&j, &bj) in idx.iter().zip(vals) {
                        row[j] += gv * bj;
                    }
                }
                row
            })
            .collect();
        for (q, row) in (start..end).zip(&block) {
            let (idx, vals) = &t.basis[q];
            for (&i, &bi) in idx.iter().zip(vals) {
                let c = u_scale[q] * bi;
                for (aij, &pj) in a.row_mut(i).iter_mut().zip(row) {
                    *aij += c * pj;
                }
            }
        }
    }
    add_self_pairs(trial, g, k, nq, &mut a)?;
    a.symmetrize();
    z.symmetrize();
    Ok(DenseSystem {
        a,
        z,
        method: DenseMethod::GalerkinGauss,
    })
}

fn add_self_pairs<T: Real>(
    trial: &BasisSpace<T>,
    g: &GeometryMap<T>,
    k: &CovarianceKernel<T>,
    nq: usize,
    a: &mut Mat<T>,
) -> Result<()> {
    let d = trial.param_dim();
    let pair = diagonal_pair_rule::<T>(nq)?;
    let elems = element_spans(trial);
    let counts: Vec<usize> = elems.iter().map(Vec::len).collect();
    let np = pair.len();
    let total = np.pow(d as u32);
    let local = trial.local_dim();
    let contributions: Vec<(Vec<usize>, Vec<T>)> = (0..trial.num_elements())
        .into_par_iter()
        .map(|e| -> Result<(Vec<usize>, Vec<T>)> {
            let em = unravel(e, &counts);
            let spans: Vec<usize> = (0..d).map(|kd| elems[kd][em[kd]].2).collect();
            let mut acc = vec![T::zero(); local * local];
            let (mut x, mut y) = (vec![T::zero(); d], vec![T::zero(); d]);
            let (mut ix, mut bx) = (Vec::new(), Vec::new());
            let (mut iy, mut by) = (Vec::new(), Vec::new());
            for c in 0..total {
                let cm = unravel(c, &vec![np; d]);
                let mut w = T::one();
                for kd in 0..d {
                    let (lo, hi, _) = elems[kd][em[kd]];
                    let h = hi - lo;
                    let (u, v, wk) = pair[cm[kd]];
                    x[kd] = lo + h * u;
                    y[kd] = lo + h * v;
                    w *= wk * h * h;
                }
                let (px, jx) = g.map_and_det(&x, &[])?;
                let (py, jy) = g.map_and_det(&y, &[])?;
                trial.eval_in_spans(&x, &spans, &mut ix, &mut bx);
                trial.eval_in_spans(&y, &spans, &mut iy, &mut by);
                let f = w * jx.sqrt() * jy.sqrt() * k.eval(&px, &py)?;
                for (a_loc, &bi) in bx.iter().enumerate() {
                    let fi = f * bi;
                    for (b_loc, &bj) in by.iter().enumerate() {
                        acc[a_loc * local + b_loc] += fi * bj;
                    }
                }
            }
            Ok((ix, acc))
        })
        .collect::<Result<Vec<_>>>()?;
    for (idx, acc) in contributions {
        for (a_loc, &i) in idx.iter().enumerate() {
            for (b_loc, &j) in idx.iter().enumerate() {
                a[(i, j)] += acc[a_loc * local + b_loc];
            }
        }
    }
    Ok(())
}

/// Collocation matrices at the trial Greville images:
/// `A_ij = ∫ Γ(x_i, x′) R_j(x′) dx′`, `Z_ij = R_j(x̂_i)`.
pub fn assemble_collocation_dense<T: Real>(
    trial: &BasisSpace<T>,
    g: &GeometryMap<T>,
    k: &CovarianceKernel<T>,
    nq: usize,
) -> Result<DenseSystem<T>> {
    check_len("geometry dimension", trial.param_dim(), g.dim())?;
    let t = quadrature_table(trial, g, nq, QUADRATURE_CAP)?;
    let n = trial.dim();
    let greville = trial.greville_points();
    let mut z = Mat::zeros(n, n);
    let mut xs = Vec::with_capacity(n);
    for (i, x) in greville.iter().enumerate() {
        let (idx, vals) = trial.eval(x)?;
        for (&j, &v) in idx.iter().zip(&vals) {
            z[(i, j)] = v;
        }
        xs.push(g.map_point(x)?);
    }
    let rows: Vec<Vec<T>> = xs
        .par_iter()
        .map(|xi| {
            let mut row = vec![T::zero(); n];
            for (q, (idx, vals)) in t.basis.iter().enumerate() {
                let c = k.eval(xi, t.points.point(q)).expect("matching dimensions") * t.weights[q] * t.det[q];
                for (&j, &r) in idx.iter().zip(vals) {
                    row[j] += c * r;
                }
            }
            row
        })
        .collect();
    let a = Mat::from_rows(&rows);
    Ok(DenseSystem {
        a,
        z,
        method: DenseMethod::Collocation,
    })
}

/// `A = Mᵀ B̃⁻¹ J Γ J B̃⁻ᵀ M` and `Z` assembled densely from the Galerkin setup's factors.
pub fn assemble_ibq_dense<T: Real>(s: &GalerkinSetup<T>) -> Result<DenseSystem<T>> {
    let nt = s.interp_dim();
    if nt > DENSE_SOLVE_CAP * 4 {
        return Err(Error::SizeCap {
            what: "interpolation functions",
            requested: nt,
            cap: DENSE_SOLVE_CAP * 4,
        });
    }
    let dense = |f: &[crate::linalg::BandedMatrix<T>]| {
        let mut out = f[0].to_dense();
        for fk in &f[1..] {
            out = fk.to_dense().kron(&out);
        }
        out
    };
    let z = dense(s.mass().factors());
    let m = dense(s.mixed_mass().factors());
    let b = dense(s.collocation().factors());
    let j = s.jacobian_sqrt();
    let pts = s.points();
    let v = Mat::from_fn(nt, nt, |a, c| {
        j[a] * s.kernel().eval(pts.point(a), pts.point(c)).expect("matching dimensions") * j[c]
    });
    let lu = FullPivLu::new(&b)?;
    // G = B̃⁻¹ V B̃⁻ᵀ
    let mut bv = Mat::zeros(nt, nt);
    for c in 0..nt {
        bv.set_column(c, &lu.solve(&v.column(c)));
    }
    let mut gm = Mat::zeros(nt, nt);
    for r in 0..nt {
        gm.row_mut(r).copy_from_slice(&lu.solve(bv.row(r)));
    }
    let mut a = m.transpose().matmul(&gm).matmul(&m);
    a.symmetrize();
    Ok(DenseSystem {
        a,
        z,
        method: DenseMethod::GalerkinIbqDense,
    })
}

impl<T: Real> DenseSystem<T> {
    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    /// `L⁻¹ A L⁻ᵀ` (symmetric methods) or `Z⁻¹ A` (collocation).
    pub fn standard_form(&self) -> Result<Mat<T>> {
        let n = self.dim();
        check_len("dense Z", n, self.z.rows())?;
        if self.method.is_symmetric() {
            let l = self.z.cholesky()?;
            let mut t = Mat::zeros(n, n);
            for j in 0..n {
                t.set_column(j, &l.solve_lower(&self.a.column(j)));
            }
            let mut out = Mat::zeros(n, n);
            for i in 0..n {
                out.row_mut(i).copy_from_slice(&l.solve_lower(t.row(i)));
            }
            out.symmetrize();
            Ok(out)
        } else {
            let lu = FullPivLu::new(&self.z)?;
            let mut out = Mat::zeros(n, n);
            for j in 0..n {
                out.set_column(j, &lu.solve(&self.a.column(j)));
            }
            Ok(out)
        }
    }
}

/// Top `m` eigenpairs of `A v = λ Z v` by dense reduction to standard form.
pub fn solve_dense_generalized<T: Real>(sys: &DenseSystem<T>, m: usize) -> Result<DenseSolution<T>> {
    let start = Instant::now();
    let n = sys.dim();
    if n > DENSE_SOLVE_CAP {
        return Err(Error::SizeCap {
            what: "unknowns",
            requested: n,
            cap: DENSE_SOLVE_CAP,
        });
    }
    if m == 0 || m > n {
        return Err(Error::Parameter(format!("requested {m} eigenpairs of a dimension-{n} system")));
    }
    let ap = sys.standard_form()?;
    let mut result = EigenResult {
        eigenvalues: Vec::with_capacity(m),
        imag: Vec::with_capacity(m),
        complex: Vec::with_capacity(m),
        eigenvectors: Vec::with_capacity(m),
        residuals: Vec::with_capacity(m),
        n_iter: 0,
        restarts: 0,
        solve_seconds: 0.0,
    };
    let coefficients = if sys.method.is_symmetric() {
        let (vals, vecs) = symmetric_eigen(&ap)?;
        for k in 0..m {
            let v = vecs.column(n - 1 - k);
            let l = vals[n - 1 - k];
            result.residuals.push(residual(&ap, l, &v));
            result.eigenvalues.push(l);
            result.imag.push(T::zero());
            result.complex.push(false);
            result.eigenvectors.push(v);
        }
        let l = sys.z.cholesky()?;
        result.eigenvectors.iter().map(|v| l.solve_lower_transpose(v)).collect()
    } else {
        let mut vals = general_eigenvalues(&ap)?;
        vals.sort_by(|a, b| {
            b.re.partial_cmp(&a.re)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
        });
        for &l in &vals[..m] {
            let x = inverse_iteration(&ap, l);
            let mut v: Vec<T> = x.iter().map(|c| c.re).collect();
            let nrm = norm2(&v);
            v.iter_mut().for_each(|c| *c /= nrm);
            let mut res = T::zero();
            let ax_re = ap.matvec(&x.iter().map(|c| c.re).collect::<Vec<_>>());
            let ax_im = ap.matvec(&x.iter().map(|c| c.im).collect::<Vec<_>>());
            for i in 0..n {
                let r = num_complex::Complex::new(ax_re[i], ax_im[i]) - l * x[i];
                res += r.norm_sqr();
            }
            result.residuals.push(res.sqrt());
            result.eigenvalues.push(l.re);
            result.imag.push(l.im);
            result.complex.push(l.im.abs() >= T::lit(1e-8) * l.re.abs());
            result.eigenvectors.push(v);
        }
        result.eigenvectors.clone()
    };
    result.solve_seconds = start.elapsed().as_secs_f64();
    Ok(DenseSolution { result, coefficients })
}

fn residual<T: Real>(a: &Mat<T>, l: T, v: &[T]) -> T {
    let av = a.matvec(v);
    av.iter().zip(v).map(|(&x, &y)| (x - l * y) * (x - l * y)).sum::<T>().sqrt()
}

/// Largest `count` eigenvalues of `σ² exp(-|x - y| / b)` on an interval of
/// the given length, from the roots of the classical transcendental equations.
pub fn exponential_eigenvalues_1d(variance: f64, b: f64, length: f64, count: usize) -> Result<Vec<f64>> {
    if !(variance > 0.0 && b > 0.0 && length > 0.0) {
        return Err(Error::Parameter("variance, correlation length and interval length must be positive".into()));
    }
    let a = 0.5 * length;
    let c = 1.0 / b;
    let pi = std::f64::consts::PI;
    let mut omegas = Vec::with_capacity(count);
    let mut k = 0usize;
    while omegas.len() < count {
        let lo = k as f64 * pi / a;
        let mid = (k as f64 + 0.5) * pi / a;
        let hi = (k as f64 + 1.0) * pi / a;
        // even modes: c cos(ωa) - ω sin(ωa) = 0 on (kπ, kπ + π/2)/a
        omegas.push(bisect(|w| c * (w * a).cos() - w * (w * a).sin(), lo, mid));
        // odd modes: ω cos(ωa) + c sin(ωa) = 0 on (kπ + π/2, (k+1)π)/a
        omegas.push(bisect(|w| w * (w * a).cos() + c * (w * a).sin(), mid, hi));
        k += 1;
    }
    omegas.truncate(count);
    Ok(omegas.into_iter().map(|w| variance * 2.0 * c / (c * c + w * w)).collect())
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}
