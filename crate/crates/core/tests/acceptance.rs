//! Acceptance criteria, one `[PASS]`/`[FAIL]` line each.
//!
//! Runs as a plain binary (`harness = false`). Set `KLEXPAND_ACCEPT_STRICT=1`
//! to turn any failing line into a non-zero exit status.

use std::alloc::{GlobalAlloc, Layout, System};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use klexpand::bspline::{BasisSpace, KnotVector, SpaceRole};
use klexpand::cli::time_matvec;
use klexpand::collocation::CollocationSetup;
use klexpand::eigen::{solve_nonsymmetric, solve_symmetric, EigenOptions, EigenResult, MatrixFreeOperator};
use klexpand::galerkin::{GalerkinSetup, InterpContinuity};
use klexpand::geometry::GeometryMap;
use klexpand::kernel::CovarianceKernel;
use klexpand::kl::{mean_relative_error, relative_error, KLExpansion};
use klexpand::linalg::Mat;
use klexpand::reference::{
    assemble_collocation_dense, assemble_galerkin_dense, assemble_ibq_dense, exponential_eigenvalues_1d,
    solve_dense_generalized,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            if new_size >= layout.size() {
                let now = CURRENT.fetch_add(new_size - layout.size(), Ordering::Relaxed) + new_size - layout.size();
                PEAK.fetch_max(now, Ordering::Relaxed);
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

/// Bytes allocated by `f` above the level live when it starts.
fn high_water<R>(f: impl FnOnce() -> R) -> (R, usize) {
    let base = CURRENT.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let r = f();
    (r, PEAK.load(Ordering::SeqCst) - base)
}

struct Line {
    id: &'static str,
    pass: bool,
    text: String,
}

#[derive(Default)]
struct Report {
    lines: Vec<Line>,
}

impl Report {
    fn check(&mut self, id: &'static str, pass: bool, text: String) {
        println!("[{}] {id} {text}", if pass { "PASS" } else { "FAIL" });
        self.lines.push(Line { id, pass, text });
    }

    fn error(&mut self, id: &'static str, what: &str, e: impl std::fmt::Display) {
        self.check(id, false, format!("{what}: error: {e}"));
    }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn probe_columns(op: &dyn MatrixFreeOperator<f64>) -> Mat<f64> {
    let n = op.dim();
    let mut out = Mat::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        out.set_column(j, &op.apply(&e).unwrap());
    }
    out
}

fn rel_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut d = 0.0f64;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            d = d.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    d / b.max_abs()
}

fn quarter_annulus(r0: f64, r1: f64) -> GeometryMap<f64> {
    let arc = KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 2).unwrap();
    let lin = KnotVector::new(vec![0.0, 0.0, 1.0, 1.0], 1).unwrap();
    let space = BasisSpace::new(vec![arc, lin], SpaceRole::Trial)
        .unwrap()
        .with_weights(vec![1.0, FRAC_1_SQRT_2, 1.0, 1.0, FRAC_1_SQRT_2, 1.0])
        .unwrap();
    let unit = [(0.0, 1.0), (1.0, 1.0), (1.0, 0.0)];
    let mut cps = Vec::new();
    for r in [r0, r1] {
        for (x, y) in unit {
            cps.extend_from_slice(&[r * x, r * y]);
        }
    }
    GeometryMap::new(space, cps).unwrap()
}

fn options(m: usize) -> EigenOptions<f64> {
    EigenOptions::with_pairs(m)
}

fn ac1(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_g, mut worst_c) = (0.0f64, 0.0f64);
    let mut count = 0;
    let mut described = Vec::new();
    for case in 0..12 {
        let d = if case % 2 == 0 { 1 } else { 2 };
        let p = rng.random_range(1..=4usize);
        let geometry = match (d, case % 4) {
            (1, 0) => GeometryMap::unit(1).unwrap(),
            (1, _) => GeometryMap::boxed(&[(-0.5, rng.random_range(0.5..3.0))]).unwrap(),
            (_, 1) => GeometryMap::boxed(&[(0.0, rng.random_range(0.5..2.0)), (1.0, rng.random_range(1.5..3.0))]).unwrap(),
            _ => quarter_annulus(1.0, rng.random_range(1.5..2.5)),
        };
        let elements: Vec<usize> = if d == 1 {
            vec![rng.random_range(1..=30usize)]
        } else {
            let cap = (12 - p).max(1);
            vec![rng.random_range(1..=cap.min(6)), rng.random_range(1..=cap.min(6))]
        };
        let b = rng.random_range(0.3..2.0);
        let var = rng.random_range(0.5..2.0);
        let kernel = if rng.random_bool(0.5) {
            CovarianceKernel::exponential(var, b).unwrap()
        } else {
            CovarianceKernel::gaussian(var, b).unwrap()
        };
        let continuity = [InterpContinuity::Auto, InterpContinuity::C0, InterpContinuity::Cpm1][case % 3];
        let g = match GalerkinSetup::from_mesh(geometry.clone(), kernel, p, &elements, continuity) {
            Ok(s) => s,
            Err(e) => return rep.error("AC1", "Galerkin setup", e),
        };
        let nq = p + 1 + case % 2;
        let c = match CollocationSetup::from_mesh(&geometry, kernel, p, &elements, Some(nq), false) {
            Ok(s) => s,
            Err(e) => return rep.error("AC1", "collocation setup", e),
        };
        if g.dim() > 144 || c.dim() > 144 {
            continue;
        }
        let dense_g = assemble_ibq_dense(&g).and_then(|s| s.standard_form()).unwrap();
        worst_g = worst_g.max(rel_diff(&probe_columns(&g), &dense_g));
        let dense_c = assemble_collocation_dense(c.trial(), &geometry, &kernel, nq)
            .and_then(|s| s.standard_form())
            .unwrap();
        worst_c = worst_c.max(rel_diff(&probe_columns(&c), &dense_c));
        described.push(format!("{d}D p={p} e={elements:?} N={}", g.dim()));
        count += 1;
    }
    let secs = t.elapsed().as_secs_f64();
    rep.check(
        "AC1",
        count >= 10 && worst_g <= 1e-11 && worst_c <= 1e-10 && secs < 60.0,
        format!(
            "oracle equivalence on {count} random configs: Galerkin {worst_g:.2e} (<= 1e-11), collocation {worst_c:.2e} (<= 1e-10), {secs:.1}s (< 60s)"
        ),
    );
    println!("       configs: {}", described.join("; "));
}

fn ac2(rep: &mut Report) {
    let exact = exponential_eigenvalues_1d(1.0, 1.0, 1.0, 10).unwrap();
    let g = GeometryMap::unit(1).unwrap();
    let k = CovarianceKernel::exponential(1.0, 1.0).unwrap();
    let worst = |vals: &[f64]| -> (f64, usize) {
        let mut w = (0.0, 0);
        for (i, (&h, &x)) in vals.iter().zip(&exact).enumerate() {
            let e = relative_error(x, h).unwrap();
            if e > w.0 {
                w = (e, i + 1);
            }
        }
        w
    };
    let t = Instant::now();
    match GalerkinSetup::from_mesh(g.clone(), k, 2, &[128], InterpContinuity::Auto)
        .map_err(|e| e.to_string())
        .and_then(|s| solve_symmetric(&s, &options(10)).map_err(|e| e.to_string()))
    {
        Ok(r) => {
            let (e, i) = worst(&r.eigenvalues);
            let secs = t.elapsed().as_secs_f64();
            rep.check(
                "AC2",
                e <= 1e-4 && secs < 60.0,
                format!("analytic 1D exponential, Galerkin IBQ p=2 128 elements: max rel error {e:.2e} at mode {i} (<= 1e-4), {secs:.1}s"),
            );
        }
        Err(e) => rep.error("AC2", "Galerkin", e),
    }
    let t = Instant::now();
    match CollocationSetup::from_mesh(&g, k, 2, &[128], None, false)
        .map_err(|e| e.to_string())
        .and_then(|s| solve_nonsymmetric(&s, &options(10)).map_err(|e| e.to_string()))
    {
        Ok(r) => {
            let (e, i) = worst(&r.eigenvalues);
            let secs = t.elapsed().as_secs_f64();
            rep.check(
                "AC2",
                e <= 1e-3 && secs < 60.0,
                format!("analytic 1D exponential, collocation p=2 128 elements: max rel error {e:.2e} at mode {i} (<= 1e-3), {secs:.1}s"),
            );
        }
        Err(e) => rep.error("AC2", "collocation", e),
    }
    let trial = g.bspline_space(2, &[128]).unwrap();
    let sys = assemble_galerkin_dense(&trial, &g, &k, 3).unwrap();
    let sol = solve_dense_generalized(&sys, 10).unwrap();
    println!(
        "       info: dense Gauss Galerkin on the same space: max rel error {:.2e}",
        worst(&sol.result.eigenvalues).0
    );
}

/// Relative spread `max|φ - φ̄| / |φ̄|` of a mode over a parametric grid.
fn spread(kle: &KLExpansion<f64>, d: usize) -> f64 {
    let ticks = [0.0, 0.13, 0.5, 0.77, 1.0];
    let mut vals = Vec::new();
    let total = ticks.len().pow(d as u32);
    for i in 0..total {
        let mut x = vec![0.0; d];
        let mut r = i;
        for xk in x.iter_mut() {
            *xk = ticks[r % ticks.len()];
            r /= ticks.len();
        }
        vals.push(kle.eval_mode(0, &x).unwrap());
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    max_abs(vals.iter().map(|v| v - mean)) / mean.abs()
}

fn ac3(rep: &mut Report) {
    let var = 2.5;
    let k = CovarianceKernel::constant(var).unwrap();
    let hc = GeometryMap::half_cylinder(1.0, 2.0, 10.0).unwrap();
    type Case = (&'static str, GeometryMap<f64>, f64, Vec<usize>, Vec<usize>);
    let cases: Vec<Case> = vec![
        ("1D [0,3]", GeometryMap::boxed(&[(0.0, 3.0)]).unwrap(), 3.0, vec![7], vec![7]),
        ("2D [0,2]x[0,1.5]", GeometryMap::boxed(&[(0.0, 2.0), (0.0, 1.5)]).unwrap(), 3.0, vec![5, 4], vec![5, 4]),
        ("2D quarter annulus", quarter_annulus(1.0, 2.0), 0.75 * PI, vec![128, 32], vec![8, 4]),
        ("3D half cylinder", hc, 15.0 * PI, vec![64, 16, 1], vec![16, 4, 2]),
    ];
    for (name, g, vol, eg, ec) in cases {
        let d = g.dim();
        let target = var * vol;
        let check = |rep: &mut Report, method: &str, e: &[usize], r: &EigenResult<f64>, kle: KLExpansion<f64>| {
            let rel = relative_error(target, r.eigenvalues[0]).unwrap();
            let rest = max_abs(r.eigenvalues[1..].iter().copied()) / r.eigenvalues[0];
            let s = spread(&kle, d);
            rep.check(
                "AC3",
                rel <= 1e-8 && rest <= 1e-8 && s <= 1e-6,
                format!(
                    "rank one, {method}, {name} e={e:?}: lambda1 rel error {rel:.2e} (<= 1e-8), |lambda2,3|/lambda1 {rest:.1e} (<= 1e-8), eigenfunction spread {s:.1e} (<= 1e-6)"
                ),
            );
        };
        match GalerkinSetup::from_mesh(g.clone(), k, 2, &eg, InterpContinuity::Auto) {
            Ok(s) => match solve_symmetric(&s, &options(3)) {
                Ok(r) => {
                    let kle = KLExpansion::from_galerkin(&s, &r).unwrap();
                    check(rep, "Galerkin IBQ", &eg, &r, kle);
                }
                Err(e) => rep.error("AC3", name, e),
            },
            Err(e) => rep.error("AC3", name, e),
        }
        match CollocationSetup::from_mesh(&g, k, 2, &ec, None, false) {
            Ok(s) => match solve_nonsymmetric(&s, &options(3)) {
                Ok(r) => {
                    let kle = KLExpansion::from_collocation(&s, &leading(&r)).unwrap();
                    check(rep, "collocation", &ec, &r, kle);
                }
                Err(e) => rep.error("AC3", name, e),
            },
            Err(e) => rep.error("AC3", name, e),
        }
    }
}

/// The dominant pair alone. The trailing pairs of a rank-one operator are
/// round-off and may come out as tiny complex pairs.
fn leading(r: &EigenResult<f64>) -> EigenResult<f64> {
    let mut one = r.clone();
    one.eigenvalues.truncate(1);
    one.imag.truncate(1);
    one.complex.truncate(1);
    one.eigenvectors.truncate(1);
    one.residuals.truncate(1);
    one
}

struct Level {
    eigenvalues: Vec<f64>,
    trace: f64,
}

fn ibq_levels(g: &GeometryMap<f64>, k: CovarianceKernel<f64>, meshes: &[Vec<usize>]) -> Vec<Level> {
    meshes
        .iter()
        .map(|e| {
            let s = GalerkinSetup::from_mesh(g.clone(), k, 2, e, InterpContinuity::Auto).unwrap();
            let r = solve_symmetric(&s, &options(5)).unwrap();
            Level {
                eigenvalues: r.eigenvalues,
                trace: s.trace().unwrap(),
            }
        })
        .collect()
}

fn dense_levels(g: &GeometryMap<f64>, k: CovarianceKernel<f64>, meshes: &[Vec<usize>]) -> Vec<Level> {
    meshes
        .iter()
        .map(|e| {
            let trial = g.bspline_space(2, e).unwrap();
            let sys = assemble_galerkin_dense(&trial, g, &k, 4).unwrap();
            let a = sys.standard_form().unwrap();
            let trace = (0..a.rows()).map(|i| a[(i, i)]).sum();
            let sol = solve_dense_generalized(&sys, 5).unwrap();
            Level {
                eigenvalues: sol.result.eigenvalues,
                trace,
            }
        })
        .collect()
}

/// Largest decrease of any eigenvalue between consecutive levels.
fn worst_decrease(levels: &[Level]) -> f64 {
    let mut w = f64::NEG_INFINITY;
    for pair in levels.windows(2) {
        for (c, f) in pair[0].eigenvalues.iter().zip(&pair[1].eigenvalues) {
            w = w.max(c - f);
        }
    }
    w
}

fn ac4_ac5(rep: &mut Report) {
    // Z-orthonormality of the back-transformed eigenvectors
    let mut worst_orth = 0.0f64;
    let box2 = GeometryMap::boxed(&[(0.0, 2.0), (0.0, 1.0)]).unwrap();
    let setups = [
        GalerkinSetup::from_mesh(GeometryMap::unit(1).unwrap(), CovarianceKernel::exponential(1.0, 1.0).unwrap(), 3, &[40], InterpContinuity::Auto),
        GalerkinSetup::from_mesh(box2.clone(), CovarianceKernel::gaussian(1.0, 0.5).unwrap(), 2, &[8, 6], InterpContinuity::Auto),
        GalerkinSetup::from_mesh(quarter_annulus(1.0, 2.0), CovarianceKernel::exponential(1.0, 0.7).unwrap(), 2, &[8, 4], InterpContinuity::Auto),
    ];
    for s in setups {
        let s = s.unwrap();
        let r = solve_symmetric(&s, &options(10)).unwrap();
        let v: Vec<Vec<f64>> = r.eigenvectors.iter().map(|x| s.back_transform(x).unwrap()).collect();
        for i in 0..v.len() {
            let zv = s.mass().matvec(&v[i]).unwrap();
            for (j, vj) in v.iter().enumerate() {
                let ip: f64 = zv.iter().zip(vj).map(|(a, b)| a * b).sum();
                let delta = if i == j { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((ip - delta).abs());
            }
        }
    }
    rep.check(
        "AC4",
        worst_orth <= 1e-10,
        format!("Galerkin IBQ eigenvectors Z-orthonormal: max |v_i^T Z v_j - delta_ij| {worst_orth:.2e} (<= 1e-10)"),
    );

    let unit1 = GeometryMap::unit(1).unwrap();
    let gauss = CovarianceKernel::gaussian(1.0, 0.5).unwrap();
    let expo = CovarianceKernel::exponential(1.0, 1.0).unwrap();
    let m1: Vec<Vec<usize>> = vec![vec![4], vec![8], vec![16]];
    let m2: Vec<Vec<usize>> = vec![vec![4, 4], vec![8, 8], vec![16, 16]];
    let sequences: Vec<(&str, &GeometryMap<f64>, f64, Vec<Level>)> = vec![
        ("Galerkin IBQ, gaussian, 1D e=4,8,16", &unit1, 1.0, ibq_levels(&unit1, gauss, &m1)),
        ("Galerkin IBQ, gaussian, 2D e=4,8,16", &box2, 2.0, ibq_levels(&box2, gauss, &m2)),
        ("Galerkin IBQ, exponential, 1D e=4,8,16", &unit1, 1.0, ibq_levels(&unit1, expo, &m1)),
        ("Galerkin IBQ, exponential, 2D e=4,8,16", &box2, 2.0, ibq_levels(&box2, expo, &m2)),
    ];
    for (name, _, _, levels) in &sequences {
        let w = worst_decrease(levels);
        rep.check(
            "AC4",
            w <= 1e-12,
            format!("monotone under h-refinement, {name}: largest decrease of lambda_1..5 {w:.2e} (<= 1e-12)"),
        );
    }
    for (name, _, vol, levels) in &sequences {
        let bound = vol + 1e-8;
        let over = levels.iter().map(|l| l.trace - bound).fold(f64::NEG_INFINITY, f64::max);
        let gaps: Vec<f64> = levels.iter().map(|l| vol - l.trace).collect();
        let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
        rep.check(
            "AC5",
            over <= 0.0 && shrinking,
            format!(
                "trace bound, {name}: gaps sigma^2|D| - trace = {} (>= -1e-8, shrinking)",
                gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(", ")
            ),
        );
    }
    let dense = dense_levels(&unit1, expo, &m1);
    println!(
        "       info: dense Gauss Galerkin, exponential, 1D e=4,8,16: largest decrease {:.2e}, gaps {}",
        worst_decrease(&dense),
        dense.iter().map(|l| format!("{:.3e}", 1.0 - l.trace)).collect::<Vec<_>>().join(", ")
    );
}

fn ac6(rep: &mut Report) {
    let g = GeometryMap::unit(2).unwrap();
    let k = CovarianceKernel::gaussian(1.0, 0.5).unwrap();
    let runs = [(2usize, 38usize), (5, 35)];
    let mut gal = Vec::new();
    let mut col = Vec::new();
    for (p, e) in runs {
        let s = GalerkinSetup::from_mesh(g.clone(), k, p, &[e, e], InterpContinuity::Cpm1).unwrap();
        let t = time_matvec(&s, 21, 1).unwrap();
        gal.push((p, s.dim(), s.interp_dim(), t.median));
        let c = CollocationSetup::from_mesh(&g, k, p, &[e, e], None, true).unwrap();
        let t = time_matvec(&c, 21, 1).unwrap();
        col.push((p, c.dim(), c.num_quadrature_points(), t.median));
    }
    let rg = gal[1].3 / gal[0].3;
    rep.check(
        "AC6",
        rg < 2.0 && gal[0].2 == gal[1].2,
        format!(
            "IBQ matvec at fixed Ntilde={}: median {:.3e}s (p=2) -> {:.3e}s (p=5), ratio {rg:.2} (< 2)",
            gal[0].2, gal[0].3, gal[1].3
        ),
    );
    let rc = col[1].3 / col[0].3;
    rep.check(
        "AC6",
        rc >= 3.0 && col[0].1 == col[1].1,
        format!(
            "collocation matvec at fixed N={} (Nq {} -> {}): median {:.3e}s (p=2) -> {:.3e}s (p=5), ratio {rc:.2} (>= 3)",
            col[0].1, col[0].2, col[1].2, col[0].3, col[1].3
        ),
    );
}

fn ac7(rep: &mut Report) {
    let t = Instant::now();
    let g = GeometryMap::half_cylinder(1.0, 2.0, 10.0).unwrap();
    let k = CovarianceKernel::exponential(1.0, 5.0).unwrap();
    let e = [12usize, 2, 14];
    let m = 6;
    let gs = GalerkinSetup::from_mesh(g.clone(), k, 2, &e, InterpContinuity::Auto).unwrap();
    let gr = solve_symmetric(&gs, &options(m)).unwrap();
    let gk = KLExpansion::from_galerkin(&gs, &gr).unwrap();
    let cs = CollocationSetup::from_mesh(&g, k, 2, &e, None, false).unwrap();
    let cr = solve_nonsymmetric(&cs, &options(m)).unwrap();
    let ck = KLExpansion::from_collocation(&cs, &cr).unwrap();
    let worst_val = (0..m)
        .map(|i| relative_error(gr.eigenvalues[i], cr.eigenvalues[i]).unwrap())
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    rep.check(
        "AC7",
        worst_val <= 0.02 && secs < 600.0,
        format!(
            "half cylinder e={e:?} N={} (Ntilde={}), b=5: first {m} eigenvalues agree to {worst_val:.2e} (<= 2e-2), {secs:.0}s",
            gs.dim(),
            gs.interp_dim()
        ),
    );
    println!("       Galerkin    {:?}", gr.eigenvalues.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>());
    println!("       collocation {:?}", cr.eigenvalues.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>());
    // modes odd in the axial direction vanish on the mid-plane, so the
    // line difference is measured against each mode's sup over the domain
    let grid: Vec<[f64; 3]> = (0..11 * 5 * 11)
        .map(|k| [(k % 11) as f64 / 10.0, ((k / 11) % 5) as f64 / 4.0, (k / 55) as f64 / 10.0])
        .collect();
    let mut worst_line = 0.0f64;
    for i in 0..m {
        let sup = max_abs(grid.iter().map(|x| gk.eval_mode(i, x).unwrap()));
        let pts: Vec<[f64; 3]> = (0..=100).map(|j| [j as f64 / 100.0, 0.5, 0.5]).collect();
        let d = max_abs(pts.iter().map(|x| gk.eval_mode(i, x).unwrap() - ck.eval_mode(i, x).unwrap())) / sup;
        worst_line = worst_line.max(d);
    }
    rep.check(
        "AC7",
        worst_line <= 0.05,
        format!("sign-fixed line samples on the circumferential mid-plane agree to {worst_line:.2e} of the mode sup norm (<= 5e-2)"),
    );
}

fn ac8(rep: &mut Report) {
    let g = GeometryMap::unit(3).unwrap();
    let k = CovarianceKernel::exponential(1.0, 0.5).unwrap();
    let s = GalerkinSetup::from_mesh(g.clone(), k, 2, &[15, 15, 15], InterpContinuity::C0).unwrap();
    let nt = s.interp_dim();
    let x = vec![1.0; s.dim()];
    let (y, bytes) = high_water(|| s.apply(&x).unwrap());
    drop(y);
    rep.check(
        "AC8",
        bytes < 64 * nt,
        format!(
            "IBQ apply at Ntilde={nt} (N={}): high-water {bytes} bytes = {:.1} Ntilde (< 64 Ntilde)",
            s.dim(),
            bytes as f64 / nt as f64
        ),
    );
    drop(s);
    let c = CollocationSetup::from_mesh(&g, k, 2, &[15, 15, 15], None, true).unwrap();
    let nq = c.num_quadrature_points();
    let x = vec![1.0; c.dim()];
    let (y, bytes) = high_water(|| c.apply(&x).unwrap());
    drop(y);
    rep.check(
        "AC8",
        bytes < 64 * nq,
        format!(
            "collocation apply with {nq} quadrature points (N={}): high-water {bytes} bytes = {:.1} Nq (< 64 Nq)",
            c.dim(),
            bytes as f64 / nq as f64
        ),
    );
}

fn ac9(rep: &mut Report) {
    let cases = [
        (relative_error(2.0, 2.0).unwrap(), 0.0),
        (relative_error(2.0, 1.9).unwrap(), 0.05),
        (relative_error(1.0, 1.5).unwrap(), 0.5),
        (mean_relative_error(&[3.0, 4.0], &[3.0, 4.0], 2).unwrap(), 0.0),
        (mean_relative_error(&[1.0, 1.0], &[0.9, 1.1], 2).unwrap(), 0.1),
        (mean_relative_error(&[2.0, 5.0], &[1.9, 1.0], 1).unwrap(), relative_error(2.0, 1.9).unwrap()),
    ];
    let worst = max_abs(cases.iter().map(|(a, b)| a - b));
    let domain = relative_error(0.0, 1.0).is_err() && mean_relative_error(&[1.0], &[1.0], 2).is_err();
    rep.check(
        "AC9",
        worst <= 1e-15 && domain,
        format!("metric triples: max deviation {worst:.1e} (<= 1e-15), domain errors raised: {domain}"),
    );
}

fn ac10(rep: &mut Report) {
    let k = CovarianceKernel::exponential(1.0, 0.5).unwrap();
    let sq = GeometryMap::unit(2).unwrap();
    let annulus = quarter_annulus(1.0, 2.0);
    for (name, g, e) in [("unit square", &sq, [8usize, 8]), ("quarter annulus", &annulus, [8, 6])] {
        for p in [4usize, 5] {
            let s = CollocationSetup::from_mesh(g, k, p, &e, None, false).unwrap();
            let opts = options(10);
            match solve_nonsymmetric(&s, &opts) {
                Ok(r) => {
                    let tol = opts.tol * r.eigenvalues[0].abs();
                    let res_ok = r.residuals.iter().all(|&x| x <= tol);
                    let real = r.num_complex() == 0;
                    let monotone = r.eigenvalues.windows(2).all(|w| w[1] <= w[0]);
                    rep.check(
                        "AC10",
                        res_ok && real && monotone,
                        format!(
                            "collocation p={p} {name} e={e:?} N={} converged in {} matvecs: residuals <= tol {res_ok}, all real {real}, ordered {monotone}",
                            s.dim(),
                            r.n_iter
                        ),
                    );
                }
                Err(err) => rep.error("AC10", &format!("collocation p={p} {name}"), err),
            }
        }
    }
    // non-normal operator whose dominant pair is 3 ± 2i
    let n = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut a = Mat::zeros(n, n);
    a[(0, 0)] = 3.0;
    a[(0, 1)] = -4.0;
    a[(1, 0)] = 1.0;
    a[(1, 1)] = 3.0;
    for i in 2..n {
        a[(i, i)] = 2.0 - i as f64 * 0.05;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !(i == 0 && j == 1) {
                a[(i, j)] += rng.random_range(-0.5..0.5);
            }
        }
    }
    match solve_nonsymmetric(&a, &options(3)) {
        Ok(r) => {
            let flags_ok = r.complex == vec![true, true, false];
            let vals_ok = (r.eigenvalues[0] - 3.0).abs() < 1e-6
                && (r.imag[0].abs() - 2.0).abs() < 1e-6
                && (r.eigenvalues[2] - 1.9).abs() < 1e-6;
            rep.check(
                "AC10",
                flags_ok && vals_ok,
                format!(
                    "non-normal operator with dominant pair 3 +- 2i: flags {:?}, values {:?} + {:?}i",
                    r.complex, r.eigenvalues, r.imag
                ),
            );
        }
        Err(e) => rep.error("AC10", "complex flag", e),
    }
}

fn main() {
    let mut rep = Report::default();
    let all = Instant::now();
    type Stage = (&'static str, fn(&mut Report));
    let stages: [Stage; 9] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4/AC5", ac4_ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
    ];
    let only: Option<String> = std::env::args().nth(1).filter(|a| a.starts_with("AC"));
    for (name, f) in stages {
        if only.as_deref().is_some_and(|o| !name.split('/').any(|n| n == o)) {
            continue;
        }
        let t = Instant::now();
        f(&mut rep);
        println!("       ({name} took {:.1}s)", t.elapsed().as_secs_f64());
    }
    let failed: Vec<&Line> = rep.lines.iter().filter(|l| !l.pass).collect();
    println!(
        "acceptance: {} of {} checks passed in {:.0}s",
        rep.lines.len() - failed.len(),
        rep.lines.len(),
        all.elapsed().as_secs_f64()
    );
    for l in &failed {
        println!("  failing: {} {}", l.id, l.text);
    }
    let strict = std::env::var("KLEXPAND_ACCEPT_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
