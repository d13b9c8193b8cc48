use std::path::{Path, PathBuf};
use std::time::Instant;

use super::report::{read_eigenvalues, write_csv, float, SUMMARY_HEADER};
use super::{time_matvec, BenchmarkConfig, CliError, ConfigError, MatvecTiming, Method, ReferenceSpec, RunReport, THREADS_ENV};
use crate::collocation::CollocationSetup;
use crate::eigen::{solve_nonsymmetric, solve_symmetric, EigenError, EigenOptions, EigenResult};
use crate::galerkin::GalerkinSetup;
use crate::kl::{mean_relative_error, relative_error, KLExpansion};
use crate::reference::{
    assemble_collocation_dense, assemble_galerkin_dense, exponential_eigenvalues_1d, solve_dense_generalized,
};

/// Timed applications behind `matvec_mean_seconds`.
const MATVEC_REPEATS: usize = 20;

/// Worker count: `KLEXPAND_THREADS` if set, else the config value
/// (0 meaning every available core).
pub fn thread_count(configured: usize) -> Result<usize, ConfigError> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| ConfigError {
            key: THREADS_ENV.into(),
            line: None,
            message: format!("expected a thread count, found `{v}`"),
        })?,
        Err(_) => configured,
    };
    Ok(if n == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        n
    })
}

fn load_reference(cfg: &BenchmarkConfig) -> Result<Option<Vec<f64>>, CliError> {
    match &cfg.reference {
        None => Ok(None),
        Some(ReferenceSpec::Analytic) => {
            let len = cfg.geometry.interval_length().expect("validated interval geometry");
            let k = &cfg.kernel;
            Ok(Some(exponential_eigenvalues_1d(k.variance, k.correlation_length, len, cfg.eigen.num_pairs)?))
        }
        Some(ReferenceSpec::File(p)) => read_eigenvalues(p).map(Some).map_err(|e| {
            CliError::Config(ConfigError {
                key: "reference".into(),
                line: None,
                message: e.to_string(),
            })
        }),
    }
}

/// Setup, eigensolve and metrics for one configuration, writing
/// `eigenvalues.csv`, `timings.csv` and, when available, `errors.csv` and
/// `modes_line.csv` into the output directory.
pub fn run(cfg: &BenchmarkConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let threads = thread_count(cfg.threads)?;
    let reference = load_reference(cfg)?;
    std::fs::create_dir_all(&cfg.output).map_err(|source| CliError::Io {
        path: cfg.output.clone(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| execute(cfg, reference.as_deref()))
}

struct Solved {
    n: usize,
    n_tilde: Option<usize>,
    h: f64,
    setup_seconds: f64,
    timing: MatvecTiming,
    result: EigenResult<f64>,
    converged: usize,
    kle: Option<KLExpansion<f64>>,
}

fn unpack(r: Result<EigenResult<f64>, EigenError<f64>>, m: usize) -> Result<(EigenResult<f64>, usize), CliError> {
    match r {
        Ok(res) => Ok((res, m)),
        Err(EigenError::NotConverged { partial, converged }) => Ok((*partial, converged)),
        Err(EigenError::Operator(e)) => Err(e.into()),
        Err(EigenError::OperatorContract(s)) => Err(crate::Error::Domain(s).into()),
    }
}

fn solve(cfg: &BenchmarkConfig) -> Result<Solved, CliError> {
    let g = cfg.geometry.build()?;
    let k = cfg.kernel.build()?;
    let m = cfg.eigen.num_pairs;
    let opts = EigenOptions {
        num_pairs: m,
        tol: cfg.eigen.tol,
        max_iter: cfg.eigen.max_iter,
        seed: cfg.eigen.seed,
        subspace: cfg.eigen.subspace,
    };
    let seed = cfg.eigen.seed;
    let t = Instant::now();
    Ok(match cfg.method {
        Method::GalerkinIbq => {
            let s = GalerkinSetup::from_mesh(g.clone(), k, cfg.degree, &cfg.elements, cfg.interp_continuity)?;
            let setup_seconds = t.elapsed().as_secs_f64();
            let timing = time_matvec(&s, MATVEC_REPEATS, seed)?;
            let (result, converged) = unpack(solve_symmetric(&s, &opts), m)?;
            Solved {
                n: s.dim(),
                n_tilde: Some(s.interp_dim()),
                h: g.max_element_diameter(s.trial())?,
                setup_seconds,
                timing,
                kle: KLExpansion::from_galerkin(&s, &result).ok(),
                result,
                converged,
            }
        }
        Method::Collocation => {
            let s = CollocationSetup::from_mesh(&g, k, cfg.degree, &cfg.elements, cfg.nq_per_dir, cfg.bspline_z)?;
            let setup_seconds = t.elapsed().as_secs_f64();
            let timing = time_matvec(&s, MATVEC_REPEATS, seed)?;
            let (result, converged) = unpack(solve_nonsymmetric(&s, &opts), m)?;
            Solved {
                n: s.dim(),
                n_tilde: None,
                h: g.max_element_diameter(s.trial())?,
                setup_seconds,
                timing,
                kle: KLExpansion::from_collocation(&s, &result).ok(),
                result,
                converged,
            }
        }
        Method::ReferenceGalerkin | Method::ReferenceCollocation => {
            let galerkin = cfg.method == Method::ReferenceGalerkin;
            let (trial, sys) = if galerkin {
                let trial = g.bspline_space(cfg.degree, &cfg.elements)?;
                let nq = cfg.dense_nq.unwrap_or(cfg.degree + 1);
                let sys = assemble_galerkin_dense(&trial, &g, &k, nq)?;
                (trial, sys)
            } else {
                let trial = g.nurbs_space(cfg.degree, &cfg.elements)?;
                let nq = cfg.nq_per_dir.unwrap_or(cfg.degree + 1);
                let sys = assemble_collocation_dense(&trial, &g, &k, nq)?;
                (trial, sys)
            };
            let standard = sys.standard_form()?;
            let setup_seconds = t.elapsed().as_secs_f64();
            let timing = time_matvec(&standard, MATVEC_REPEATS, seed)?;
            drop(standard);
            let sol = solve_dense_generalized(&sys, m)?;
            let vals = sol.result.eigenvalues.clone();
            let kle = if sol.result.complex.iter().any(|&c| c) {
                None
            } else if galerkin {
                KLExpansion::from_spline_modes(&trial, &g, vals, &sol.coefficients, true).ok()
            } else {
                KLExpansion::from_spline_modes(&trial, &g, vals, &sol.coefficients, false)
                    .and_then(|e| e.normalized(&g, &trial, cfg.degree + 2))
                    .ok()
            };
            Solved {
                n: trial.dim(),
                n_tilde: None,
                h: g.max_element_diameter(&trial)?,
                setup_seconds,
                timing,
                result: sol.result,
                converged: m,
                kle,
            }
        }
    })
}

fn execute(cfg: &BenchmarkConfig, reference: Option<&[f64]>) -> Result<RunReport, CliError> {
    let s = solve(cfg)?;
    let r = &s.result;
    let mut report = RunReport {
        case: cfg.case.clone(),
        method: cfg.method,
        n: s.n,
        n_tilde: s.n_tilde,
        degree: cfg.degree,
        h: s.h,
        setup_seconds: s.setup_seconds,
        matvec_mean_seconds: s.timing.mean,
        matvec_median_seconds: s.timing.median,
        eigensolve_seconds: r.solve_seconds,
        n_iter: r.n_iter,
        restarts: r.restarts,
        eigenvalues: r.eigenvalues.clone(),
        imag: r.imag.clone(),
        complex: r.complex.clone(),
        residuals: r.residuals.clone(),
        rel_errors: None,
        mean_rel_error: None,
        converged: s.converged,
        output: cfg.output.clone(),
    };
    let dir = cfg.output.as_path();
    report.write_eigenvalues(dir)?;
    report.write_timings(dir)?;
    if let Some(reference) = reference {
        let m = reference.len().min(report.eigenvalues.len());
        if m > 0 {
            let errs = (0..m)
                .map(|i| relative_error(reference[i], report.eigenvalues[i]))
                .collect::<crate::Result<Vec<_>>>()?;
            report.mean_rel_error = Some(mean_relative_error(reference, &report.eigenvalues, m)?);
            report.rel_errors = Some(errs);
            report.write_errors(dir, reference)?;
        }
    }
    if let Some(kle) = &s.kle {
        write_modes_line(cfg, kle, dir)?;
    }
    if s.converged < cfg.eigen.num_pairs {
        return Err(CliError::Partial {
            converged: s.converged,
            requested: cfg.eigen.num_pairs,
            report: Box::new(report),
        });
    }
    Ok(report)
}

/// Modes along parametric direction 0 with the other coordinates at the
/// mid-planes `1/2`.
fn write_modes_line(cfg: &BenchmarkConfig, kle: &KLExpansion<f64>, dir: &Path) -> Result<(), CliError> {
    let k = cfg.line_modes.min(kle.available());
    if k == 0 || cfg.line_points < 2 {
        return Ok(());
    }
    let d = cfg.geometry.dim();
    let mut header = vec!["param_coord".to_string()];
    header.extend((1..=k).map(|i| format!("mode_{i}")));
    let mut rows = Vec::with_capacity(cfg.line_points);
    for j in 0..cfg.line_points {
        let t = j as f64 / (cfg.line_points - 1) as f64;
        let mut x = vec![0.5; d];
        x[0] = t;
        let mut row = vec![float(t)];
        for i in 0..k {
            row.push(float(kle.eval_mode(i, &x)?));
        }
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&dir.join("modes_line.csv"), &header, rows)
}

#[derive(Debug)]
pub struct SweepEntry {
    pub case: String,
    pub method: Option<Method>,
    pub result: Result<RunReport, CliError>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub entries: Vec<SweepEntry>,
    pub summary: PathBuf,
}

impl SweepOutcome {
    pub fn reports(&self) -> impl Iterator<Item = &RunReport> {
        self.entries.iter().filter_map(|e| match &e.result {
            Ok(r) => Some(r),
            Err(CliError::Partial { report, .. }) => Some(report.as_ref()),
            Err(_) => None,
        })
    }

    /// 0 when every run succeeded, otherwise the code of the worst failure
    /// (configuration errors first, then other failures, then partial runs).
    pub fn exit_code(&self) -> i32 {
        let codes: Vec<i32> = self
            .entries
            .iter()
            .filter_map(|e| e.result.as_ref().err().map(CliError::exit_code))
            .collect();
        [2, 1, 3].into_iter().find(|c| codes.contains(c)).unwrap_or(0)
    }
}

/// Runs the configurations one after another and writes `summary.csv`.
/// Failed runs keep their row with empty numeric fields.
pub fn sweep(configs: Vec<BenchmarkConfig>, summary: &Path) -> Result<SweepOutcome, CliError> {
    if configs.is_empty() {
        return Err(ConfigError {
            key: "<sweep>".into(),
            line: None,
            message: "no configurations to run".into(),
        }
        .into());
    }
    let entries = configs
        .into_iter()
        .map(|cfg| SweepEntry {
            case: cfg.case.clone(),
            method: Some(cfg.method),
            result: run(&cfg),
        })
        .collect();
    finish(entries, summary)
}

/// Sweep over every `*.cfg` file in `dir` (sorted by name); the summary
/// goes to `dir/summary.csv`.
pub fn sweep_dir(dir: &Path) -> Result<SweepOutcome, CliError> {
    let read = std::fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ConfigError {
            key: "<sweep>".into(),
            line: None,
            message: format!("no .cfg files in {}", dir.display()),
        }
        .into());
    }
    let entries = files
        .iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
            match BenchmarkConfig::from_file(p) {
                Ok(cfg) => SweepEntry {
                    case: cfg.case.clone(),
                    method: Some(cfg.method),
                    result: run(&cfg),
                },
                Err(e) => SweepEntry {
                    case: stem,
                    method: None,
                    result: Err(e.into()),
                },
            }
        })
        .collect();
    finish(entries, &dir.join("summary.csv"))
}

fn finish(entries: Vec<SweepEntry>, summary: &Path) -> Result<SweepOutcome, CliError> {
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| match &e.result {
            Ok(r) => r.summary_row(),
            Err(CliError::Partial { report, .. }) => report.summary_row(),
            Err(_) => {
                let mut row = vec![e.case.clone(), e.method.map(|m| m.to_string()).unwrap_or_default()];
                row.resize(SUMMARY_HEADER.len(), String::new());
                row
            }
        })
        .collect();
    write_csv(summary, &SUMMARY_HEADER, rows)?;
    Ok(SweepOutcome {
        entries,
        summary: summary.to_path_buf(),
    })
}
