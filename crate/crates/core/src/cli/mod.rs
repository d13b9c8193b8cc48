//! Config-driven benchmark runner behind the `klexpand` binary.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eigen::MatrixFreeOperator;
use crate::scalar::Real;

pub use config::{
    BenchmarkConfig, ConfigError, EigenSpec, GeometrySpec, KernelSpec, Method, ReferenceSpec,
};
pub use report::{read_eigenvalues, RunReport, SUMMARY_HEADER};
pub use run::{run, sweep, sweep_dir, thread_count, SweepOutcome};

/// Environment variable overriding the `threads` key.
pub const THREADS_ENV: &str = "KLEXPAND_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Numerics(#[from] crate::Error),

    #[error("only {converged} of {requested} eigenpairs converged; partial results written to {}", report.output.display())]
    Partial {
        report: Box<RunReport>,
        converged: usize,
        requested: usize,
    },

    #[error("cannot build thread pool: {0}")]
    Pool(String),
}

impl CliError {
    /// 2 for configuration errors, 3 for partial convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Partial { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatvecTiming {
    pub mean: f64,
    pub median: f64,
    pub samples: Vec<f64>,
}

/// Times `repeats` applications of `op` to a fixed random vector after two
/// untimed warm-up applications.
pub fn time_matvec<T: Real, O: MatrixFreeOperator<T> + ?Sized>(
    op: &O,
    repeats: usize,
    seed: u64,
) -> crate::Result<MatvecTiming> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<T> = (0..op.dim()).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
    for _ in 0..2 {
        std::hint::black_box(op.apply(&x)?);
    }
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        std::hint::black_box(op.apply(&x)?);
        samples.push(t.elapsed().as_secs_f64());
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(MatvecTiming { mean, median, samples })
}
