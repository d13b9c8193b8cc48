//! Run reports and their CSV files.

use std::fs::File;
use std::path::{Path, PathBuf};

use super::{CliError, Method};

pub const EIGENVALUES_HEADER: [&str; 5] = ["index", "eigenvalue", "imag", "residual", "complex"];
pub const TIMINGS_HEADER: [&str; 9] = [
    "N",
    "Ntilde",
    "h",
    "setup_seconds",
    "matvec_mean_seconds",
    "matvec_median_seconds",
    "eigensolve_seconds",
    "n_iter",
    "restarts",
];
pub const ERRORS_HEADER: [&str; 4] = ["index", "reference", "computed", "rel_error"];
pub const SUMMARY_HEADER: [&str; 9] = [
    "case",
    "method",
    "N",
    "Ntilde",
    "p",
    "h",
    "eigensolve_seconds",
    "matvec_mean_seconds",
    "mean_rel_error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub case: String,
    pub method: Method,
    pub n: usize,
    /// Interpolation space size (IBQ Galerkin only).
    pub n_tilde: Option<usize>,
    pub degree: usize,
    /// Largest physical element diameter.
    pub h: f64,
    pub setup_seconds: f64,
    pub matvec_mean_seconds: f64,
    pub matvec_median_seconds: f64,
    pub eigensolve_seconds: f64,
    pub n_iter: usize,
    pub restarts: usize,
    pub eigenvalues: Vec<f64>,
    pub imag: Vec<f64>,
    pub complex: Vec<bool>,
    pub residuals: Vec<f64>,
    pub rel_errors: Option<Vec<f64>>,
    pub mean_rel_error: Option<f64>,
    /// Number of converged pairs; equals the requested count on success.
    pub converged: usize,
    pub output: PathBuf,
}

pub(crate) fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let f = File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(f))
}

/// Writes `rows` (after `header`) to `path`.
pub(crate) fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>()).map_err(wrap)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl RunReport {
    pub(crate) fn write_eigenvalues(&self, dir: &Path) -> Result<(), CliError> {
        let rows = (0..self.eigenvalues.len()).map(|i| {
            vec![
                (i + 1).to_string(),
                float(self.eigenvalues[i]),
                float(self.imag[i]),
                float(self.residuals[i]),
                self.complex[i].to_string(),
            ]
        });
        write_csv(&dir.join("eigenvalues.csv"), &EIGENVALUES_HEADER, rows)
    }

    pub(crate) fn write_timings(&self, dir: &Path) -> Result<(), CliError> {
        let row = vec![
            self.n.to_string(),
            opt(self.n_tilde),
            float(self.h),
            float(self.setup_seconds),
            float(self.matvec_mean_seconds),
            float(self.matvec_median_seconds),
            float(self.eigensolve_seconds),
            self.n_iter.to_string(),
            self.restarts.to_string(),
        ];
        write_csv(&dir.join("timings.csv"), &TIMINGS_HEADER, [row])
    }

    pub(crate) fn write_errors(&self, dir: &Path, reference: &[f64]) -> Result<(), CliError> {
        let Some(errs) = &self.rel_errors else {
            return Ok(());
        };
        let rows = errs.iter().enumerate().map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                float(reference[i]),
                float(self.eigenvalues[i]),
                float(*e),
            ]
        });
        write_csv(&dir.join("errors.csv"), &ERRORS_HEADER, rows)
    }

    pub(crate) fn summary_row(&self) -> Vec<String> {
        vec![
            self.case.clone(),
            self.method.to_string(),
            self.n.to_string(),
            opt(self.n_tilde),
            self.degree.to_string(),
            float(self.h),
            float(self.eigensolve_seconds),
            float(self.matvec_mean_seconds),
            self.mean_rel_error.map(float).unwrap_or_default(),
        ]
    }
}

/// Reads the `eigenvalue` column of an `eigenvalues.csv`.
pub fn read_eigenvalues(path: &Path) -> Result<Vec<f64>, CliError> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let f = File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(f);
    let col = r
        .headers()
        .map_err(wrap)?
        .iter()
        .position(|h| h == "eigenvalue")
        .ok_or_else(|| CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, "no `eigenvalue` column"),
        })?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(wrap)?;
        let v = rec.get(col).unwrap_or("");
        out.push(v.trim().parse().map_err(|_| CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad eigenvalue `{v}`")),
        })?);
    }
    Ok(out)
}
