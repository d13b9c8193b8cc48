use thiserror::Error;

/// Errors raised by discretization setup and operator application.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("factorization failed{}: {message}", direction_suffix(.direction))]
    Factorization {
        direction: Option<usize>,
        message: String,
    },

    #[error("degenerate geometry: det DF = {det:e} at parametric point {point:?}")]
    DegenerateGeometry { det: f64, point: Vec<f64> },

    #[error("truncation order {requested} exceeds the {available} available eigenpairs")]
    Truncation { requested: usize, available: usize },

    #[error("dense reference limited to {cap} {what} (requested {requested}); use the matrix-free methods")]
    SizeCap {
        what: &'static str,
        requested: usize,
        cap: usize,
    },
}

fn direction_suffix(direction: &Option<usize>) -> String {
    match direction {
        Some(d) => format!(" in parametric direction {d}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            found,
        })
    }
}
