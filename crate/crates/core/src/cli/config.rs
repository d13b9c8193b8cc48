//! Benchmark configuration files.
//!
//! One `key = value` pair per line, keys dotted and order-insensitive,
//! blank lines ignored and `#` starting a comment:
//!
//! ```text
//! method = galerkin-ibq          # galerkin-ibq | collocation | reference-galerkin | reference-collocation
//! kernel.kind = exponential      # exponential | gaussian | constant
//! kernel.variance = 1.0
//! kernel.correlation_length = 5.0
//! geometry.kind = half-cylinder  # unit-interval | unit-square | unit-cube | box | half-cylinder
//! geometry.inner_r = 1
//! geometry.outer_r = 2
//! geometry.length = 10
//! degree = 2
//! elements = 12, 4, 16           # one count, or one per parametric direction
//! eigen.num_pairs = 20
//! output = out/case1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::galerkin::InterpContinuity;
use crate::geometry::GeometryMap;
use crate::kernel::{CovarianceKernel, KernelKind};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error at `{key}`{}: {message}", line_suffix(.line))]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

fn line_suffix(line: &Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl ConfigError {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            line: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GalerkinIbq,
    Collocation,
    ReferenceGalerkin,
    ReferenceCollocation,
}

impl Method {
    pub fn is_galerkin(self) -> bool {
        matches!(self, Method::GalerkinIbq | Method::ReferenceGalerkin)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::GalerkinIbq => "galerkin-ibq",
            Method::Collocation => "collocation",
            Method::ReferenceGalerkin => "reference-galerkin",
            Method::ReferenceCollocation => "reference-collocation",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "galerkin-ibq" | "galerkin" => Ok(Method::GalerkinIbq),
            "collocation" => Ok(Method::Collocation),
            "reference-galerkin" => Ok(Method::ReferenceGalerkin),
            "reference-collocation" => Ok(Method::ReferenceCollocation),
            _ => Err("expected galerkin-ibq, collocation, reference-galerkin or reference-collocation".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    UnitInterval,
    UnitSquare,
    UnitCube,
    Box(Vec<(f64, f64)>),
    HalfCylinder { inner_r: f64, outer_r: f64, length: f64 },
}

impl GeometrySpec {
    pub fn dim(&self) -> usize {
        match self {
            GeometrySpec::UnitInterval => 1,
            GeometrySpec::UnitSquare => 2,
            GeometrySpec::UnitCube | GeometrySpec::HalfCylinder { .. } => 3,
            GeometrySpec::Box(e) => e.len(),
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, GeometrySpec::HalfCylinder { .. })
    }

    /// Length of a one-dimensional domain.
    pub fn interval_length(&self) -> Option<f64> {
        match self {
            GeometrySpec::UnitInterval => Some(1.0),
            GeometrySpec::Box(e) if e.len() == 1 => Some(e[0].1 - e[0].0),
            _ => None,
        }
    }

    pub fn build(&self) -> crate::Result<GeometryMap<f64>> {
        match self {
            GeometrySpec::UnitInterval => GeometryMap::unit(1),
            GeometrySpec::UnitSquare => GeometryMap::unit(2),
            GeometrySpec::UnitCube => GeometryMap::unit(3),
            GeometrySpec::Box(e) => GeometryMap::boxed(e),
            GeometrySpec::HalfCylinder { inner_r, outer_r, length } => {
                GeometryMap::half_cylinder(*inner_r, *outer_r, *length)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub variance: f64,
    pub correlation_length: f64,
}

impl KernelSpec {
    pub fn build(&self) -> crate::Result<CovarianceKernel<f64>> {
        CovarianceKernel::new(self.kind, self.variance, self.correlation_length)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpec {
    pub num_pairs: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub subspace: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    Analytic,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub case: String,
    pub method: Method,
    pub kernel: KernelSpec,
    pub geometry: GeometrySpec,
    pub degree: usize,
    pub elements: Vec<usize>,
    pub interp_continuity: InterpContinuity,
    /// Gauss points per direction and element; `None` means `p + 1`.
    pub nq_per_dir: Option<usize>,
    pub bspline_z: bool,
    /// Gauss points per direction for the dense Galerkin reference.
    pub dense_nq: Option<usize>,
    pub eigen: EigenSpec,
    pub output: PathBuf,
    pub reference: Option<ReferenceSpec>,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub line_modes: usize,
    pub line_points: usize,
}

const KEYS: &[&str] = &[
    "case",
    "method",
    "kernel.kind",
    "kernel.variance",
    "kernel.correlation_length",
    "geometry.kind",
    "geometry.extents",
    "geometry.inner_r",
    "geometry.outer_r",
    "geometry.length",
    "degree",
    "galerkin.degree",
    "elements",
    "galerkin.interp_continuity",
    "collocation.nq_per_dir",
    "collocation.bspline_z",
    "dense.nq",
    "eigen.num_pairs",
    "eigen.tol",
    "eigen.max_iter",
    "eigen.seed",
    "eigen.subspace",
    "output",
    "reference",
    "threads",
    "line.modes",
    "line.points",
];

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn get<V: FromStr>(&self, key: &str, what: &str) -> Result<Option<V>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| ConfigError {
                key: key.into(),
                line: Some(line),
                message: format!("expected {what}, found `{v}`"),
            }),
        }
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            key: key.into(),
            line: self.raw(key).map(|(_, l)| l),
            message: message.into(),
        }
    }
}

fn parse_list<V: FromStr>(s: &str) -> Option<Vec<V>> {
    s.split(',').map(|t| t.trim().parse().ok()).collect()
}

impl BenchmarkConfig {
    /// Reads a config file; relative `output` and `reference` paths are
    /// taken relative to the file's directory, and the default output is
    /// `<stem>.out` next to it.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::parse(&text)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        if cfg.output.as_os_str().is_empty() {
            cfg.output = PathBuf::from(format!("{stem}.out"));
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        if let Some(ReferenceSpec::File(p)) = &mut cfg.reference {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.case.is_empty() {
            cfg.case = stem.to_string();
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError {
                    key: line.to_string(),
                    line: Some(i + 1),
                    message: "expected `key = value`".into(),
                });
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError {
                    key: k,
                    line: Some(i + 1),
                    message: "unknown key".into(),
                });
            }
            if let Some((_, first)) = map.get(&k) {
                return Err(ConfigError {
                    key: k,
                    line: Some(i + 1),
                    message: format!("duplicate key (first set on line {first})"),
                });
            }
            map.insert(k, (v, i + 1));
        }
        let e = Entries { map };
        let cfg = Self::from_entries(&e)?;
        cfg.validate().map_err(|mut err| {
            err.line = e.raw(&err.key).map(|(_, l)| l);
            err
        })?;
        Ok(cfg)
    }

    fn from_entries(e: &Entries) -> Result<Self, ConfigError> {
        let method = match e.raw("method") {
            None => return Err(ConfigError::new("method", "missing required key")),
            Some((v, _)) => v.parse::<Method>().map_err(|m| e.err("method", m))?,
        };
        let kind = match e.raw("kernel.kind") {
            None => KernelKind::Exponential,
            Some((v, _)) => v.parse::<KernelKind>().map_err(|m| e.err("kernel.kind", m.to_string()))?,
        };
        let kernel = KernelSpec {
            kind,
            variance: e.get("kernel.variance", "a real number")?.unwrap_or(1.0),
            correlation_length: e.get("kernel.correlation_length", "a real number")?.unwrap_or(1.0),
        };
        let geometry = Self::geometry(e)?;
        let degree = match (e.get::<usize>("degree", "an integer")?, e.get("galerkin.degree", "an integer")?) {
            (Some(_), Some(_)) => return Err(e.err("galerkin.degree", "conflicts with `degree`")),
            (a, b) => a.or(b).unwrap_or(2),
        };
        let d = geometry.dim();
        let elements = match e.raw("elements") {
            None => return Err(ConfigError::new("elements", "missing required key")),
            Some((v, _)) => {
                let list: Vec<usize> =
                    parse_list(v).ok_or_else(|| e.err("elements", format!("expected comma-separated counts, found `{v}`")))?;
                match list.len() {
                    1 => vec![list[0]; d],
                    n if n == d => list,
                    n => return Err(e.err("elements", format!("{n} counts given for a {d}-dimensional geometry"))),
                }
            }
        };
        let interp_continuity = match e.raw("galerkin.interp_continuity") {
            None => InterpContinuity::Auto,
            Some((v, _)) => v
                .parse::<InterpContinuity>()
                .map_err(|m| e.err("galerkin.interp_continuity", m.to_string()))?,
        };
        let reference = e.raw("reference").map(|(v, _)| {
            if v == "analytic" {
                ReferenceSpec::Analytic
            } else {
                ReferenceSpec::File(PathBuf::from(v))
            }
        });
        let eigen = EigenSpec {
            num_pairs: e.get("eigen.num_pairs", "an integer")?.unwrap_or(20),
            tol: e.get("eigen.tol", "a real number")?.unwrap_or(1e-8),
            max_iter: e.get("eigen.max_iter", "an integer")?.unwrap_or(5000),
            seed: e.get("eigen.seed", "an integer")?.unwrap_or(0),
            subspace: e.get("eigen.subspace", "an integer")?,
        };
        let line_modes = e.get("line.modes", "an integer")?.unwrap_or(eigen.num_pairs.min(6));
        Ok(Self {
            case: e.raw("case").map(|(v, _)| v.to_string()).unwrap_or_default(),
            method,
            kernel,
            geometry,
            degree,
            elements,
            interp_continuity,
            nq_per_dir: e.get("collocation.nq_per_dir", "an integer")?,
            bspline_z: e.get("collocation.bspline_z", "true or false")?.unwrap_or(false),
            dense_nq: e.get("dense.nq", "an integer")?,
            eigen,
            output: e.raw("output").map(|(v, _)| PathBuf::from(v)).unwrap_or_default(),
            reference,
            threads: e.get("threads", "an integer")?.unwrap_or(0),
            line_modes,
            line_points: e.get("line.points", "an integer")?.unwrap_or(101),
        })
    }

    fn geometry(e: &Entries) -> Result<GeometrySpec, ConfigError> {
        let kind = e.raw("geometry.kind").map(|(v, _)| v).unwrap_or("unit-interval");
        let allowed: &[&str] = match kind {
            "box" => &["geometry.extents"],
            "half-cylinder" => &["geometry.inner_r", "geometry.outer_r", "geometry.length"],
            _ => &[],
        };
        for key in ["geometry.extents", "geometry.inner_r", "geometry.outer_r", "geometry.length"] {
            if e.raw(key).is_some() && !allowed.contains(&key) {
                return Err(e.err(key, format!("not used by geometry `{kind}`")));
            }
        }
        Ok(match kind {
            "unit-interval" => GeometrySpec::UnitInterval,
            "unit-square" => GeometrySpec::UnitSquare,
            "unit-cube" => GeometrySpec::UnitCube,
            "box" => {
                let Some((v, _)) = e.raw("geometry.extents") else {
                    return Err(ConfigError::new("geometry.extents", "required for geometry `box`"));
                };
                // "0:1, 0:2.5"
                let extents: Option<Vec<(f64, f64)>> = v
                    .split(',')
                    .map(|t| {
                        let (a, b) = t.split_once(':')?;
                        Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
                    })
                    .collect();
                let extents = extents
                    .ok_or_else(|| e.err("geometry.extents", format!("expected `lo:hi, lo:hi, ...`, found `{v}`")))?;
                if extents.is_empty() || extents.len() > 3 || extents.iter().any(|(a, b)| !(b > a)) {
                    return Err(e.err("geometry.extents", "need one to three intervals with lo < hi"));
                }
                GeometrySpec::Box(extents)
            }
            "half-cylinder" => GeometrySpec::HalfCylinder {
                inner_r: e.get("geometry.inner_r", "a real number")?.unwrap_or(1.0),
                outer_r: e.get("geometry.outer_r", "a real number")?.unwrap_or(2.0),
                length: e.get("geometry.length", "a real number")?.unwrap_or(10.0),
            },
            other => {
                return Err(e.err(
                    "geometry.kind",
                    format!("unknown geometry `{other}` (expected unit-interval, unit-square, unit-cube, box or half-cylinder)"),
                ))
            }
        })
    }

    /// Checks ranges and method/geometry compatibility without building
    /// any discretization.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let k = &self.kernel;
        if !(k.variance > 0.0 && k.variance.is_finite()) {
            return Err(ConfigError::new("kernel.variance", "must be positive"));
        }
        if !(k.correlation_length > 0.0 && k.correlation_length.is_finite()) {
            return Err(ConfigError::new("kernel.correlation_length", "must be positive"));
        }
        if let GeometrySpec::HalfCylinder { inner_r, outer_r, length } = self.geometry {
            if !(inner_r > 0.0 && outer_r > inner_r) {
                return Err(ConfigError::new("geometry.outer_r", "need 0 < inner_r < outer_r"));
            }
            if !(length > 0.0) {
                return Err(ConfigError::new("geometry.length", "must be positive"));
            }
        }
        if self.degree == 0 {
            return Err(ConfigError::new("degree", "must be at least 1"));
        }
        if self.elements.contains(&0) {
            return Err(ConfigError::new("elements", "counts must be positive"));
        }
        if self.nq_per_dir == Some(0) {
            return Err(ConfigError::new("collocation.nq_per_dir", "must be positive"));
        }
        if self.dense_nq == Some(0) {
            return Err(ConfigError::new("dense.nq", "must be positive"));
        }
        if self.bspline_z && self.geometry.is_rational() && self.method == Method::Collocation {
            return Err(ConfigError::new(
                "collocation.bspline_z",
                "needs a polynomial geometry; the half cylinder requires a NURBS trial space",
            ));
        }
        let e = &self.eigen;
        if e.num_pairs == 0 {
            return Err(ConfigError::new("eigen.num_pairs", "must be positive"));
        }
        if !(e.tol > 0.0) {
            return Err(ConfigError::new("eigen.tol", "must be positive"));
        }
        if e.max_iter == 0 {
            return Err(ConfigError::new("eigen.max_iter", "must be positive"));
        }
        if let Some(s) = e.subspace {
            if s < e.num_pairs + 2 {
                return Err(ConfigError::new("eigen.subspace", "must be at least eigen.num_pairs + 2"));
            }
        }
        if self.line_modes > e.num_pairs {
            return Err(ConfigError::new("line.modes", "cannot exceed eigen.num_pairs"));
        }
        if self.line_points == 1 {
            return Err(ConfigError::new("line.points", "need 0 (disabled) or at least 2"));
        }
        if self.reference == Some(ReferenceSpec::Analytic)
            && (self.kernel.kind != KernelKind::Exponential || self.geometry.interval_length().is_none())
        {
            return Err(ConfigError::new(
                "reference",
                "`analytic` is only available for the exponential kernel on an interval",
            ));
        }
        let n = self.solution_dim();
        if e.num_pairs > n {
            return Err(ConfigError::new(
                "eigen.num_pairs",
                format!("{} pairs requested but the solution space has {n} functions", e.num_pairs),
            ));
        }
        match self.method {
            Method::ReferenceGalerkin | Method::ReferenceCollocation => {
                let nq = if self.method == Method::ReferenceGalerkin {
                    self.dense_nq.unwrap_or(self.degree + 1)
                } else {
                    self.nq_per_dir.unwrap_or(self.degree + 1)
                };
                let q: usize = self.elements.iter().map(|&e| e * nq).product();
                if q > crate::reference::QUADRATURE_CAP {
                    return Err(ConfigError::new(
                        "elements",
                        format!(
                            "dense reference limited to {} quadrature points (requested {q}); use a matrix-free method",
                            crate::reference::QUADRATURE_CAP
                        ),
                    ));
                }
                if n > crate::reference::DENSE_SOLVE_CAP {
                    return Err(ConfigError::new(
                        "elements",
                        format!(
                            "dense reference limited to N = {} (requested {n}); use a matrix-free method",
                            crate::reference::DENSE_SOLVE_CAP
                        ),
                    ));
                }
            }
            Method::GalerkinIbq | Method::Collocation => {}
        }
        Ok(())
    }

    /// Size of the trial space the configured mesh produces.
    pub fn solution_dim(&self) -> usize {
        match self.geometry.build() {
            Ok(g) => (0..self.elements.len())
                .map(|k| {
                    g.refined_knots(k, self.degree, self.elements[k], self.degree as isize - 1, None)
                        .map(|kv| kv.num_basis())
                        .unwrap_or(0)
                })
                .product(),
            Err(_) => 0,
        }
    }
}
