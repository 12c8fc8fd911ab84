//! JSON and CSV input specifications for lattices, factors, metrics, curves
//! and parameter sweeps.

use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::{Grid, PeriodicField, TrigFamily};
use crate::lattice::Lattice;
use crate::metric::TorusMetric;
use crate::real::Real;
use crate::revolution::{circle_profile, ellipse_profile, GeneratingCurve};

/// `{"basis": [[x1, y1], [x2, y2]]}` or `{"tau": [re, im]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum LatticeSpec {
    Basis { basis: [[f64; 2]; 2] },
    Tau { tau: [f64; 2] },
}

impl LatticeSpec {
    pub fn to_lattice<T: Real>(&self) -> Result<Lattice<T>> {
        match self {
            Self::Basis { basis } => Lattice::new([T::lit(basis[0][0]), T::lit(basis[0][1])], [T::lit(basis[1][0]), T::lit(basis[1][1])]),
            Self::Tau { tau } => {
                if !(tau[1] > 0.0) || !tau[0].is_finite() || !tau[1].is_finite() {
                    return Err(Error::Input(format!("tau must lie in the upper half-plane, got [{}, {}]", tau[0], tau[1])));
                }
                Lattice::from_tau(Complex::new(T::lit(tau[0]), T::lit(tau[1])))
            }
        }
    }
}

/// Conformal factor: a trigonometric family, a constant, inline rows or a
/// CSV file (path relative to the spec file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorSpec {
    Trig(TrigFamily),
    Constant { constant: f64 },
    Values { values: Vec<Vec<f64>> },
    Csv { csv: PathBuf },
}

impl FactorSpec {
    /// Whether the factor can be sampled at any resolution.
    pub fn is_parametric(&self) -> bool {
        matches!(self, Self::Trig(_) | Self::Constant { .. })
    }

    /// Samples on `rows x cols` for parametric factors; tabulated factors
    /// keep their own shape.
    pub fn sample<T: Real>(&self, rows: usize, cols: usize, lattice: Lattice<T>, base: &Path) -> Result<PeriodicField<T>> {
        match self {
            Self::Trig(family) => family.sample(rows, cols, lattice),
            Self::Constant { constant } => PeriodicField::constant(rows, cols, lattice, T::lit(*constant)),
            Self::Values { values } => PeriodicField::new(grid_from_rows(values)?, lattice),
            Self::Csv { csv } => {
                let path = base.join(csv);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
                let grid = parse_csv_grid(&text).map_err(|e| match e {
                    Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
                    other => other,
                })?;
                PeriodicField::new(grid, lattice)
            }
        }
    }
}

fn grid_from_rows<T: Real>(rows: &[Vec<f64>]) -> Result<Grid<T>> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Input(format!("row {} has {} values, expected {cols}", i + 1, r.len())));
    }
    Grid::new(rows.len(), cols, rows.iter().flatten().map(|&v| T::lit(v)).collect())
}

/// Grid from CSV text: one line per row (`y`), one field per column (`x`),
/// no header. Lines starting with `#` are skipped.
pub fn parse_csv_grid<T: Real>(text: &str) -> Result<Grid<T>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Input(format!("line {line}, field {}: invalid number {field:?}", j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("empty CSV".into()));
    }
    grid_from_rows(&rows)
}

/// `{"lattice": ..., "factor": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub lattice: LatticeSpec,
    pub factor: FactorSpec,
}

impl MetricSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        from_json(text, "metric spec")
    }

    /// Builds the metric, sampling parametric factors on `rows x cols`.
    pub fn build<T: Real>(&self, rows: usize, cols: usize, base: &Path) -> Result<TorusMetric<T>> {
        let lattice = self.lattice.to_lattice()?;
        TorusMetric::from_factor(self.factor.sample(rows, cols, lattice, base)?)
    }
}

/// Profile families for surfaces of revolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Circle of radius `r` centered at distance `R` from the axis.
    Circle {
        #[serde(rename = "R")]
        center: f64,
        r: f64,
        #[serde(default = "default_samples")]
        n: usize,
    },
    /// Ellipse with semi-axes `a` (radial) and `b` (axial) centered at
    /// distance `R`.
    Ellipse {
        #[serde(rename = "R")]
        center: f64,
        a: f64,
        b: f64,
        #[serde(default = "default_samples")]
        n: usize,
    },
}

fn default_samples() -> usize {
    1024
}

/// `{"samples": [[x, z], ...]}` or `{"profile": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CurveSpec {
    Samples { samples: Vec<[f64; 2]> },
    Profile { profile: ProfileSpec },
}

impl CurveSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        from_json(text, "curve spec")
    }

    pub fn samples(&self) -> Vec<[f64; 2]> {
        match self {
            Self::Samples { samples } => samples.clone(),
            Self::Profile { profile: ProfileSpec::Circle { center, r, n } } => circle_profile(*center, *r, *n),
            Self::Profile { profile: ProfileSpec::Ellipse { center, a, b, n } } => ellipse_profile(*center, *a, *b, *n),
        }
    }

    pub fn to_curve<T: Real>(&self) -> Result<GeneratingCurve<T>> {
        let points: Vec<[T; 2]> = self.samples().iter().map(|p| [T::lit(p[0]), T::lit(p[1])]).collect();
        GeneratingCurve::from_samples(&points)
    }
}

/// One swept parameter: a JSON pointer into the base metric spec and the
/// values it takes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParameter {
    pub pointer: String,
    pub values: Vec<f64>,
}

/// `{"base": <metric spec>, "parameters": [{"pointer": "/factor/terms/0/amp", "values": [...]}]}`;
/// instances are the Cartesian product, last parameter varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: Value,
    pub parameters: Vec<SweepParameter>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = from_json(text, "sweep spec")?;
        MetricSpec::deserialize(&spec.base).map_err(|e| Error::Input(format!("sweep base: {e}")))?;
        for p in &spec.parameters {
            if spec.base.pointer(&p.pointer).is_none() {
                return Err(Error::Input(format!("sweep pointer {:?} does not name a field of the base spec", p.pointer)));
            }
        }
        Ok(spec)
    }

    /// Parameter values and the metric spec for each grid point.
    pub fn instances(&self) -> Result<Vec<(Vec<f64>, MetricSpec)>> {
        let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
        for p in &self.parameters {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    p.values.iter().map(move |&v| {
                        let mut next = c.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .map(|values| {
                let mut spec = self.base.clone();
                for (p, &v) in self.parameters.iter().zip(&values) {
                    let slot = spec.pointer_mut(&p.pointer).ok_or_else(|| Error::Input(format!("sweep pointer {:?}", p.pointer)))?;
                    *slot = Value::from(v);
                }
                let metric = MetricSpec::deserialize(&spec).map_err(|e| Error::Input(format!("sweep instance {values:?}: {e}")))?;
                Ok((values, metric))
            })
            .collect()
    }
}

fn from_json<S: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<S> {
    serde_json::from_str(text).map_err(|e| Error::Input(format!("{what}: {e}")))
}
