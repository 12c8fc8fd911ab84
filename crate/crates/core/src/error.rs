use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate lattice")]
    DegenerateLattice,
    #[error("nonpositive conformal factor: sample {value} at row {row}, column {col}")]
    NonpositiveFactor { row: usize, col: usize, value: f64 },
    #[error("grid must be at least 4x4, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("grid shape mismatch: {0}")]
    Shape(String),
    #[error("biaxial decomposition requires the unit square torus")]
    NotUnitSquare,
    #[error("one-variable oracle requires square torus and f = f(y)")]
    NotOneVariable,
    #[error("factor domain does not match the lattice")]
    IncompatibleDomain,
    #[error("lattice covolume {0} is not 1 and rescaling was forbidden")]
    NotUnitCovolume(f64),
    #[error("scale factor must be positive, got {0}")]
    NonpositiveScale(f64),
    #[error("invalid bound: upper bound {upper} is below min_f * lambda1 = {floor}")]
    InvalidBound { upper: f64, floor: f64 },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
