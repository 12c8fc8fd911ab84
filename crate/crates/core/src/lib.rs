//! Conformal metrics `f^2 ds^2` on flat tori, their systoles, and the
//! Loewner torus inequality with variance defect terms.
//!
//! Every numeric type is generic over [`Real`]; the `*F64` / `*F32` aliases
//! below fix the scalar.

pub mod defect;
pub mod error;
pub mod field;
pub mod input;
pub mod lattice;
pub mod metric;
mod polish;
pub mod real;
pub mod revolution;
mod spectral;
pub mod systole;

pub use defect::{analyze, DefectReport, EqualityCase, Inequality};
pub use error::{Error, Result};
pub use input::{CurveSpec, FactorSpec, LatticeSpec, MetricSpec, SweepSpec};
pub use field::{l1_norm, BiaxialParts, Grid, PeriodicField, TrigFamily, TrigTerm};
pub use lattice::{Lattice, ReducedModulus, SuccessiveMinima};
pub use metric::{Rescale, TorusMetric};
pub use real::Real;
pub use revolution::{GeneratingCurve, RevolutionChart};
pub use systole::{HomotopyClass, Method, SystoleEstimate};

pub type LatticeF64 = Lattice<f64>;
pub type LatticeF32 = Lattice<f32>;
pub type GridF64 = Grid<f64>;
pub type PeriodicFieldF64 = PeriodicField<f64>;
pub type PeriodicFieldF32 = PeriodicField<f32>;
pub type TorusMetricF64 = TorusMetric<f64>;
pub type TorusMetricF32 = TorusMetric<f32>;
pub type SystoleEstimateF64 = SystoleEstimate<f64>;
