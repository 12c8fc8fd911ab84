//! Conformal metrics `f^2 (dx^2 + dy^2)` on a unit-covolume flat torus.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::lattice::{Lattice, ReducedModulus};
use crate::real::Real;

/// Whether [`TorusMetric::build`] may rescale a lattice of covolume other than 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rescale {
    Allow,
    Forbid,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusMetric<T: Real> {
    lattice: Lattice<T>,
    reduced: ReducedModulus<T>,
    factor: PeriodicField<T>,
    area: T,
    mean: T,
    variance: T,
}

impl<T: Real> TorusMetric<T> {
    /// Binds `factor` to `lattice`.
    ///
    /// A lattice of covolume `c` is divided by `sqrt(c)` and the factor
    /// multiplied by `sqrt(c)`, which is an isometry of the torus.
    pub fn build(lattice: Lattice<T>, factor: PeriodicField<T>, rescale: Rescale) -> Result<Self> {
        let tol = T::tol(T::GEOMETRIC_TOL);
        let same_domain = lattice
            .basis()
            .iter()
            .zip(factor.domain().basis().iter())
            .all(|(a, b)| (a[0] - b[0]).abs() <= tol * T::one().max(a[0].abs()) && (a[1] - b[1]).abs() <= tol * T::one().max(a[1].abs()));
        if !same_domain {
            return Err(Error::IncompatibleDomain);
        }
        let covolume = lattice.covolume();
        let (lattice, factor) = if (covolume - T::one()).abs() <= T::tol(1e-12) {
            (lattice, factor)
        } else {
            if rescale == Rescale::Forbid {
                return Err(Error::NotUnitCovolume(covolume.to_f64_lossy()));
            }
            let root = covolume.sqrt();
            let unit = lattice.normalized();
            (unit, factor.scaled_values(root).with_domain(unit))
        };
        Ok(Self::assemble(lattice, factor))
    }

    fn assemble(lattice: Lattice<T>, factor: PeriodicField<T>) -> Self {
        let mean = factor.mean();
        let variance = factor.variance();
        let area = factor.second_moment();
        Self { reduced: lattice.reduce(), lattice, factor, area, mean, variance }
    }

    /// Builds from a factor, using its own domain as the lattice.
    pub fn from_factor(factor: PeriodicField<T>) -> Result<Self> {
        Self::build(*factor.domain(), factor, Rescale::Allow)
    }

    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    pub fn reduced(&self) -> &ReducedModulus<T> {
        &self.reduced
    }

    pub fn factor(&self) -> &PeriodicField<T> {
        &self.factor
    }

    /// `E(f^2)`.
    pub fn area(&self) -> T {
        self.area
    }

    /// `E(f)`.
    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn variance(&self) -> T {
        self.variance
    }

    /// Homothety `f -> c f`.
    pub fn scale(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::NonpositiveScale(c.to_f64_lossy()));
        }
        Ok(Self::assemble(self.lattice, self.factor.scaled_values(c)))
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    fn one_var() -> TorusMetric<f64> {
        let f = PeriodicField::from_fn(64, 64, Lattice::square(), |_, y: f64| 1.0 + 0.3 * (TAU * y).sin()).unwrap();
        TorusMetric::from_factor(f).unwrap()
    }

    #[test]
    fn build_examples() {
        let flat = TorusMetric::from_factor(PeriodicField::constant(8, 8, Lattice::<f64>::square(), 1.0).unwrap()).unwrap();
        assert_eq!(flat.area(), 1.0);
        let e = Lattice::<f64>::eisenstein();
        let eis = TorusMetric::from_factor(PeriodicField::constant(8, 8, e, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(eis.area(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eis.reduced().sigma_sq, 3f64.sqrt() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(one_var().area(), 1.045, epsilon = 1e-14);
    }

    #[test]
    fn rescaling_preserves_area() {
        // flat rectangle 2 x 3 has area 6
        let l = Lattice::rectangular(2.0, 3.0).unwrap();
        let f = PeriodicField::constant(8, 8, l, 1.0).unwrap();
        let m = TorusMetric::build(l, f.clone(), Rescale::Allow).unwrap();
        assert_abs_diff_eq!(m.lattice().covolume(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.area(), 6.0, epsilon = 1e-13);
        assert_eq!(TorusMetric::build(l, f, Rescale::Forbid).unwrap_err(), Error::NotUnitCovolume(6.0));
    }

    #[test]
    fn mismatched_domain() {
        let f = PeriodicField::constant(8, 8, Lattice::<f64>::square(), 1.0).unwrap();
        assert_eq!(
            TorusMetric::build(Lattice::eisenstein(), f, Rescale::Allow).unwrap_err(),
            Error::IncompatibleDomain
        );
    }

    #[test]
    fn scale_examples() {
        let flat = TorusMetric::from_factor(PeriodicField::constant(8, 8, Lattice::<f64>::square(), 1.0).unwrap()).unwrap();
        assert_eq!(flat.scale(2.0).unwrap().area(), 4.0);
        let m = one_var();
        let same = m.scale(1.0).unwrap();
        assert_eq!((same.area(), same.mean(), same.variance()), (m.area(), m.mean(), m.variance()));
        assert_abs_diff_eq!(m.scale(3.0).unwrap().variance(), 0.405, epsilon = 1e-13);
        assert!(m.scale(0.0).is_err());
        assert!(m.scale(-1.0).is_err());
    }

    #[test]
    fn area_identity() {
        let m = one_var();
        assert!((m.area() - m.mean() * m.mean() - m.variance()).abs() <= 1e-12 * m.area());
        assert!(m.area() >= m.mean() * m.mean());
    }
}
