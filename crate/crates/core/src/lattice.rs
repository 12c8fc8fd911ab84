//! Rank-2 lattices in the Euclidean plane: Lagrange–Gauss reduction, the
//! reduced modulus in the closure of the modular fundamental domain,
//! successive minima and the Hermite ratio.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;

pub type Vec2<T> = [T; 2];

#[inline]
pub(crate) fn dot<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm<T: Real>(a: Vec2<T>) -> T {
    a[0].hypot(a[1])
}

#[inline]
fn axpy<T: Real>(k: T, a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [b[0] + k * a[0], b[1] + k * a[1]]
}

/// A lattice `Z b1 + Z b2` with nonzero covolume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lattice<T: Real> {
    basis: [Vec2<T>; 2],
    covolume: T,
}

/// Modulus `tau` of a lattice in the closure of the standard fundamental
/// domain, together with the similarity taking `Z tau + Z` back to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedModulus<T: Real> {
    pub tau: Complex<T>,
    pub sigma_sq: T,
    /// Length of the shortest vector used as the unit.
    pub scale: T,
    /// Argument of that shortest vector.
    pub rotation: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuccessiveMinima<T: Real> {
    pub lambda1: T,
    pub lambda2: T,
    pub v1: Vec2<T>,
    pub v2: Vec2<T>,
}

impl<T: Real> Lattice<T> {
    /// Builds a lattice, rejecting bases with
    /// `covolume < 1e-12 * max(|b1|, |b2|)^2`.
    pub fn new(b1: Vec2<T>, b2: Vec2<T>) -> Result<Self> {
        let det = b1[0] * b2[1] - b1[1] * b2[0];
        let covolume = det.abs();
        let longest = norm(b1).max(norm(b2));
        let finite = b1.iter().chain(b2.iter()).all(|c| c.is_finite());
        if !finite || !(covolume > T::lit(1e-12) * longest * longest) || covolume <= T::zero() {
            return Err(Error::DegenerateLattice);
        }
        Ok(Self { basis: [b1, b2], covolume })
    }

    /// `Z^2`.
    pub fn square() -> Self {
        Self::new([T::one(), T::zero()], [T::zero(), T::one()]).unwrap()
    }

    /// `a Z + b Z`, axis aligned.
    pub fn rectangular(a: T, b: T) -> Result<Self> {
        Self::new([a, T::zero()], [T::zero(), b])
    }

    /// Eisenstein integers spanned by `1` and `e^{i pi/3}`, scaled to unit covolume.
    pub fn eisenstein() -> Self {
        let h = T::lit(3.0).sqrt() / T::lit(2.0);
        Self::new([T::one(), T::zero()], [T::lit(0.5), h]).unwrap().normalized()
    }

    /// Unit-covolume lattice spanned by `{sigma^-1, sigma^-1 tau}` where
    /// `sigma^2 = Im(tau)`.
    pub fn from_tau(tau: Complex<T>) -> Result<Self> {
        if !(tau.im > T::zero()) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::DegenerateLattice);
        }
        let inv_sigma = tau.im.sqrt().recip();
        Self::new([inv_sigma, T::zero()], [tau.re * inv_sigma, tau.im * inv_sigma])
    }

    pub fn basis(&self) -> [Vec2<T>; 2] {
        self.basis
    }

    pub fn covolume(&self) -> T {
        self.covolume
    }

    /// `m b1 + n b2`.
    pub fn point(&self, m: i64, n: i64) -> Vec2<T> {
        let [b1, b2] = self.basis;
        let (m, n) = (T::from_i64(m).unwrap(), T::from_i64(n).unwrap());
        [m * b1[0] + n * b2[0], m * b1[1] + n * b2[1]]
    }

    pub fn flat_length(&self, p: i64, q: i64) -> T {
        norm(self.point(p, q))
    }

    /// Same lattice with basis `(U00 b1 + U01 b2, U10 b1 + U11 b2)`.
    pub fn transformed(&self, u: [[i64; 2]; 2]) -> Result<Self> {
        Self::new(self.point(u[0][0], u[0][1]), self.point(u[1][0], u[1][1]))
    }

    /// Homothetic copy with covolume 1.
    pub fn normalized(&self) -> Self {
        self.scaled(self.covolume.sqrt().recip())
    }

    pub fn scaled(&self, c: T) -> Self {
        let [b1, b2] = self.basis;
        Self {
            basis: [[b1[0] * c, b1[1] * c], [b2[0] * c, b2[1] * c]],
            covolume: self.covolume * c * c,
        }
    }

    /// Basis vectors are `(1,0)` and `(0,1)` up to sign and order.
    pub fn is_unit_square(&self) -> bool {
        let tol = T::tol(T::GEOMETRIC_TOL);
        let [b1, b2] = self.basis;
        let unit_axis = |v: Vec2<T>| {
            ((v[0].abs() - T::one()).abs() <= tol && v[1].abs() <= tol)
                || ((v[1].abs() - T::one()).abs() <= tol && v[0].abs() <= tol)
        };
        unit_axis(b1) && unit_axis(b2) && dot(b1, b2).abs() <= tol
    }

    /// Lagrange–Gauss reduced basis: `|v1| <= |v2|` and
    /// `|<v1, v2>| <= |v1|^2 / 2`.
    pub fn gauss_reduced(&self) -> [Vec2<T>; 2] {
        let [mut b1, mut b2] = self.basis;
        // Each pass strictly shortens the longer vector, so the cap only
        // guards against NaN-poisoned input.
        for _ in 0..10_000 {
            if dot(b1, b1) > dot(b2, b2) {
                std::mem::swap(&mut b1, &mut b2);
            }
            let mu = (dot(b2, b1) / dot(b1, b1)).round();
            if mu == T::zero() {
                break;
            }
            b2 = axpy(-mu, b1, b2);
        }
        [b1, b2]
    }

    pub fn successive_minima(&self) -> SuccessiveMinima<T> {
        let [v1, v2] = self.gauss_reduced();
        SuccessiveMinima { lambda1: norm(v1), lambda2: norm(v2), v1, v2 }
    }

    /// `lambda1^2 / covolume`; at most `2/sqrt(3)`.
    pub fn hermite_ratio(&self) -> T {
        let l1 = self.successive_minima().lambda1;
        l1 * l1 / self.covolume
    }

    /// Reduces the modulus into the closure of
    /// `{ |z| > 1, |Re z| < 1/2, Im z > 0 }`.
    ///
    /// Boundary ties are canonicalized: on the unit circle `Re(tau) >= 0`,
    /// and `Re(tau) = -1/2` is moved to `+1/2`.
    pub fn reduce(&self) -> ReducedModulus<T> {
        let tol = T::tol(T::GEOMETRIC_TOL);
        let [v1, v2] = self.gauss_reduced();
        let mut z = Complex::new(v1[0], v1[1]);
        let mut tau = Complex::new(v2[0], v2[1]) / z;
        if tau.im < T::zero() {
            tau = -tau;
        }
        // Gauss reduction leaves |Re tau| <= 1/2 up to rounding; push the
        // rare overshoot back before the tie-breaks.
        let half = T::lit(0.5);
        if tau.re > half + tol {
            tau.re = tau.re - T::one();
        } else if tau.re < -half - tol {
            tau.re = tau.re + T::one();
        }
        if (tau.norm() - T::one()).abs() <= tol && tau.re < -tol {
            z = z * tau;
            tau = -tau.inv();
        }
        if (tau.re + half).abs() <= tol {
            tau.re = tau.re + T::one();
        }
        ReducedModulus { tau, sigma_sq: tau.im, scale: z.norm(), rotation: z.im.atan2(z.re) }
    }
}

impl<T: Real> ReducedModulus<T> {
    /// `scale * e^{i rotation}`.
    pub fn generator(&self) -> Complex<T> {
        Complex::from_polar(self.scale, self.rotation)
    }

    /// Reduced basis `(z, z tau)`, spanning the original lattice.
    pub fn basis(&self) -> [Vec2<T>; 2] {
        let z = self.generator();
        let w = z * self.tau;
        [[z.re, z.im], [w.re, w.im]]
    }

    pub fn sigma(&self) -> T {
        self.sigma_sq.sqrt()
    }

    /// `tau` on the imaginary axis.
    pub fn is_rectangular(&self) -> bool {
        self.tau.re.abs() <= T::tol(T::GEOMETRIC_TOL)
    }

    pub fn distance_to_eisenstein(&self) -> T {
        let corner = Complex::new(T::lit(0.5), T::lit(3.0).sqrt() / T::lit(2.0));
        (self.tau - corner).norm()
    }
}
