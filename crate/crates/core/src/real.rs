//! Scalar abstraction shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Tolerances are stated in `f64` and converted on use, with a per-type
/// floor so that single precision does not chase unreachable thresholds.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Absolute tolerance for geometric predicates on unit-covolume data.
    const GEOMETRIC_TOL: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(tol, k * epsilon)`.
    #[inline]
    fn tol(tol: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        Self::lit(tol).max(floor)
    }
}

impl Real for f32 {
    const GEOMETRIC_TOL: f64 = 1e-4;
}

impl Real for f64 {
    const GEOMETRIC_TOL: f64 = 1e-9;
}

/// Sum in a fixed order: per chunk of `stride` values, then the chunk sums.
pub(crate) fn ordered_sum<T: Real>(values: impl IntoIterator<Item = T>, stride: usize) -> T {
    let mut total = T::zero();
    let mut chunk = T::zero();
    let mut k = 0usize;
    for v in values {
        chunk = chunk + v;
        k += 1;
        if k == stride {
            total = total + chunk;
            chunk = T::zero();
            k = 0;
        }
    }
    total + chunk
}
