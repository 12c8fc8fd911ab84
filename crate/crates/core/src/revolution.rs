//! Tori of revolution: a closed profile curve `(f(phi), g(phi))` in the
//! `xz`-plane with `f > 0`, rotated about the `z`-axis.
//!
//! The substitution `psi = int dphi / f` makes the metric conformally flat
//! on the rectangle `[0, 2 pi) x [0, b)`, with conformal factor
//! `F(psi) = f(phi(psi))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Grid, PeriodicField};
use crate::lattice::{Lattice, Vec2};
use crate::metric::{Rescale, TorusMetric};
use crate::real::Real;

// 8-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 4] = [0.1834346424956498, 0.525532409916329, 0.7966664774136267, 0.9602898564975363];
const GL_WEIGHTS: [f64; 4] = [0.362683783378362, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

fn gauss_legendre<T: Real>(a: T, b: T, f: &impl Fn(T) -> T) -> T {
    let mid = (a + b) * T::lit(0.5);
    let half = (b - a) * T::lit(0.5);
    let mut s = T::zero();
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        let dx = half * T::lit(*x);
        s = s + T::lit(w) * (f(mid - dx) + f(mid + dx));
    }
    s * half
}

/// Adaptive Gauss–Legendre: a panel is accepted when it agrees with its
/// two halves to `tol`.
fn integrate<T: Real>(a: T, b: T, f: &impl Fn(T) -> T, tol: T, depth: u32) -> T {
    let whole = gauss_legendre(a, b, f);
    let mid = (a + b) * T::lit(0.5);
    let split = gauss_legendre(a, mid, f) + gauss_legendre(mid, b, f);
    if depth == 0 || (whole - split).abs() <= tol {
        return split;
    }
    let half_tol = tol * T::lit(0.5);
    integrate(a, mid, f, half_tol, depth - 1) + integrate(mid, b, f, half_tol, depth - 1)
}

/// Periodic interpolating cubic spline on knots `t_0 = 0 < ... < t_{n-1} < period`.
#[derive(Clone, Debug, PartialEq)]
struct PeriodicSpline<T: Real> {
    knots: Vec<T>,
    period: T,
    values: Vec<T>,
    second: Vec<T>,
}

impl<T: Real> PeriodicSpline<T> {
    fn new(knots: &[T], period: T, values: &[T]) -> Self {
        let n = knots.len();
        let h = |k: usize| if k + 1 < n { knots[k + 1] - knots[k] } else { period - knots[n - 1] };
        let y = |k: usize| values[k % n];
        // cyclic tridiagonal system for the second derivatives
        let mut sub = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        let mut sup = vec![T::zero(); n];
        let mut rhs = vec![T::zero(); n];
        let six = T::lit(6.0);
        for k in 0..n {
            let hp = h((k + n - 1) % n);
            let hk = h(k);
            sub[k] = hp;
            diag[k] = T::lit(2.0) * (hp + hk);
            sup[k] = hk;
            rhs[k] = six * ((y(k + 1) - y(k)) / hk - (y(k) - y(k + n - 1)) / hp);
        }
        let second = solve_cyclic(&sub, &diag, &sup, &rhs);
        Self { knots: knots.to_vec(), period, values: values.to_vec(), second }
    }

    fn segment_len(&self, k: usize) -> T {
        let n = self.knots.len();
        if k + 1 < n {
            self.knots[k + 1] - self.knots[k]
        } else {
            self.period - self.knots[n - 1]
        }
    }

    /// Segment containing `t` (wrapped into `[0, period)`) and the offset in it.
    fn locate(&self, t: T) -> (usize, T) {
        let mut t = t % self.period;
        if t < T::zero() {
            t = t + self.period;
        }
        let k = match self.knots.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        (k, t - self.knots[k])
    }

    fn coeffs(&self, k: usize) -> [T; 4] {
        let n = self.knots.len();
        let h = self.segment_len(k);
        let (y0, y1) = (self.values[k], self.values[(k + 1) % n]);
        let (m0, m1) = (self.second[k], self.second[(k + 1) % n]);
        let six = T::lit(6.0);
        [y0, (y1 - y0) / h - h * (T::lit(2.0) * m0 + m1) / six, m0 * T::lit(0.5), (m1 - m0) / (six * h)]
    }

    fn eval(&self, t: T) -> T {
        let (k, s) = self.locate(t);
        let [a, b, c, d] = self.coeffs(k);
        a + s * (b + s * (c + s * d))
    }

    fn derivative(&self, t: T) -> T {
        let (k, s) = self.locate(t);
        let [_, b, c, d] = self.coeffs(k);
        b + s * (T::lit(2.0) * c + s * T::lit(3.0) * d)
    }
}

/// Solves a cyclic tridiagonal system (Sherman–Morrison on the Thomas
/// algorithm). Row `k` reads `sub[k] x[k-1] + diag[k] x[k] + sup[k] x[k+1]`.
pub(crate) fn solve_cyclic<T: Real>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] = diag[0] - gamma;
    d[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let thomas = |r: &[T]| -> Vec<T> {
        let mut c = vec![T::zero(); n];
        let mut x = vec![T::zero(); n];
        c[0] = sup[0] / d[0];
        x[0] = r[0] / d[0];
        for k in 1..n {
            let m = d[k] - sub[k] * c[k - 1];
            c[k] = if k + 1 < n { sup[k] / m } else { T::zero() };
            x[k] = (r[k] - sub[k] * x[k - 1]) / m;
        }
        for k in (0..n - 1).rev() {
            x[k] = x[k] - c[k] * x[k + 1];
        }
        x
    };
    let x = thomas(rhs);
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(&u);
    let factor = (x[0] + beta * x[n - 1] / gamma) / (T::one() + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(&xi, &zi)| xi - factor * zi).collect()
}

/// Closed profile curve in the `xz`-plane, interpolated by a periodic
/// cubic spline.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratingCurve<T: Real> {
    x: PeriodicSpline<T>,
    z: PeriodicSpline<T>,
    /// Arclength at each knot, plus the total length at the end.
    cumulative: Vec<T>,
    unit_speed: bool,
}

/// Relative tolerance of the arclength quadrature.
const QUAD_TOL: f64 = 1e-13;
/// Relative gap between last and first sample treated as a repeated point.
const CLOSE_TOL: f64 = 1e-9;

impl<T: Real> GeneratingCurve<T> {
    /// Spline through `points`, parametrized by cumulative chord length.
    /// A final point repeating the first is dropped.
    pub fn from_samples(points: &[Vec2<T>]) -> Result<Self> {
        let points = Self::validated(points)?;
        let mut knots = Vec::with_capacity(points.len());
        let mut t = T::zero();
        for k in 0..points.len() {
            knots.push(t);
            let (a, b) = (points[k], points[(k + 1) % points.len()]);
            let chord = (b[0] - a[0]).hypot(b[1] - a[1]);
            if !(chord > T::zero()) {
                return Err(Error::InvalidCurve(format!("repeated sample at index {k}")));
            }
            t = t + chord;
        }
        Self::with_knots(points, knots, t, false)
    }

    /// Spline through `points` taken at parameters `params` in `[0, period)`.
    pub fn from_parametrized(points: &[Vec2<T>], params: &[T], period: T) -> Result<Self> {
        if params.len() != points.len() {
            return Err(Error::InvalidCurve("parameter count differs from sample count".into()));
        }
        let points = Self::validated(points)?;
        let params = params[..points.len()].to_vec();
        if params.windows(2).any(|w| !(w[1] > w[0])) || !(period > params[params.len() - 1]) || params[0] != T::zero() {
            return Err(Error::InvalidCurve("parameters must increase from 0 within one period".into()));
        }
        Self::with_knots(points, params, period, false)
    }

    fn validated(points: &[Vec2<T>]) -> Result<Vec<Vec2<T>>> {
        let mut points = points.to_vec();
        if points.len() >= 2 {
            let (a, b) = (points[0], points[points.len() - 1]);
            let scale = points.iter().fold(T::zero(), |m, p| m.max(p[0].abs()).max(p[1].abs()));
            if (a[0] - b[0]).hypot(a[1] - b[1]) <= T::tol(CLOSE_TOL) * scale {
                points.pop();
            }
        }
        if points.len() < 4 {
            return Err(Error::InvalidCurve(format!("need at least 4 samples, got {}", points.len())));
        }
        if let Some((k, p)) = points.iter().enumerate().find(|(_, p)| !(p[0] > T::zero()) || !p[1].is_finite()) {
            return Err(Error::InvalidCurve(format!("sample {k} has x = {} <= 0", p[0])));
        }
        Ok(points)
    }

    fn with_knots(points: Vec<Vec2<T>>, knots: Vec<T>, period: T, unit_speed: bool) -> Result<Self> {
        let xs: Vec<T> = points.iter().map(|p| p[0]).collect();
        let zs: Vec<T> = points.iter().map(|p| p[1]).collect();
        let mut curve = Self {
            x: PeriodicSpline::new(&knots, period, &xs),
            z: PeriodicSpline::new(&knots, period, &zs),
            cumulative: Vec::new(),
            unit_speed,
        };
        let mut total = T::zero();
        let mut cumulative = vec![T::zero()];
        for k in 0..knots.len() {
            let t0 = knots[k];
            let t1 = t0 + curve.x.segment_len(k);
            total = total + curve.integrate(t0, t1, |_, speed| speed);
            cumulative.push(total);
        }
        if !(total > T::zero()) {
            return Err(Error::InvalidCurve("zero length".into()));
        }
        curve.cumulative = cumulative;
        Ok(curve)
    }

    /// `int_t0^t1 g(point, speed) dt` along the spline.
    fn integrate(&self, t0: T, t1: T, g: impl Fn(Vec2<T>, T) -> T) -> T {
        let integrand = |t: T| {
            let d = self.derivative(t);
            g(self.point(t), d[0].hypot(d[1]))
        };
        let scale = gauss_legendre(t0, t1, &|t| integrand(t).abs());
        integrate(t0, t1, &integrand, T::tol(QUAD_TOL) * scale, 12)
    }

    pub fn period(&self) -> T {
        self.x.period
    }

    pub fn knots(&self) -> &[T] {
        &self.x.knots
    }

    pub fn len(&self) -> usize {
        self.x.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total_length(&self) -> T {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Whether the parameter is arclength.
    pub fn is_unit_speed(&self) -> bool {
        self.unit_speed
    }

    pub fn point(&self, t: T) -> Vec2<T> {
        [self.x.eval(t), self.z.eval(t)]
    }

    pub fn derivative(&self, t: T) -> Vec2<T> {
        [self.x.derivative(t), self.z.derivative(t)]
    }

    pub fn samples(&self) -> Vec<Vec2<T>> {
        self.x.values.iter().zip(&self.z.values).map(|(&x, &z)| [x, z]).collect()
    }

    /// Arclength from parameter 0 to `t` in `[0, period]`.
    pub fn arclength_at(&self, t: T) -> T {
        let (k, _) = self.x.locate(t);
        let t0 = self.x.knots[k];
        if t >= self.period() {
            return self.total_length();
        }
        self.cumulative[k] + self.integrate(t0, t, |_, speed| speed)
    }

    /// Parameter at arclength `s` in `[0, L)`.
    fn parameter_at(&self, s: T) -> T {
        let k = match self.cumulative.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        }
        .min(self.len() - 1);
        let (t0, h) = (self.x.knots[k], self.x.segment_len(k));
        let (s0, s1) = (self.cumulative[k], self.cumulative[k + 1]);
        let mut t = t0 + h * (s - s0) / (s1 - s0);
        for _ in 0..20 {
            let d = self.derivative(t);
            let step = (self.cumulative[k] + self.integrate(t0, t, |_, v| v) - s) / d[0].hypot(d[1]);
            t = (t - step).max(t0).min(t0 + h);
            if step.abs() <= T::epsilon() * T::lit(4.0) * (T::one() + t.abs()) {
                break;
            }
        }
        t
    }

    /// Resamples `n` points equally spaced in arclength and reparametrizes
    /// by arclength `phi in [0, L)`.
    pub fn arclength_reparametrize(&self, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidCurve(format!("need at least 4 samples, got {n}")));
        }
        let length = self.total_length();
        let step = length / T::from_usize(n).unwrap();
        let phis: Vec<T> = (0..n).map(|k| T::from_usize(k).unwrap() * step).collect();
        let points: Vec<Vec2<T>> = phis.iter().map(|&s| self.point(self.parameter_at(s))).collect();
        Self::with_knots(Self::validated(&points)?, phis, length, true)
    }

    /// Surface area `2 pi int f dphi` of the torus of revolution.
    pub fn surface_area(&self) -> T {
        let mut total = T::zero();
        for k in 0..self.len() {
            let t0 = self.x.knots[k];
            total = total + self.integrate(t0, t0 + self.x.segment_len(k), |p, v| p[0] * v);
        }
        T::TAU() * total
    }
}

/// Profile given by closures `phi -> f(phi)`, `phi -> g(phi)`; derivatives by
/// central differences.
pub struct ParametricProfile<F, G> {
    pub f: F,
    pub g: G,
}

/// Profile curves that can report `(f, g)` and their `phi`-derivatives.
pub trait Profile<T: Real> {
    fn position(&self, phi: T) -> Vec2<T>;
    fn velocity(&self, phi: T) -> Vec2<T>;
}

impl<T: Real> Profile<T> for GeneratingCurve<T> {
    fn position(&self, phi: T) -> Vec2<T> {
        self.point(phi)
    }

    fn velocity(&self, phi: T) -> Vec2<T> {
        self.derivative(phi)
    }
}

impl<T: Real, F: Fn(T) -> T, G: Fn(T) -> T> Profile<T> for ParametricProfile<F, G> {
    fn position(&self, phi: T) -> Vec2<T> {
        [(self.f)(phi), (self.g)(phi)]
    }

    fn velocity(&self, phi: T) -> Vec2<T> {
        let h = T::epsilon().cbrt() * (T::one() + phi.abs());
        let two_h = h + h;
        [((self.f)(phi + h) - (self.f)(phi - h)) / two_h, ((self.g)(phi + h) - (self.g)(phi - h)) / two_h]
    }
}

/// `diag(f^2, f'^2 + g'^2)` for the parametrization
/// `(theta, phi) -> (f cos theta, f sin theta, g)`; `theta` does not enter.
pub fn first_fundamental_form<T: Real>(profile: &impl Profile<T>, _theta: T, phi: T) -> Result<[[T; 2]; 2]> {
    let f = profile.position(phi)[0];
    if !(f > T::zero()) {
        return Err(Error::InvalidCurve(format!("f({phi}) = {f} is not positive")));
    }
    let d = profile.velocity(phi);
    Ok([[f * f, T::zero()], [T::zero(), d[0] * d[0] + d[1] * d[1]]])
}

/// Isothermal chart `(theta, psi)` of a torus of revolution, conformal to
/// the flat rectangle `a Z + b Z`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RevolutionChart<T: Real> {
    /// `2 pi`.
    pub a: T,
    /// `int_0^L dphi / f`.
    pub b: T,
    /// `(phi, psi)` at each knot of the unit-speed curve, ending at `(L, b)`.
    pub psi_of_phi: Vec<(T, T)>,
    /// `F(psi_j)` at `psi_j = j b / n`, `n` the knot count.
    pub factor_profile: Vec<T>,
    #[serde(skip)]
    curve: GeneratingCurve<T>,
}

/// Largest admissible `|speed - 1|` for an arclength-parametrized curve.
pub const UNIT_SPEED_TOL: f64 = 1e-6;

/// Builds the chart of a unit-speed curve (see
/// [`GeneratingCurve::arclength_reparametrize`]).
pub fn isothermal_chart<T: Real>(curve: &GeneratingCurve<T>) -> Result<RevolutionChart<T>> {
    if !curve.is_unit_speed() {
        return Err(Error::InvalidCurve("isothermal chart needs an arclength parametrization".into()));
    }
    let n = curve.len();
    let knots = curve.knots();
    for k in 0..n {
        let mid = knots[k] + curve.x.segment_len(k) * T::lit(0.5);
        for t in [knots[k], mid] {
            let p = curve.point(t);
            if !(p[0] > T::zero()) {
                return Err(Error::InvalidCurve(format!("f({t}) = {} is not positive", p[0])));
            }
            let d = curve.derivative(t);
            if (d[0].hypot(d[1]) - T::one()).abs() > T::tol(UNIT_SPEED_TOL) {
                return Err(Error::InvalidCurve(format!("speed {} at phi = {t} is not 1", d[0].hypot(d[1]))));
            }
        }
    }
    let mut psi = T::zero();
    let mut table = vec![(T::zero(), T::zero())];
    for k in 0..n {
        let t0 = knots[k];
        let t1 = t0 + curve.x.segment_len(k);
        psi = psi + curve.integrate(t0, t1, |p, v| v / p[0]);
        table.push((t1, psi));
    }
    let mut chart = RevolutionChart { a: T::TAU(), b: psi, psi_of_phi: table, factor_profile: Vec::new(), curve: curve.clone() };
    let step = psi / T::from_usize(n).unwrap();
    chart.factor_profile = (0..n).map(|j| chart.factor_at(T::from_usize(j).unwrap() * step)).collect();
    Ok(chart)
}

impl<T: Real> RevolutionChart<T> {
    /// `psi(phi)` for `phi` in `[0, L]`.
    pub fn psi(&self, phi: T) -> T {
        let k = self.segment_of(|e| e.0, phi);
        let (phi0, psi0) = self.psi_of_phi[k];
        psi0 + self.curve.integrate(phi0, phi, |p, v| v / p[0])
    }

    fn segment_of(&self, key: impl Fn(&(T, T)) -> T, x: T) -> usize {
        let last = self.psi_of_phi.len() - 2;
        match self.psi_of_phi.binary_search_by(|e| key(e).partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(last),
            Err(k) => k.saturating_sub(1).min(last),
        }
    }

    /// Inverse of [`psi`](Self::psi): cubic Hermite on the table with slopes
    /// `dphi/dpsi = f`, polished by Newton steps.
    pub fn phi(&self, psi: T) -> T {
        let k = self.segment_of(|e| e.1, psi);
        let ((p0, s0), (p1, s1)) = (self.psi_of_phi[k], self.psi_of_phi[k + 1]);
        let h = s1 - s0;
        let u = (psi - s0) / h;
        let (m0, m1) = (self.curve.point(p0)[0] * h, self.curve.point(p1)[0] * h);
        let (u2, u3) = (u * u, u * u * u);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let mut phi = (two * u3 - three * u2 + T::one()) * p0
            + (u3 - two * u2 + u) * m0
            + (-two * u3 + three * u2) * p1
            + (u3 - u2) * m1;
        phi = phi.max(p0).min(p1);
        for _ in 0..8 {
            let r = (s0 + self.curve.integrate(p0, phi, |p, v| v / p[0])) - psi;
            let step = r * self.curve.point(phi)[0];
            phi = (phi - step).max(p0).min(p1);
            if step.abs() <= T::epsilon() * T::lit(4.0) * (T::one() + phi.abs()) {
                break;
            }
        }
        phi
    }

    /// `F(psi) = f(phi(psi))`.
    pub fn factor_at(&self, psi: T) -> T {
        self.curve.point(self.phi(psi))[0]
    }

    pub fn curve(&self) -> &GeneratingCurve<T> {
        &self.curve
    }

    /// `a int_0^b F^2 dpsi` by the periodic trapezoid rule on `rows` samples.
    pub fn area(&self, rows: usize) -> T {
        let step = self.b / T::from_usize(rows).unwrap();
        let sum: T = (0..rows).map(|j| self.factor_at(T::from_usize(j).unwrap() * step).powi(2)).sum();
        self.a * sum * step
    }

    /// Metric on `a Z + b Z` (columns along `theta`, rows along `psi`),
    /// rescaled to unit covolume.
    pub fn to_metric(&self, rows: usize, cols: usize) -> Result<TorusMetric<T>> {
        let lattice = Lattice::rectangular(self.a, self.b)?;
        let step = self.b / T::from_usize(rows).unwrap();
        let column: Vec<T> = (0..rows).map(|i| self.factor_at(T::from_usize(i).unwrap() * step)).collect();
        let data = column.iter().flat_map(|&v| std::iter::repeat_n(v, cols)).collect();
        let factor = PeriodicField::new(Grid::new(rows, cols, data)?, lattice)?;
        TorusMetric::build(lattice, factor, Rescale::Allow)
    }
}

/// [`RevolutionChart::to_metric`].
pub fn chart_to_metric<T: Real>(chart: &RevolutionChart<T>, rows: usize, cols: usize) -> Result<TorusMetric<T>> {
    chart.to_metric(rows, cols)
}

/// Circle of radius `r` centered at `(center, 0)`, `n` samples.
pub fn circle_profile<T: Real>(center: T, r: T, n: usize) -> Vec<Vec2<T>> {
    ellipse_profile(center, r, r, n)
}

/// Ellipse with semi-axes `a` (along `x`) and `b` (along `z`) centered at
/// `(center, 0)`, `n` samples.
pub fn ellipse_profile<T: Real>(center: T, a: T, b: T, n: usize) -> Vec<Vec2<T>> {
    let step = T::TAU() / T::from_usize(n).unwrap();
    (0..n)
        .map(|k| {
            let t = T::from_usize(k).unwrap() * step;
            [center + a * t.cos(), b * t.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn cyclic_solver() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|k| 1.0 + 0.1 * k as f64).collect();
        let sup: Vec<f64> = (0..n).map(|k| 0.5 + 0.05 * k as f64).collect();
        let diag = vec![4.0; n];
        let x_true: Vec<f64> = (0..n).map(|k| (k as f64).sin() + 2.0).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|k| sub[k] * x_true[(k + n - 1) % n] + diag[k] * x_true[k] + sup[k] * x_true[(k + 1) % n])
            .collect();
        for (a, b) in solve_cyclic(&sub, &diag, &sup, &rhs).iter().zip(&x_true) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn spline_reproduces_trig() {
        let n = 64;
        let knots: Vec<f64> = (0..n).map(|k| k as f64 * TAU / n as f64).collect();
        let vals: Vec<f64> = knots.iter().map(|t| t.cos()).collect();
        let s = PeriodicSpline::new(&knots, TAU, &vals);
        for k in 0..200 {
            let t = k as f64 * 0.031;
            assert_abs_diff_eq!(s.eval(t), t.cos(), epsilon = 1e-6);
            assert_abs_diff_eq!(s.derivative(t), -t.sin(), epsilon = 1e-4);
        }
    }

    #[test]
    fn fundamental_form_examples() {
        let sphere = ParametricProfile { f: |p: f64| p.sin(), g: |p: f64| p.cos() };
        let g = first_fundamental_form(&sphere, 0.3, PI / 2.0).unwrap();
        assert_abs_diff_eq!(g[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1][1], 1.0, epsilon = 1e-9);
        assert_eq!(g[0][1], 0.0);
        assert_eq!(g[1][0], 0.0);

        let torus = ParametricProfile { f: |p: f64| 2.0 + p.cos(), g: |p: f64| p.sin() };
        let g = first_fundamental_form(&torus, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(g[0][0], 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1][1], 1.0, epsilon = 1e-9);
        for k in 0..10 {
            // unit-speed profile: g22 = 1 everywhere
            let g = first_fundamental_form(&torus, 0.0, k as f64 * 0.6).unwrap();
            assert_abs_diff_eq!(g[1][1], 1.0, epsilon = 1e-9);
        }
        assert!(first_fundamental_form(&sphere, 0.0, -1.0).is_err());
    }

    #[test]
    fn circle_length() {
        let c = GeneratingCurve::from_samples(&circle_profile(2.0, 1.0, 1024)).unwrap();
        assert_abs_diff_eq!(c.total_length(), TAU, epsilon = 1e-6);
        let u = c.arclength_reparametrize(1024).unwrap();
        assert_abs_diff_eq!(u.total_length(), c.total_length(), epsilon = 1e-8 * TAU);
    }

    #[test]
    fn unit_speed_by_finite_differences() {
        let c = GeneratingCurve::from_samples(&circle_profile(2.0, 1.0, 1024)).unwrap();
        let u = c.arclength_reparametrize(1024).unwrap();
        let h = 1e-5;
        for k in 0..100 {
            let phi = k as f64 * u.total_length() / 100.0 + 0.0123;
            let (a, b) = (u.point(phi + h), u.point(phi - h));
            let speed = (a[0] - b[0]).hypot(a[1] - b[1]) / (2.0 * h);
            assert_abs_diff_eq!(speed, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn unit_speed_input_is_fixed_point() {
        let n = 256;
        let params: Vec<f64> = (0..n).map(|k| k as f64 * TAU / n as f64).collect();
        let pts: Vec<[f64; 2]> = params.iter().map(|p| [2.0 + p.cos(), p.sin()]).collect();
        let c = GeneratingCurve::from_parametrized(&pts, &params, TAU).unwrap();
        let u = c.arclength_reparametrize(n).unwrap();
        for (a, b) in u.samples().iter().zip(&pts) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-8);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-8);
        }
    }

    #[test]
    fn invalid_curves() {
        let mut pts = circle_profile(0.5, 1.0, 32);
        assert!(GeneratingCurve::from_samples(&pts).is_err());
        pts = vec![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        assert!(GeneratingCurve::from_samples(&pts).is_err());
        assert!(GeneratingCurve::from_samples(&circle_profile(2.0, 1.0, 3)).is_err());
        let c = GeneratingCurve::from_samples(&circle_profile(2.0, 1.0, 64)).unwrap();
        assert!(isothermal_chart(&c).is_err(), "needs the arclength parametrization");
    }

    #[test]
    fn closing_duplicate_dropped() {
        let mut pts = circle_profile(2.0, 1.0, 64);
        pts.push(pts[0]);
        let c = GeneratingCurve::from_samples(&pts).unwrap();
        assert_eq!(c.len(), 64);
    }

    #[test]
    fn standard_torus_chart() {
        let c = GeneratingCurve::from_samples(&circle_profile(2.0, 1.0, 1024)).unwrap();
        let chart = isothermal_chart(&c.arclength_reparametrize(1024).unwrap()).unwrap();
        assert_eq!(chart.a, TAU);
        assert_abs_diff_eq!(chart.b, TAU / 3f64.sqrt(), epsilon = 1e-5);
        assert_abs_diff_eq!(chart.area(256), 8.0 * PI * PI, epsilon = 1e-3 * 8.0 * PI * PI);
        assert!(chart.factor_profile.iter().all(|&v| v > 0.0));
        // psi inverse round trip
        for k in 0..50 {
            let phi = k as f64 * 0.12;
            assert_abs_diff_eq!(chart.phi(chart.psi(phi)), phi, epsilon = 1e-8);
        }
    }

    #[test]
    fn ellipse_chart_matches_trapezoid_oracle() {
        let (center, a, b) = (3.0, 1.0, 0.5);
        let m = 4096;
        let (mut psi, mut area) = (0.0, 0.0);
        for k in 0..m {
            let t = k as f64 * TAU / m as f64;
            let speed = (a * t.sin()).hypot(b * t.cos());
            let x = center + a * t.cos();
            psi += speed / x;
            area += speed * x;
        }
        psi *= TAU / m as f64;
        area *= TAU * TAU / m as f64;
        let c = GeneratingCurve::from_samples(&ellipse_profile(center, a, b, 512)).unwrap();
        assert_abs_diff_eq!(c.surface_area(), area, epsilon = 1e-6 * area);
        let chart = isothermal_chart(&c.arclength_reparametrize(512).unwrap()).unwrap();
        assert_abs_diff_eq!(chart.b, psi, epsilon = 1e-6 * psi);
        assert_abs_diff_eq!(chart.area(512), area, epsilon = 1e-5 * area);
    }
}
