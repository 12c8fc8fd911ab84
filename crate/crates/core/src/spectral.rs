//! `L^1` norms of band-limited periodic samples through their trigonometric
//! interpolant: roots are located on each grid line and the interpolant's
//! antiderivative is evaluated exactly between consecutive roots.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::field::Grid;
use crate::real::Real;

/// Trigonometric interpolant of `n` samples on `[0, 1)`.
struct TrigLine {
    mean: f64,
    /// `c_k` for `k = 1..=n/2`; the line is `mean + sum Re(c_k e^{2 pi i k x})`.
    coeffs: Vec<Complex64>,
}

impl TrigLine {
    fn new(values: &[f64], buffer: &mut Vec<Complex64>, fft: &dyn rustfft::Fft<f64>) -> Self {
        let n = values.len();
        buffer.clear();
        buffer.extend(values.iter().map(|&v| Complex64::new(v, 0.0)));
        fft.process(buffer);
        let scale = 1.0 / n as f64;
        // forward transform uses e^{-2 pi i j k / n}; c_k = 2 X_k / n
        let coeffs = (1..=n / 2)
            .map(|k| {
                let weight = if 2 * k == n { 1.0 } else { 2.0 };
                buffer[k] * (weight * scale)
            })
            .collect();
        Self { mean: buffer[0].re * scale, coeffs }
    }

    /// `(g(x), g'(x), G(x))` with `G(0) = 0`.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let step = Complex64::from_polar(1.0, std::f64::consts::TAU * x);
        let mut e = Complex64::new(1.0, 0.0);
        let (mut g, mut dg, mut big_g) = (self.mean, 0.0, self.mean * x);
        for (k, c) in self.coeffs.iter().enumerate() {
            e *= step;
            let w = std::f64::consts::TAU * (k + 1) as f64;
            let term = c * e;
            g += term.re;
            dg += (term * Complex64::new(0.0, w)).re;
            big_g += (c * (e - 1.0) / Complex64::new(0.0, w)).re;
        }
        (g, dg, big_g)
    }

    /// Root in `[a, b]` given a sign change at the ends: Newton steps
    /// safeguarded by bisection.
    fn root(&self, mut a: f64, mut b: f64, ga: f64) -> f64 {
        let mut x = 0.5 * (a + b);
        for _ in 0..100 {
            let (g, dg, _) = self.eval(x);
            if g == 0.0 {
                return x;
            }
            if (g > 0.0) == (ga > 0.0) {
                a = x;
            } else {
                b = x;
            }
            let newton = x - g / dg;
            let next = if dg != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - x).abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) || b - a <= 4.0 * f64::EPSILON {
                return next;
            }
            x = next;
        }
        x
    }

    /// `int_0^1 |g|`.
    fn l1(&self, values: &[f64]) -> f64 {
        let n = values.len();
        let h = 1.0 / n as f64;
        let mut roots = Vec::new();
        for i in 0..n {
            let (gi, gj) = (values[i], values[(i + 1) % n]);
            if gi == 0.0 {
                roots.push(i as f64 * h);
            } else if gi * gj < 0.0 {
                roots.push(self.root(i as f64 * h, (i + 1) as f64 * h, gi));
            }
        }
        if roots.is_empty() {
            return self.mean.abs();
        }
        let anti: Vec<f64> = roots.iter().map(|&r| self.eval(r).2).collect();
        let mut total = 0.0;
        for j in 0..anti.len() {
            let next = if j + 1 < anti.len() { anti[j + 1] } else { anti[0] + self.mean };
            total += (next - anti[j]).abs();
        }
        total
    }
}

/// `int |v|` over the unit square for samples of a band-limited function.
/// Lines run along the axis of larger total variation.
pub(crate) fn l1_norm<T: Real>(values: &Grid<T>) -> T {
    let (rows, cols) = (values.rows(), values.cols());
    let get = |i: usize, j: usize| values.get(i, j).to_f64_lossy();
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            var_x += (get(i, (j + 1) % cols) - get(i, j)).abs();
            var_y += (get((i + 1) % rows, j) - get(i, j)).abs();
        }
    }
    let along_x = var_x >= var_y;
    let (lines, len) = if along_x { (rows, cols) } else { (cols, rows) };
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut buffer = Vec::with_capacity(len);
    let mut line = vec![0.0; len];
    let mut total = 0.0;
    for l in 0..lines {
        for (k, v) in line.iter_mut().enumerate() {
            *v = if along_x { get(l, k) } else { get(k, l) };
        }
        total += TrigLine::new(&line, &mut buffer, fft.as_ref()).l1(&line);
    }
    T::lit(total / lines as f64)
}

/// Mode `Re(a e^{2 pi i (kx s + ky t)})` of a [`TrigSurface`].
#[derive(Clone, Copy)]
struct Mode {
    kx: usize,
    ky: i64,
    a: Complex64,
}

/// Trigonometric interpolant of grid samples, `f(s, t)` with `s` along
/// columns and `t` along rows, both of period 1.
pub(crate) struct TrigSurface {
    rows: usize,
    modes: Vec<Mode>,
    max_kx: usize,
}

/// Value, gradient and Hessian in `(s, t)`.
pub(crate) struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl TrigSurface {
    /// Modes below `1e-15` of the total coefficient mass are dropped.
    pub(crate) fn new<T: Real>(values: &Grid<T>) -> Self {
        let (rows, cols) = (values.rows(), values.cols());
        let mut planner = FftPlanner::new();
        let fft_row = planner.plan_fft_forward(cols);
        let fft_col = planner.plan_fft_forward(rows);
        let half = cols / 2 + 1;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); rows * half];
        let mut line = vec![Complex64::new(0.0, 0.0); cols.max(rows)];
        for i in 0..rows {
            for j in 0..cols {
                line[j] = Complex64::new(values.get(i, j).to_f64_lossy(), 0.0);
            }
            fft_row.process(&mut line[..cols]);
            spectrum[i * half..(i + 1) * half].copy_from_slice(&line[..half]);
        }
        for kx in 0..half {
            for i in 0..rows {
                line[i] = spectrum[i * half + kx];
            }
            fft_col.process(&mut line[..rows]);
            for i in 0..rows {
                spectrum[i * half + kx] = line[i];
            }
        }
        let scale = 1.0 / (rows * cols) as f64;
        let mass: f64 = spectrum.iter().map(|c| c.norm()).sum::<f64>() * scale;
        let mut modes = Vec::new();
        for l in 0..rows {
            for kx in 0..half {
                // conjugate pairs (kx, ky) and (-kx, -ky) fold into one term
                let weight = if kx == 0 || 2 * kx == cols { 1.0 } else { 2.0 };
                let a = spectrum[l * half + kx] * (weight * scale);
                if a.norm() <= 1e-15 * mass {
                    continue;
                }
                let ky = if 2 * l <= rows { l as i64 } else { l as i64 - rows as i64 };
                modes.push(Mode { kx, ky, a });
            }
        }
        Self { rows, modes, max_kx: half - 1 }
    }

    pub(crate) fn jet(&self, s: f64, t: f64, tables: &mut (Vec<Complex64>, Vec<Complex64>)) -> Jet {
        let (ex, ey) = tables;
        powers(ex, s, self.max_kx + 1);
        powers(ey, t, self.rows / 2 + 1);
        let mut jet = Jet { value: 0.0, grad: [0.0; 2], hess: [[0.0; 2]; 2] };
        let tau = std::f64::consts::TAU;
        for m in &self.modes {
            let (wx, wy) = (tau * m.kx as f64, tau * m.ky as f64);
            let ey = ey[m.ky.unsigned_abs() as usize];
            let e = ex[m.kx] * if m.ky < 0 { ey.conj() } else { ey };
            let z = m.a * e;
            // d/ds multiplies by i wx
            jet.value += z.re;
            jet.grad[0] -= wx * z.im;
            jet.grad[1] -= wy * z.im;
            jet.hess[0][0] -= wx * wx * z.re;
            jet.hess[0][1] -= wx * wy * z.re;
            jet.hess[1][1] -= wy * wy * z.re;
        }
        jet.hess[1][0] = jet.hess[0][1];
        jet
    }
}

/// `e^{2 pi i k x}` for `k < n`.
fn powers(out: &mut Vec<Complex64>, x: f64, n: usize) {
    out.clear();
    let step = Complex64::from_polar(1.0, std::f64::consts::TAU * x);
    let mut e = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        out.push(e);
        e *= step;
    }
}
