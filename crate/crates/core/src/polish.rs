//! Continuous refinement of a discrete shortest loop under the
//! trigonometric interpolant of the factor: a rigid translation, then
//! Newton steps on the offsets of the vertices along their normals, on
//! polylines of doubling vertex count.
//! The result is the length of an actual closed polyline in the same
//! class, integrated by three-point Gauss-Legendre per segment.

use crate::field::Grid;
use crate::lattice::Vec2;
use crate::real::Real;
use crate::revolution::solve_cyclic;
use crate::spectral::{Jet, TrigSurface};

type P = [f64; 2];

const GAUSS3: [(f64, f64); 3] = [
    (0.5 - 0.387_298_334_620_741_7, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.5 + 0.387_298_334_620_741_7, 5.0 / 18.0),
];

const MAX_ITER: usize = 50;
const MIN_VERTICES: usize = 64;
const MAX_VERTICES: usize = 1024;
/// Translates per basis direction tried before the local search.
const OFFSETS: usize = 16;

fn add(a: P, b: P) -> P {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: P, b: P) -> P {
    [a[0] - b[0], a[1] - b[1]]
}

fn scale(c: f64, a: P) -> P {
    [c * a[0], c * a[1]]
}

fn dot(a: P, b: P) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn quad(m: &[[f64; 2]; 2], a: P, b: P) -> f64 {
    a[0] * (m[0][0] * b[0] + m[0][1] * b[1]) + a[1] * (m[1][0] * b[0] + m[1][1] * b[1])
}

/// Factor in plane coordinates.
struct PlaneField {
    surface: TrigSurface,
    /// Plane to lattice coordinates.
    inv: [[f64; 2]; 2],
    tables: (Vec<rustfft::num_complex::Complex64>, Vec<rustfft::num_complex::Complex64>),
}

impl PlaneField {
    fn value(&mut self, y: P) -> f64 {
        self.jet(y).value
    }

    fn jet(&mut self, y: P) -> Jet {
        let m = self.inv;
        let s = m[0][0] * y[0] + m[0][1] * y[1];
        let t = m[1][0] * y[0] + m[1][1] * y[1];
        let j = self.surface.jet(s, t, &mut self.tables);
        // chain rule through the linear map
        let grad = [
            m[0][0] * j.grad[0] + m[1][0] * j.grad[1],
            m[0][1] * j.grad[0] + m[1][1] * j.grad[1],
        ];
        let mut hess = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        hess[a][b] += m[c][a] * j.hess[c][d] * m[d][b];
                    }
                }
            }
        }
        Jet { value: j.value, grad, hess }
    }

    fn segment(&mut self, p: P, q: P) -> f64 {
        let d = sub(q, p);
        let len = dot(d, d).sqrt();
        len * GAUSS3.iter().map(|&(x, w)| w * self.value(add(p, scale(x, d)))).sum::<f64>()
    }
}

/// Closed polyline `x_0 .. x_{k-1}`, closed by `x_k = x_0 + shift`.
struct Polyline {
    points: Vec<P>,
    shift: P,
}

impl Polyline {
    fn vertex(&self, i: usize) -> P {
        let k = self.points.len();
        if i == k {
            add(self.points[0], self.shift)
        } else {
            self.points[i]
        }
    }

    fn length(&self, field: &mut PlaneField) -> f64 {
        (0..self.points.len()).map(|i| field.segment(self.vertex(i), self.vertex(i + 1))).sum()
    }

    /// Smallest factor value at the quadrature nodes.
    fn min_value(&self, field: &mut PlaneField) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.points.len() {
            let (p, d) = (self.vertex(i), sub(self.vertex(i + 1), self.vertex(i)));
            for &(x, _) in &GAUSS3 {
                m = m.min(field.value(add(p, scale(x, d))));
            }
        }
        m
    }

    fn translated(&self, by: P) -> Self {
        Self { points: self.points.iter().map(|&p| add(p, by)).collect(), shift: self.shift }
    }

    fn displaced(&self, normals: &[P], offsets: &[f64]) -> Self {
        let points = self.points.iter().zip(normals).zip(offsets).map(|((&p, &n), &a)| add(p, scale(a, n))).collect();
        Self { points, shift: self.shift }
    }
}

/// `count` vertices equally spaced in flat arclength, starting at `x_0`.
fn resample(line: &Polyline, count: usize) -> Polyline {
    let k = line.points.len();
    let mut cumulative = vec![0.0];
    for i in 0..k {
        let d = sub(line.vertex(i + 1), line.vertex(i));
        cumulative.push(cumulative[i] + dot(d, d).sqrt());
    }
    let total = cumulative[k];
    let mut seg = 0;
    let points = (0..count)
        .map(|m| {
            let s = total * m as f64 / count as f64;
            while seg + 1 < k && cumulative[seg + 1] <= s {
                seg += 1;
            }
            let span = cumulative[seg + 1] - cumulative[seg];
            let x = if span > 0.0 { (s - cumulative[seg]) / span } else { 0.0 };
            let (a, b) = (line.vertex(seg), line.vertex(seg + 1));
            add(a, scale(x, sub(b, a)))
        })
        .collect();
    Polyline { points, shift: line.shift }
}

/// Best of the translates by `(a u1 + b u2) / OFFSETS`, the identity
/// first among equals.
fn best_translate(line: &Polyline, field: &mut PlaneField, basis: [P; 2]) -> Polyline {
    let coarse = resample(line, MIN_VERTICES.min(line.points.len()));
    let mut best = (coarse.length(field), [0.0, 0.0]);
    for a in 0..OFFSETS {
        for b in 0..OFFSETS {
            let (x, y) = (a as f64 / OFFSETS as f64, b as f64 / OFFSETS as f64);
            let by = add(scale(x, basis[0]), scale(y, basis[1]));
            let v = coarse.translated(by).length(field);
            if v < best.0 {
                best = (v, by);
            }
        }
    }
    line.translated(best.1)
}

/// Minimizes the length over rigid translations.
fn translate(line: &Polyline, field: &mut PlaneField, cell: f64) -> (Polyline, f64) {
    let mut best = line.length(field);
    let mut offset = [0.0, 0.0];
    for _ in 0..MAX_ITER {
        let moved = line.translated(offset);
        let (mut g, mut h) = ([0.0; 2], [[0.0; 2]; 2]);
        for i in 0..moved.points.len() {
            let (p, q) = (moved.vertex(i), moved.vertex(i + 1));
            let d = sub(q, p);
            let len = dot(d, d).sqrt();
            for &(x, w) in &GAUSS3 {
                let jet = field.jet(add(p, scale(x, d)));
                for a in 0..2 {
                    g[a] += len * w * jet.grad[a];
                    for b in 0..2 {
                        h[a][b] += len * w * jet.hess[a][b];
                    }
                }
            }
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let mut step = if h[0][0] > 0.0 && det > 0.0 {
            [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(h[0][0] * g[1] - h[1][0] * g[0]) / det]
        } else {
            let gn = dot(g, g).sqrt().max(f64::MIN_POSITIVE);
            scale(-cell / gn, g)
        };
        let size = dot(step, step).sqrt();
        if size > cell {
            step = scale(cell / size, step);
        }
        let mut improved = false;
        for _ in 0..40 {
            let trial = add(offset, step);
            let v = line.translated(trial).length(field);
            if v < best {
                best = v;
                offset = trial;
                improved = true;
                break;
            }
            step = scale(0.5, step);
        }
        if !improved || dot(step, step).sqrt() <= 1e-14 * cell {
            break;
        }
    }
    (line.translated(offset), best)
}

/// Unit normals from central differences along the loop.
fn normals(line: &Polyline) -> Vec<P> {
    let k = line.points.len();
    (0..k)
        .map(|i| {
            let prev = if i == 0 { sub(line.points[k - 1], line.shift) } else { line.points[i - 1] };
            let t = sub(line.vertex(i + 1), prev);
            let n = dot(t, t).sqrt();
            [-t[1] / n, t[0] / n]
        })
        .collect()
}

/// Gradient and cyclic tridiagonal Hessian of the length in the normal
/// offsets, at zero offset.
fn normal_derivatives(line: &Polyline, normals: &[P], field: &mut PlaneField) -> (Vec<f64>, [Vec<f64>; 3]) {
    let k = line.points.len();
    let mut grad = vec![0.0; k];
    let (mut lower, mut diag, mut upper) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for i in 0..k {
        let j = (i + 1) % k;
        let (p, q) = (line.vertex(i), line.vertex(i + 1));
        let d = sub(q, p);
        let len = dot(d, d).sqrt();
        let n = [normals[i], normals[j]];
        // derivative of d in each variable
        let dd = [scale(-1.0, n[0]), n[1]];
        let mut f = 0.0;
        let mut f1 = [0.0; 2];
        let mut f2 = [[0.0; 2]; 2];
        for &(x, w) in &GAUSS3 {
            let jet = field.jet(add(p, scale(x, d)));
            let c = [1.0 - x, x];
            f += w * jet.value;
            for a in 0..2 {
                f1[a] += w * c[a] * dot(jet.grad, n[a]);
                for b in 0..2 {
                    f2[a][b] += w * c[a] * c[b] * quad(&jet.hess, n[a], n[b]);
                }
            }
        }
        let l1 = [dot(d, dd[0]) / len, dot(d, dd[1]) / len];
        let mut l2 = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                l2[a][b] = dot(dd[a], dd[b]) / len - dot(d, dd[a]) * dot(d, dd[b]) / len.powi(3);
            }
        }
        let e1 = |a: usize| l1[a] * f + len * f1[a];
        let e2 = |a: usize, b: usize| l2[a][b] * f + l1[a] * f1[b] + l1[b] * f1[a] + len * f2[a][b];
        grad[i] += e1(0);
        grad[j] += e1(1);
        diag[i] += e2(0, 0);
        diag[j] += e2(1, 1);
        upper[i] += e2(0, 1);
        lower[j] += e2(0, 1);
    }
    (grad, [lower, diag, upper])
}

/// Damped Newton on the normal offsets, renormalizing after each step.
fn bend(mut line: Polyline, mut best: f64, field: &mut PlaneField, cell: f64) -> (Polyline, f64) {
    if line.points.len() < 3 {
        return (line, best);
    }
    let mut damping = 0.0;
    for _ in 0..MAX_ITER {
        let n = normals(&line);
        let (grad, [lower, diag, upper]) = normal_derivatives(&line, &n, field);
        let typical = diag.iter().map(|v| v.abs()).sum::<f64>() / diag.len() as f64;
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut improved = false;
        for _ in 0..30 {
            let shifted: Vec<f64> = diag.iter().map(|v| v + damping * typical).collect();
            let mut step = solve_cyclic(&lower, &shifted, &upper, &rhs);
            let size = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !size.is_finite() {
                damping = (damping * 4.0).max(1e-3);
                continue;
            }
            if size > cell {
                step.iter_mut().for_each(|v| *v *= cell / size);
            }
            let trial = line.displaced(&n, &step);
            let v = trial.length(field);
            if v < best {
                let gain = best - v;
                best = v;
                line = trial;
                damping *= 0.25;
                improved = gain > 1e-15 * best && size > 1e-13 * cell;
                break;
            }
            damping = (damping * 4.0).max(1e-3);
        }
        if !improved {
            break;
        }
    }
    (line, best)
}

/// Refines `path` (a lift from a point to its translate) and returns the
/// length and vertices of the refined loop, or `None` when the interpolant
/// is not positive along it.
pub(crate) fn polish<T: Real>(f: &Grid<T>, basis: [Vec2<T>; 2], path: &[Vec2<T>]) -> Option<(T, Vec<Vec2<T>>)> {
    let [u1, u2] = basis.map(|v| v.map(|x| x.to_f64_lossy()));
    let det = u1[0] * u2[1] - u1[1] * u2[0];
    let inv = [[u2[1] / det, -u2[0] / det], [-u1[1] / det, u1[0] / det]];
    let mut field = PlaneField { surface: TrigSurface::new(f), inv, tables: Default::default() };
    let pts: Vec<P> = path.iter().map(|p| p.map(|x| x.to_f64_lossy())).collect();
    let k = pts.len() - 1;
    let line = Polyline { points: pts[..k].to_vec(), shift: sub(pts[k], pts[0]) };
    let cell = (dot(u1, u1).sqrt() / f.cols() as f64).min(dot(u2, u2).sqrt() / f.rows() as f64);
    let line = best_translate(&line, &mut field, [u1, u2]);
    let (line, _) = translate(&line, &mut field, cell);
    let target = f.rows().max(f.cols()).clamp(MIN_VERTICES, MAX_VERTICES);
    let mut count = MIN_VERTICES;
    let mut line = line;
    let mut best;
    loop {
        line = resample(&line, count);
        best = line.length(&mut field);
        (line, best) = bend(line, best, &mut field, cell);
        if count >= target {
            break;
        }
        count = (2 * count).min(target);
    }
    if !(best > 0.0 && line.min_value(&mut field) > 0.0) {
        return None;
    }
    let out = (0..=line.points.len()).map(|i| line.vertex(i).map(T::lit)).collect();
    Some((T::lit(best), out))
}
