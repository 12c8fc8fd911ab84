//! Discrete systole against a plain Dijkstra over an explicit patch of the
//! universal cover.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;
use torus_core::systole::{flat_systole, systole_upper, STENCIL};
use torus_core::{Lattice, PeriodicField, TorusMetric};

/// Periods of the cover on each side of the base cell.
const REACH: i64 = 3;

fn oracle(m: &TorusMetric<f64>) -> f64 {
    let f = m.factor().samples();
    let (rows, cols) = (f.rows() as i64, f.cols() as i64);
    let [u1, u2] = m.lattice().basis();
    let value = |i: i64, j: i64| f.get(i.rem_euclid(rows) as usize, j.rem_euclid(cols) as usize);
    let step_len = |di: i64, dj: i64| {
        let (a, b) = (dj as f64 / cols as f64, di as f64 / rows as f64);
        let v = [a * u1[0] + b * u2[0], a * u1[1] + b * u2[1]];
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    };
    let (lo_i, lo_j) = (-REACH * rows, -REACH * cols);
    let (h, w) = ((2 * REACH + 1) * rows, (2 * REACH + 1) * cols);
    let index = |i: i64, j: i64| {
        let (a, b) = (i - lo_i, j - lo_j);
        (a >= 0 && b >= 0 && a < h && b < w).then(|| (a * w + b) as usize)
    };
    let mut best = f64::INFINITY;
    for i0 in 0..rows {
        for j0 in 0..cols {
            let mut dist = vec![f64::INFINITY; (h * w) as usize];
            let mut heap = BinaryHeap::new();
            dist[index(i0, j0).unwrap()] = 0.0;
            heap.push((Reverse(ordered(0.0)), i0, j0));
            while let Some((Reverse(d), i, j)) = heap.pop() {
                let d = d.0;
                if d > dist[index(i, j).unwrap()] {
                    continue;
                }
                for &(di, dj) in &STENCIL {
                    let (a, b) = (i + di, j + dj);
                    if let Some(k) = index(a, b) {
                        let nd = d + step_len(di, dj) * 0.5 * (value(i, j) + value(a, b));
                        if nd < dist[k] {
                            dist[k] = nd;
                            heap.push((Reverse(ordered(nd)), a, b));
                        }
                    }
                }
            }
            for p in -2..=2i64 {
                for q in -2..=2i64 {
                    if (p, q) != (0, 0) {
                        if let Some(k) = index(i0 + q * rows, j0 + p * cols) {
                            best = best.min(dist[k]);
                        }
                    }
                }
            }
        }
    }
    best
}

#[derive(PartialEq)]
struct Ordered(f64);
impl Eq for Ordered {}
impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
fn ordered(x: f64) -> Ordered {
    Ordered(x)
}

fn random_metric(rng: &mut impl Rng, rows: usize, cols: usize) -> (TorusMetric<f64>, f64) {
    let tau = loop {
        let t = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.85..1.6));
        if t.norm() > 1.0 {
            break t;
        }
    };
    let lattice = Lattice::from_tau(tau).unwrap();
    let (mx, my) = (rng.gen_range(-2..=2) as f64, rng.gen_range(0..=2) as f64);
    let (amp, phase) = (rng.gen_range(0.0..0.45), rng.gen_range(0.0..TAU));
    let factor = PeriodicField::from_fn(rows, cols, lattice, |s: f64, t: f64| 1.0 + amp * (TAU * (mx * s + my * t) + phase).sin()).unwrap();
    (TorusMetric::from_factor(factor).unwrap(), 1.0 - amp)
}

#[test]
fn discrete_systole_matches_brute_force_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (rows, cols) in [(8, 8), (6, 10), (9, 7), (8, 8), (10, 6), (7, 7)] {
        let (m, _) = random_metric(&mut rng, rows, cols);
        let want = oracle(&m);
        let got = systole_upper(&m).unwrap();
        assert!((got.discrete_upper - want).abs() <= 1e-12 * want, "{rows}x{cols}: {} vs {want}", got.discrete_upper);
    }
}

#[test]
fn rough_tables_match_brute_force_dijkstra() {
    for (contrast, tau) in [(9.0, Complex64::new(0.0, 1.0)), (50.0, Complex64::new(0.3, 1.1)), (400.0, Complex64::new(-0.5, 0.75f64.sqrt()))] {
        let lattice = Lattice::from_tau(tau).unwrap();
        let f = PeriodicField::from_fn(4, 4, lattice, |s: f64, t: f64| if ((4.0 * s).round() + (4.0 * t).round()) as i64 % 2 == 0 { 1.0 } else { contrast }).unwrap();
        let m = TorusMetric::from_factor(f).unwrap();
        let want = oracle(&m);
        let got = systole_upper(&m).unwrap();
        assert!((got.discrete_upper - want).abs() <= 1e-12 * want, "{contrast}: {} vs {want}", got.discrete_upper);
    }
}

#[test]
fn polished_loop_is_a_closed_lift_of_its_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..4 {
        let (m, min_f) = random_metric(&mut rng, 16, 16);
        let s = systole_upper(&m).unwrap();
        let t = m.lattice().point(s.witness_class.p, s.witness_class.q);
        let (a, b) = (s.witness_path[0], *s.witness_path.last().unwrap());
        assert!((b[0] - a[0] - t[0]).abs() < 1e-12 && (b[1] - a[1] - t[1]).abs() < 1e-12);
        // polishing improves on the discrete loop up to the trapezoid error
        assert!(s.upper <= s.discrete_upper + s.err_quadrature);
        assert!(s.upper >= min_f * flat_systole(m.lattice()) * (1.0 - 1e-12));
    }
}

#[test]
fn constant_factor_gives_flat_systole() {
    for tau in [Complex64::new(0.0, 1.0), Complex64::new(0.5, 0.75f64.sqrt()), Complex64::new(0.2, 1.3)] {
        let lattice = Lattice::from_tau(tau).unwrap();
        let m = TorusMetric::from_factor(PeriodicField::constant(24, 24, lattice, 2.0).unwrap()).unwrap();
        let s = systole_upper(&m).unwrap();
        assert!((s.upper - 2.0 * flat_systole(&lattice)).abs() < 1e-12, "{tau}: {}", s.upper);
    }
}
