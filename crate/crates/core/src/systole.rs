//! Systole of a conformal torus metric.
//!
//! Loops are searched per free homotopy class `(p, q)` as shortest paths
//! in the universal cover between a grid node and its `(p, q)` translate,
//! on a 16-neighbor stencil (king and knight moves) whose edge weight is
//! the flat step length times the mean of `f` at the two endpoints.
//! Every discrete loop is an admissible loop, so the result is an upper
//! bound; [`SystoleEstimate`] carries the error model that relates it to
//! the continuous systole. The winning loop is then translated rigidly to
//! minimize its length under the trigonometric interpolant of the samples.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Grid, PeriodicField};
use crate::lattice::{norm, Lattice, Vec2};
use crate::metric::TorusMetric;
use crate::real::Real;
use crate::polish::polish;

/// King moves followed by knight moves, as `(d_row, d_col)`.
pub const STENCIL: [(i64, i64); 16] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (1, 2),
    (2, 1),
    (2, -1),
    (1, -2),
    (-1, -2),
    (-2, -1),
    (-2, 1),
    (-1, 2),
];

/// Coefficient of the grid term in the error model.
pub const GRID_ERROR_COEFF: f64 = 2.0;

/// Relative length difference below which loops from different base points
/// count as tied; the first one found is kept.
const TIE_TOL: f64 = 1e-10;

/// Largest search window, in nodes.
const MAX_WINDOW: usize = 64 << 20;

/// Free homotopy class of loops, translation `p u1 + q u2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HomotopyClass<T: Real> {
    pub p: i64,
    pub q: i64,
    pub flat_length: T,
}

impl<T: Real> HomotopyClass<T> {
    /// Canonical representative: `p > 0`, or `p == 0` and `q > 0`.
    pub fn new(p: i64, q: i64, lattice: &Lattice<T>) -> Option<Self> {
        let (p, q) = match (p, q) {
            (0, 0) => return None,
            (p, q) if p < 0 || (p == 0 && q < 0) => (-p, -q),
            pq => pq,
        };
        Some(Self { p, q, flat_length: lattice.flat_length(p, q) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OneVarExact,
    GridDijkstra,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystoleEstimate<T: Real> {
    /// Length of the best loop.
    pub upper: T,
    /// Stencil length of the best discrete loop before translation.
    pub discrete_upper: T,
    /// Amount by which `upper` may exceed the continuous systole.
    pub err: T,
    /// Amount by which `upper` may fall short of its own loop's length.
    pub err_quadrature: T,
    pub witness_class: HomotopyClass<T>,
    /// Lift of the witness loop, from a grid node to its translate.
    pub witness_path: Vec<Vec2<T>>,
    /// `sigma * (upper - err)`, a lower bound for `E(f)`.
    pub lower_fubini: T,
    pub grid: (usize, usize),
    pub method: Method,
    /// Worst relative overestimate of straight lengths by the stencil.
    pub stencil_anisotropy: T,
}

/// Relative overestimate of the stencil path norm versus the Euclidean norm
/// for the given step vectors: `max |a - b| / |a x b| - 1` over angularly
/// adjacent unit steps.
pub fn stencil_anisotropy<T: Real>(steps: &[Vec2<T>]) -> T {
    let mut dirs: Vec<(T, Vec2<T>)> = steps
        .iter()
        .map(|v| {
            let n = norm(*v);
            (v[1].atan2(v[0]), [v[0] / n, v[1] / n])
        })
        .collect();
    dirs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let mut worst = T::one();
    for k in 0..dirs.len() {
        let a = dirs[k].1;
        let b = dirs[(k + 1) % dirs.len()].1;
        let cross = (a[0] * b[1] - a[1] * b[0]).abs();
        if cross <= T::zero() {
            continue;
        }
        let chord = (a[0] - b[0]).hypot(a[1] - b[1]);
        worst = worst.max(chord / cross);
    }
    worst - T::one()
}

/// Canonical classes with `flat_length <= upper_bound / min_f`, sorted by
/// flat length, then `(p, q)`.
pub fn candidate_classes<T: Real>(lattice: &Lattice<T>, min_f: T, upper_bound: T) -> Result<Vec<HomotopyClass<T>>> {
    let lambda1 = lattice.successive_minima().lambda1;
    let floor = min_f * lambda1;
    if !(min_f > T::zero()) || !(upper_bound >= floor * (T::one() - T::tol(1e-12))) || !upper_bound.is_finite() {
        return Err(Error::InvalidBound { upper: upper_bound.to_f64_lossy(), floor: floor.to_f64_lossy() });
    }
    let cutoff = upper_bound / min_f * (T::one() + T::tol(1e-12));
    let [b1, b2] = lattice.basis();
    let cov = lattice.covolume();
    // |p| = |v x b2| / covolume <= |v| |b2| / covolume
    let pmax = (cutoff * norm(b2) / cov).floor().to_i64().unwrap_or(0) + 1;
    let qmax = (cutoff * norm(b1) / cov).floor().to_i64().unwrap_or(0) + 1;
    let mut out = Vec::new();
    for p in 0..=pmax {
        for q in -qmax..=qmax {
            if p == 0 && q <= 0 {
                continue;
            }
            let c = HomotopyClass::new(p, q, lattice).unwrap();
            if c.flat_length <= cutoff {
                out.push(c);
            }
        }
    }
    out.sort_by(|a, b| {
        a.flat_length
            .partial_cmp(&b.flat_length)
            .unwrap_or(Ordering::Equal)
            .then((a.p, a.q).cmp(&(b.p, b.q)))
    });
    Ok(out)
}

#[derive(Clone, Copy)]
struct QueueItem<T> {
    key: T,
    g: T,
    idx: u32,
}

impl<T: Real> PartialEq for QueueItem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for QueueItem<T> {}
impl<T: Real> PartialOrd for QueueItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for QueueItem<T> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.partial_cmp(&self.key).unwrap_or(Ordering::Equal).then(other.idx.cmp(&self.idx))
    }
}

struct Workspace<T> {
    dist: Vec<T>,
    pred: Vec<u32>,
    seen: Vec<u32>,
    done: Vec<u32>,
    tgt: Vec<u32>,
    stamp: u32,
    heap: BinaryHeap<QueueItem<T>>,
    row_mod: Vec<usize>,
    col_mod: Vec<usize>,
    pot_a: Vec<Option<i64>>,
    pot_b: Vec<Option<i64>>,
    gauge_a: Vec<T>,
    gauge_b: Vec<T>,
}

impl<T: Real> Default for Workspace<T> {
    fn default() -> Self {
        Self {
            dist: Vec::new(),
            pred: Vec::new(),
            seen: Vec::new(),
            done: Vec::new(),
            tgt: Vec::new(),
            stamp: 0,
            heap: BinaryHeap::new(),
            row_mod: Vec::new(),
            col_mod: Vec::new(),
            pot_a: Vec::new(),
            pot_b: Vec::new(),
            gauge_a: Vec::new(),
            gauge_b: Vec::new(),
        }
    }
}

impl<T: Real> Workspace<T> {
    fn reset(&mut self, size: usize) {
        if self.seen.len() < size {
            self.dist.resize(size, T::zero());
            self.pred.resize(size, 0);
            self.seen.resize(size, 0);
            self.done.resize(size, 0);
            self.tgt.resize(size, 0);
        }
        if self.stamp == u32::MAX {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.done.iter_mut().for_each(|s| *s = 0);
            self.tgt.iter_mut().for_each(|s| *s = 0);
            self.stamp = 0;
        }
        self.stamp += 1;
        self.heap.clear();
    }
}

struct Window {
    row0: i64,
    col0: i64,
    rows: i64,
    cols: i64,
}

impl Window {
    fn union(&self, other: &Window) -> Window {
        let row0 = self.row0.min(other.row0);
        let col0 = self.col0.min(other.col0);
        let row1 = (self.row0 + self.rows).max(other.row0 + other.rows);
        let col1 = (self.col0 + self.cols).max(other.col0 + other.cols);
        Window { row0, col0, rows: row1 - row0, cols: col1 - col0 }
    }

    #[inline]
    fn index(&self, i: i64, j: i64) -> Option<usize> {
        let (a, b) = (i - self.row0, j - self.col0);
        (a >= 0 && b >= 0 && a < self.rows && b < self.cols).then(|| (a * self.cols + b) as usize)
    }

    #[inline]
    fn coords(&self, idx: usize) -> (i64, i64) {
        let idx = idx as i64;
        (self.row0 + idx / self.cols, self.col0 + idx % self.cols)
    }
}

/// Exact distance to a whole grid line through the target (a column when
/// the class winds in `u1`, else a row), on the cylinder obtained by
/// quotienting the cover along that line. Restricted to the search window
/// it is a consistent A* heuristic and a lower bound per base point.
struct LinePotential<T> {
    line_is_col: bool,
    period: i64,
    lo: i64,
    hi: i64,
    data: Vec<T>,
}

impl<T: Real> LinePotential<T> {
    #[inline]
    fn get(&self, i: i64, j: i64) -> T {
        let (a, b) = if self.line_is_col { (i, j) } else { (j, i) };
        if b < self.lo || b > self.hi {
            return T::zero();
        }
        self.data[((b - self.lo) * self.period + a.rem_euclid(self.period)) as usize]
    }
}

/// Prefix sums of step weights around each closed transversal line.
struct LineArclength<T> {
    per_line: usize,
    cumulative: Vec<Vec<T>>,
}

impl<T: Real> LineArclength<T> {
    /// Upper bound for the distance between base points `a` and `b`
    /// (infinite across lines).
    fn distance(&self, a: usize, b: usize) -> T {
        if a / self.per_line != b / self.per_line {
            return T::infinity();
        }
        let acc = &self.cumulative[a / self.per_line];
        let (x, y) = (acc[a % self.per_line], acc[b % self.per_line]);
        let direct = (x - y).abs();
        direct.min(acc[self.per_line] - direct)
    }
}

/// Weighted stencil graph on the universal cover of a metric's grid.
struct CoverGraph<'a, T: Real> {
    f: &'a Grid<T>,
    rows: i64,
    cols: i64,
    /// Maps `(d_col, d_row)` to the plane: columns are `u1 / cols`, `u2 / rows`.
    to_plane: [Vec2<T>; 2],
    /// Inverse rows: index displacement per unit plane displacement.
    from_plane: [Vec2<T>; 2],
    steps: Vec<(i64, i64, T)>,
    /// Facet functionals of the convex hull of the unit step directions:
    /// the stencil path norm of `d` is the largest `<a, d>`.
    gauge: Vec<Vec2<T>>,
    min_f: T,
}

impl<'a, T: Real> CoverGraph<'a, T> {
    fn new(metric: &'a TorusMetric<T>) -> Self {
        let f = metric.factor().samples();
        let (rows, cols) = (f.rows() as i64, f.cols() as i64);
        let [u1, u2] = metric.lattice().basis();
        let (nr, nc) = (T::from_i64(rows).unwrap(), T::from_i64(cols).unwrap());
        let e_col = [u1[0] / nc, u1[1] / nc];
        let e_row = [u2[0] / nr, u2[1] / nr];
        let det = e_col[0] * e_row[1] - e_col[1] * e_row[0];
        let from_plane = [[e_row[1] / det, -e_row[0] / det], [-e_col[1] / det, e_col[0] / det]];
        let to_plane = [e_col, e_row];
        let steps = STENCIL
            .iter()
            .map(|&(di, dj)| {
                let v = Self::plane(&to_plane, di, dj);
                (di, dj, norm(v))
            })
            .collect();
        let dirs: Vec<Vec2<T>> = STENCIL
            .iter()
            .map(|&(di, dj)| {
                let v = Self::plane(&to_plane, di, dj);
                let n = norm(v);
                [v[0] / n, v[1] / n]
            })
            .collect();
        let gauge = hull_functionals(&dirs);
        Self { f, rows, cols, to_plane, from_plane, steps, gauge, min_f: f.min() }
    }

    #[inline]
    fn plane(to_plane: &[Vec2<T>; 2], di: i64, dj: i64) -> Vec2<T> {
        let (a, b) = (T::from_i64(dj).unwrap(), T::from_i64(di).unwrap());
        [a * to_plane[0][0] + b * to_plane[1][0], a * to_plane[0][1] + b * to_plane[1][1]]
    }

    fn point(&self, i: i64, j: i64) -> Vec2<T> {
        Self::plane(&self.to_plane, i, j)
    }

    #[inline]
    fn value(&self, i: i64, j: i64) -> T {
        self.f.get(i.rem_euclid(self.rows) as usize, j.rem_euclid(self.cols) as usize)
    }

    fn step_vectors(&self) -> Vec<Vec2<T>> {
        STENCIL.iter().map(|&(di, dj)| Self::plane(&self.to_plane, di, dj)).collect()
    }

    /// Index translation of class `(p, q)`.
    fn shift(&self, class: &HomotopyClass<T>) -> (i64, i64) {
        (class.q * self.rows, class.p * self.cols)
    }

    /// Nodes every loop of the class meets: two adjacent columns when the
    /// loop winds in `u1`, two adjacent rows otherwise (steps move at most
    /// two indices).
    fn transversal(&self, class: &HomotopyClass<T>) -> Vec<(i64, i64)> {
        if class.p != 0 {
            (0..2).flat_map(|j| (0..self.rows).map(move |i| (i, j))).collect()
        } else {
            (0..2).flat_map(|i| (0..self.cols).map(move |j| (i, j))).collect()
        }
    }

    /// Length of the straight grid loop from `(i, j)` repeating one stencil
    /// step, if the class translation is a multiple of that step.
    fn straight_loop(&self, class: &HomotopyClass<T>, i: i64, j: i64) -> Option<T> {
        self.straight_loop_at(self.shift(class), (i, j))
    }

    fn straight_loop_at(&self, (si, sj): (i64, i64), (i, j): (i64, i64)) -> Option<T> {
        let half = T::lit(0.5);
        self.steps.iter().find_map(|&(di, dj, len)| {
            let k = if dj != 0 { sj / dj } else { si / di };
            if k <= 0 || di * k != si || dj * k != sj {
                return None;
            }
            let mut total = T::zero();
            let mut prev = self.value(i, j);
            for s in 1..=k {
                let next = self.value(i + s * di, j + s * dj);
                total = total + len * (prev + next) * half;
                prev = next;
            }
            Some(total)
        })
    }

    fn window(&self, src: (i64, i64), shift: (i64, i64), bound: T) -> Result<Window> {
        let radius = bound / self.min_f * T::lit(0.5);
        let half_row = (radius * norm(self.from_plane[1])).ceil().to_i64().unwrap_or(i64::MAX / 4) + 2;
        let half_col = (radius * norm(self.from_plane[0])).ceil().to_i64().unwrap_or(i64::MAX / 4) + 2;
        let mid_row = src.0 + shift.0 / 2;
        let mid_col = src.1 + shift.1 / 2;
        let rows = 2 * half_row + 2;
        let cols = 2 * half_col + 2;
        if rows.saturating_mul(cols) > MAX_WINDOW as i64 {
            return Err(Error::Input(format!("systole search window {rows}x{cols} too large; is min f close to 0?")));
        }
        Ok(Window { row0: mid_row - half_row - 1, col0: mid_col - half_col - 1, rows, cols })
    }

    /// Multi-source Dijkstra from the given lines (column or row indices in
    /// the cover) over the strip `[lo, hi]` of that coordinate.
    fn line_potential(&self, line_is_col: bool, lines: &[i64], lo: i64, hi: i64) -> Result<LinePotential<T>> {
        let period = if line_is_col { self.rows } else { self.cols };
        let width = hi - lo + 1;
        if period.saturating_mul(width) > MAX_WINDOW as i64 {
            return Err(Error::Input("systole potential strip too large".into()));
        }
        let size = (period * width) as usize;
        let mut data = vec![T::infinity(); size];
        let mut done = vec![false; size];
        let mut heap = BinaryHeap::new();
        let at = |a: i64, b: i64| ((b - lo) * period + a) as usize;
        // (a, b) -> (row, col)
        let ij = |a: i64, b: i64| if line_is_col { (a, b) } else { (b, a) };
        for &line in lines.iter().filter(|&&l| l >= lo && l <= hi) {
            for a in 0..period {
                let k = at(a, line);
                data[k] = T::zero();
                heap.push(QueueItem { key: T::zero(), g: T::zero(), idx: k as u32 });
            }
        }
        let half = T::lit(0.5);
        while let Some(QueueItem { g, idx, .. }) = heap.pop() {
            let u = idx as usize;
            if done[u] || g > data[u] {
                continue;
            }
            done[u] = true;
            let (a, b) = ((u as i64) % period, lo + (u as i64) / period);
            let (i, j) = ij(a, b);
            let fu = self.value(i, j);
            for &(di, dj, len) in &self.steps {
                let (da, db) = if line_is_col { (di, dj) } else { (dj, di) };
                let nb = b + db;
                if nb < lo || nb > hi {
                    continue;
                }
                let na = (a + da).rem_euclid(period);
                let v = at(na, nb);
                if done[v] {
                    continue;
                }
                let ng = g + len * (fu + self.value(i + di, j + dj)) * half;
                if ng < data[v] {
                    data[v] = ng;
                    heap.push(QueueItem { key: ng, g: ng, idx: v as u32 });
                }
            }
        }
        Ok(LinePotential { line_is_col, period, lo, hi, data })
    }

    /// Potentials for base points on the transversal line of `src`: the
    /// distance to the target line, and the distance to a two-line band
    /// halfway to it, which every path to the target crosses.
    fn potentials_for(&self, class: &HomotopyClass<T>, src: (i64, i64), bound: T) -> Result<[LinePotential<T>; 2]> {
        let shift = self.shift(class);
        let win = self.window(src, shift, bound)?;
        if class.p != 0 {
            let (lo, hi) = (win.col0, win.col0 + win.cols - 1);
            let mid = src.1 + shift.1 / 2;
            Ok([
                self.line_potential(true, &[src.1 + shift.1], lo, hi)?,
                self.line_potential(true, &[mid, mid + 1], lo, hi)?,
            ])
        } else {
            let (lo, hi) = (win.row0, win.row0 + win.rows - 1);
            let mid = src.0 + shift.0 / 2;
            Ok([
                self.line_potential(false, &[src.0 + shift.0], lo, hi)?,
                self.line_potential(false, &[mid, mid + 1], lo, hi)?,
            ])
        }
    }

    /// A* from `src` to `src + shift`; `None` if every path exceeds `bound`.
    fn search(
        &self,
        src: (i64, i64),
        shift: (i64, i64),
        bound: T,
        potentials: &[LinePotential<T>; 2],
        ws: &mut Workspace<T>,
    ) -> Result<Option<(T, Window)>> {
        self.search_set(&[src], shift, bound, potentials, ws)
    }

    /// Multi-source A* from `srcs` to the set of their `shift` translates.
    /// With more than one source the result is only a lower bound for the
    /// loops through those base points.
    fn search_set(
        &self,
        srcs: &[(i64, i64)],
        shift: (i64, i64),
        bound: T,
        potentials: &[LinePotential<T>; 2],
        ws: &mut Workspace<T>,
    ) -> Result<Option<(T, Window)>> {
        let limit = bound * (T::one() + T::tol(1e-12));
        let [potential, band] = potentials;
        let single = srcs.len() == 1;
        let first = srcs[0];
        if single {
            let through_band = band.get(first.0, first.1) + band.get(first.0 + shift.0, first.1 + shift.1);
            if potential.get(first.0, first.1) > limit || through_band > limit {
                return Ok(None);
            }
        }
        let mut win = self.window(first, shift, bound)?;
        for &src in &srcs[1..] {
            win = win.union(&self.window(src, shift, bound)?);
        }
        ws.reset((win.rows * win.cols) as usize);
        let stamp = ws.stamp;
        let target = (first.0 + shift.0, first.1 + shift.1);
        // a source outside the window, or with its translate outside, has no
        // loop within `bound`
        let srcs: Vec<(usize, usize)> = srcs
            .iter()
            .filter_map(|&(i, j)| Some((win.index(i, j)?, win.index(i + shift.0, j + shift.1)?)))
            .collect();
        if srcs.is_empty() {
            return Ok(None);
        }
        for &(_, t) in &srcs {
            ws.tgt[t] = stamp;
        }
        let (wr, wc) = (win.rows as usize, win.cols as usize);
        // Per-row and per-column lookup tables, so the inner loop does no
        // modular arithmetic.
        ws.row_mod.clear();
        ws.row_mod.extend((0..win.rows).map(|a| (win.row0 + a).rem_euclid(self.rows) as usize * self.cols as usize));
        ws.col_mod.clear();
        ws.col_mod.extend((0..win.cols).map(|b| (win.col0 + b).rem_euclid(self.cols) as usize));
        let (pot_a, pot_b) = (&mut ws.pot_a, &mut ws.pot_b);
        pot_a.clear();
        pot_b.clear();
        let strip = |k: i64| (k >= potential.lo && k <= potential.hi).then(|| (k - potential.lo) * potential.period);
        if potential.line_is_col {
            pot_a.extend((0..win.rows).map(|a| Some((win.row0 + a).rem_euclid(potential.period))));
            pot_b.extend((0..win.cols).map(|b| strip(win.col0 + b)));
        } else {
            pot_a.extend((0..win.rows).map(|a| strip(win.row0 + a)));
            pot_b.extend((0..win.cols).map(|b| Some((win.col0 + b).rem_euclid(potential.period))));
        }
        // both terms are consistent; the gauge one because every edge weighs
        // at least min f times the stencil norm of its step
        let h_scale = if single { self.min_f * (T::one() - T::tol(1e-9)) } else { T::zero() };
        let facets = self.gauge.len();
        let gauge = &self.gauge;
        let project = |v: Vec2<T>| gauge.iter().map(move |a| h_scale * (a[0] * v[0] + a[1] * v[1]));
        ws.gauge_a.clear();
        ws.gauge_b.clear();
        if single {
            for a in 0..win.rows {
                ws.gauge_a.extend(project(Self::plane(&self.to_plane, target.0 - win.row0 - a, 0)));
            }
            for b in 0..win.cols {
                ws.gauge_b.extend(project(Self::plane(&self.to_plane, 0, target.1 - win.col0 - b)));
            }
        }

        let f = self.f.data();
        let (pot_a, pot_b, gauge_a, gauge_b) = (&ws.pot_a, &ws.pot_b, &ws.gauge_a, &ws.gauge_b);
        let heuristic = |a: usize, b: usize| {
            let flat = if single {
                let (ga, gb) = (&gauge_a[a * facets..(a + 1) * facets], &gauge_b[b * facets..(b + 1) * facets]);
                ga.iter().zip(gb).fold(T::zero(), |m, (&x, &y)| m.max(x + y))
            } else {
                T::zero()
            };
            match (pot_a[a], pot_b[b]) {
                (Some(x), Some(y)) => flat.max(potential.data[(x + y) as usize]),
                _ => flat,
            }
        };
        let steps: Vec<(isize, isize, T)> = self.steps.iter().map(|&(di, dj, len)| (di as isize, dj as isize, len * T::lit(0.5))).collect();
        let (row_mod, col_mod) = (&ws.row_mod, &ws.col_mod);
        let (dist, pred, seen, done, heap, tgt) =
            (&mut ws.dist, &mut ws.pred, &mut ws.seen, &mut ws.done, &mut ws.heap, &ws.tgt);
        for &(start, _) in &srcs {
            let key = heuristic(start / wc, start % wc);
            if key <= limit {
                dist[start] = T::zero();
                seen[start] = stamp;
                heap.push(QueueItem { key, g: T::zero(), idx: start as u32 });
            }
        }
        while let Some(QueueItem { g, idx, .. }) = heap.pop() {
            let u = idx as usize;
            if done[u] == stamp || g > dist[u] {
                continue;
            }
            done[u] = stamp;
            if tgt[u] == stamp {
                return Ok(Some((g, win)));
            }
            let (a, b) = (u / wc, u % wc);
            let fu = f[row_mod[a] + col_mod[b]];
            for &(da, db, half_len) in &steps {
                let (na, nb) = (a as isize + da, b as isize + db);
                if na < 0 || nb < 0 || na as usize >= wr || nb as usize >= wc {
                    continue;
                }
                let (na, nb) = (na as usize, nb as usize);
                let v = na * wc + nb;
                if done[v] == stamp {
                    continue;
                }
                let ng = g + half_len * (fu + f[row_mod[na] + col_mod[nb]]);
                if seen[v] == stamp && ng >= dist[v] {
                    continue;
                }
                let key = ng + heuristic(na, nb);
                if key > limit {
                    continue;
                }
                seen[v] = stamp;
                dist[v] = ng;
                pred[v] = idx;
                heap.push(QueueItem { key, g: ng, idx: v as u32 });
            }
        }
        Ok(None)
    }

    fn path(&self, win: &Window, ws: &Workspace<T>, src: (i64, i64), shift: (i64, i64)) -> Vec<Vec2<T>> {
        let start = win.index(src.0, src.1).unwrap();
        let mut v = win.index(src.0 + shift.0, src.1 + shift.1).unwrap();
        let mut nodes = vec![v];
        while v != start {
            v = ws.pred[v] as usize;
            nodes.push(v);
        }
        nodes
            .iter()
            .rev()
            .map(|&v| {
                let (i, j) = win.coords(v);
                self.point(i, j)
            })
            .collect()
    }

    /// Shortest loop of `class` with length at most `bound`, minimized over
    /// base points on the transversal.
    ///
    /// Loop length through a base point is Lipschitz along the transversal:
    /// `L(s') >= L(s) - 2 d(s, s')`. A coarse subset of base points is
    /// searched first with some slack above the best loop; the rest are
    /// bounded from their coarse neighbours and from per-point potentials,
    /// then searched in increasing order of that bound until it reaches the
    /// best loop. Ties within rounding go to the first loop found.
    fn best_in_class(&self, class: &HomotopyClass<T>, bound: T) -> Result<Option<(T, Vec<Vec2<T>>)>> {
        let shift = self.shift(class);
        let sources = self.transversal(class);
        let per_line = sources.len() / 2;
        let along = self.line_arclength(class, &sources);
        let stride = ((per_line as f64).sqrt() as usize / 2).max(1);
        let coarse = |k: usize| (k % per_line).is_multiple_of(stride);
        let nearest_coarse = |k: usize| {
            let (line, m) = (k / per_line, k % per_line);
            let c0 = m - m % stride;
            let c1 = if c0 + stride < per_line { c0 + stride } else { 0 };
            [line * per_line + c0, line * per_line + c1]
        };
        let slack = T::lit(2.0)
            * (0..sources.len())
                .map(|k| nearest_coarse(k).iter().map(|&c| along.distance(c, k)).fold(T::infinity(), T::min))
                .fold(T::zero(), T::max);

        // coarse searches may run up to `bound + slack`
        let reach = bound + slack;
        let mut ws = Workspace::default();
        let potentials = [
            self.potentials_for(class, sources[0], reach)?,
            self.potentials_for(class, sources[per_line], reach)?,
        ];
        let mut lower: Vec<T> = sources
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                let [line, band] = &potentials[k / per_line];
                line.get(i, j).max(band.get(i, j) + band.get(i + shift.0, j + shift.1))
            })
            .collect();
        let tie = T::one() - T::tol(TIE_TOL);
        let over = |b: T| b * (T::one() + T::tol(1e-12));
        let mut best: Option<(T, usize)> = None;
        let mut search_bound = bound;

        let mut order: Vec<usize> = (0..sources.len()).filter(|&k| coarse(k)).collect();
        order.sort_by(|&a, &b| lower[a].partial_cmp(&lower[b]).unwrap().then(a.cmp(&b)));
        let mut known = vec![T::zero(); sources.len()];
        for &k in &order {
            let limit = best.map_or(bound, |(b, _)| b.min(bound)) + slack;
            if lower[k] > over(limit) {
                known[k] = lower[k];
                continue;
            }
            match self.search(sources[k], shift, limit, &potentials[k / per_line], &mut ws)? {
                Some((len, _)) => {
                    known[k] = len;
                    if len <= over(search_bound) && best.is_none_or(|(b, _)| len < b * tie) {
                        best = Some((len, k));
                        search_bound = search_bound.min(len * tie);
                    }
                }
                None => known[k] = limit,
            }
        }

        for k in (0..sources.len()).filter(|&k| !coarse(k)) {
            for c in nearest_coarse(k) {
                lower[k] = lower[k].max(known[c] - T::lit(2.0) * along.distance(c, k));
            }
        }
        let mut order: Vec<usize> = (0..sources.len()).filter(|&k| !coarse(k)).collect();
        order.sort_by(|&a, &b| lower[a].partial_cmp(&lower[b]).unwrap().then(a.cmp(&b)));
        for k in order {
            if lower[k] > over(search_bound) {
                break;
            }
            if let Some((len, _)) = self.search(sources[k], shift, search_bound, &potentials[k / per_line], &mut ws)? {
                if best.is_none_or(|(b, _)| len < b * tie) {
                    best = Some((len, k));
                    search_bound = search_bound.min(len * tie);
                }
            }
        }
        let Some((len, k)) = best else { return Ok(None) };
        let (_, win) = self
            .search(sources[k], shift, len, &potentials[k / per_line], &mut ws)?
            .expect("winning search repeats");
        Ok(Some((len, self.path(&win, &ws, sources[k], shift))))
    }

    /// Cumulative weight of the unit steps along each transversal line,
    /// bounding the distance between base points on the same line.
    fn line_arclength(&self, class: &HomotopyClass<T>, sources: &[(i64, i64)]) -> LineArclength<T> {
        let per_line = sources.len() / 2;
        let (di, dj) = if class.p != 0 { (1, 0) } else { (0, 1) };
        let len = norm(self.point(di, dj));
        let half = T::lit(0.5);
        let cumulative = sources
            .chunks(per_line)
            .map(|line| {
                let mut acc = vec![T::zero()];
                for &(i, j) in line {
                    let w = len * (self.value(i, j) + self.value(i + di, j + dj)) * half;
                    acc.push(acc[acc.len() - 1] + w);
                }
                acc
            })
            .collect();
        LineArclength { per_line, cumulative }
    }

    /// A loop of the class that always exists: `p` straight steps along the
    /// columns, then `q` along the rows, from node `(0, 0)`.
    fn staircase_bound(&self, class: &HomotopyClass<T>) -> T {
        let along = |p: i64, di: i64, dj: i64, n: i64| {
            let len = norm(self.point(di, dj));
            let mut total = T::zero();
            let (mut i, mut j) = (0, 0);
            let (sdi, sdj) = (di * p.signum(), dj * p.signum());
            for _ in 0..p.abs() * n {
                total = total + len * (self.value(i, j) + self.value(i + sdi, j + sdj)) * T::lit(0.5);
                i += sdi;
                j += sdj;
            }
            total
        };
        along(class.p, 0, 1, self.cols) + along(class.q, 1, 0, self.rows)
    }
}

/// For unit vectors around the origin, the functionals `a` with `<a, p> = 1`
/// on each edge `p q` of their convex hull.
fn hull_functionals<T: Real>(points: &[Vec2<T>]) -> Vec<Vec2<T>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    let cross = |o: Vec2<T>, a: Vec2<T>, b: Vec2<T>| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Vec2<T>> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2<T>>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= T::zero() {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    (0..hull.len())
        .map(|k| {
            let (p, q) = (hull[k], hull[(k + 1) % hull.len()]);
            let det = p[0] * q[1] - p[1] * q[0];
            [(q[1] - p[1]) / det, (p[0] - q[0]) / det]
        })
        .collect()
}

/// Flat systole: the first successive minimum.
pub fn flat_systole<T: Real>(lattice: &Lattice<T>) -> T {
    lattice.successive_minima().lambda1
}

/// Shortest discrete loop in `class`, minimized over all base points.
pub fn shortest_in_class<T: Real>(metric: &TorusMetric<T>, class: &HomotopyClass<T>) -> Result<(T, Vec<Vec2<T>>)> {
    let graph = CoverGraph::new(metric);
    let bound = graph.staircase_bound(class);
    Ok(graph.best_in_class(class, bound)?.expect("staircase loop is within its own bound"))
}

fn error_model<T: Real>(graph: &CoverGraph<'_, T>, metric: &TorusMetric<T>, upper: T) -> (T, T, T) {
    let anisotropy = stencil_anisotropy(&graph.step_vectors());
    let h = norm(graph.to_plane[0]).max(norm(graph.to_plane[1]));
    let osc = metric.factor().max() - metric.factor().min();
    let grid_term = T::lit(GRID_ERROR_COEFF) * h * osc;
    (anisotropy * upper + grid_term, grid_term, anisotropy)
}

/// Upper bound for the systole by discrete shortest loops.
pub fn systole_upper<T: Real>(metric: &TorusMetric<T>) -> Result<SystoleEstimate<T>> {
    let graph = CoverGraph::new(metric);
    let lattice = metric.lattice();
    let min_f = graph.min_f;

    // Seed with straight grid loops along the two basis directions.
    let mut seed = T::infinity();
    for (p, q) in [(1, 0), (0, 1)] {
        let class = HomotopyClass::new(p, q, lattice).unwrap();
        for (i, j) in graph.transversal(&class) {
            if let Some(len) = graph.straight_loop(&class, i, j) {
                seed = seed.min(len);
            }
        }
    }

    let mut best: Option<(T, HomotopyClass<T>, Vec<Vec2<T>>)> = None;
    let mut bound = seed;
    for class in candidate_classes(lattice, min_f, seed)? {
        if let Some((len, path)) = graph.best_in_class(&class, bound)? {
            let better = match &best {
                None => true,
                Some((b, c, _)) => len < *b || (len == *b && (class.p, class.q) < (c.p, c.q)),
            };
            if better {
                bound = bound.min(len);
                best = Some((len, class, path));
            }
        }
    }
    let (discrete_upper, witness_class, path) = best.expect("seed class is among the candidates");
    let (upper, witness_path) = match polish(metric.factor().samples(), metric.lattice().basis(), &path) {
        Some(polished) => polished,
        None => (discrete_upper, path),
    };
    let (err, err_quadrature, anisotropy) = error_model(&graph, metric, upper);
    let sigma = metric.reduced().sigma();
    Ok(SystoleEstimate {
        upper,
        discrete_upper,
        err,
        err_quadrature,
        witness_class,
        witness_path,
        lower_fubini: sigma * (upper - err).max(T::zero()),
        grid: (metric.factor().rows(), metric.factor().cols()),
        method: Method::GridDijkstra,
        stencil_anisotropy: anisotropy,
    })
}

/// Which coordinate a one-variable factor depends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Tolerance for recognizing a one-variable factor.
pub const ONE_VAR_TOL: f64 = 1e-10;

/// Axis a factor on the unit square depends on exclusively, if any.
/// Constant factors report `Y`.
pub fn one_variable_axis<T: Real>(metric: &TorusMetric<T>) -> Option<Axis> {
    if !metric.lattice().is_unit_square() {
        return None;
    }
    let tol = T::tol(ONE_VAR_TOL);
    if metric.factor().depends_only_on_y(tol) {
        Some(Axis::Y)
    } else if metric.factor().transpose().depends_only_on_y(tol) {
        Some(Axis::X)
    } else {
        None
    }
}

/// Exact systole `min f` for a one-variable factor on the unit square.
pub fn systole_one_var<T: Real>(metric: &TorusMetric<T>) -> Result<T> {
    match one_variable_axis(metric) {
        Some(Axis::Y) => Ok(min_row_loop(metric.factor())),
        Some(Axis::X) => Ok(min_row_loop(&metric.factor().transpose())),
        None => Err(Error::NotOneVariable),
    }
}

fn min_row_loop<T: Real>(f: &PeriodicField<T>) -> T {
    let width = norm(f.domain().basis()[0]);
    f.samples().row_means().into_iter().fold(T::infinity(), T::min) * width
}

/// [`systole_one_var`] packaged as an estimate with zero error, witnessed
/// by the straight loop at the minimizing row.
pub fn systole_one_var_estimate<T: Real>(metric: &TorusMetric<T>) -> Result<SystoleEstimate<T>> {
    let axis = one_variable_axis(metric).ok_or(Error::NotOneVariable)?;
    let upper = systole_one_var(metric)?;
    let f = match axis {
        Axis::Y => metric.factor().clone(),
        Axis::X => metric.factor().transpose(),
    };
    let means = f.samples().row_means();
    let row = means.iter().enumerate().fold(0, |b, (i, v)| if *v < means[b] { i } else { b });
    let (rows, cols) = (f.rows(), f.cols());
    let y = T::from_usize(row).unwrap() / T::from_usize(rows).unwrap();
    let witness_path = (0..=cols)
        .map(|j| {
            let x = T::from_usize(j).unwrap() / T::from_usize(cols).unwrap();
            match axis {
                Axis::Y => [x, y],
                Axis::X => [y, x],
            }
        })
        .collect();
    let (p, q) = match axis {
        Axis::Y => (1, 0),
        Axis::X => (0, 1),
    };
    Ok(SystoleEstimate {
        upper,
        discrete_upper: upper,
        err: T::zero(),
        err_quadrature: T::zero(),
        witness_class: HomotopyClass::new(p, q, metric.lattice()).unwrap(),
        witness_path,
        lower_fubini: metric.reduced().sigma() * upper,
        grid: (metric.factor().rows(), metric.factor().cols()),
        method: Method::OneVarExact,
        stencil_anisotropy: T::zero(),
    })
}

/// Metric of the averaged factor: `f(x, y)` replaced by its mean over `x`
/// (`Axis::Y`, a function of `y`) or over `y` (`Axis::X`).
pub fn averaged_metric_along<T: Real>(metric: &TorusMetric<T>, axis: Axis) -> Result<TorusMetric<T>> {
    if !metric.lattice().is_unit_square() {
        return Err(Error::NotUnitSquare);
    }
    let f = metric.factor().samples();
    let (rows, cols) = (f.rows(), f.cols());
    let data = match axis {
        Axis::Y => {
            let m = f.row_means();
            (0..rows * cols).map(|k| m[k / cols]).collect()
        }
        Axis::X => {
            let m = f.col_means();
            (0..rows * cols).map(|k| m[k % cols]).collect()
        }
    };
    let factor = PeriodicField::new(Grid::new(rows, cols, data)?, *metric.lattice())?;
    TorusMetric::from_factor(factor)
}

/// Row-averaged metric `fbar(y) = int f(x, y) dx`.
pub fn averaged_metric<T: Real>(metric: &TorusMetric<T>) -> Result<TorusMetric<T>> {
    averaged_metric_along(metric, Axis::Y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    fn metric(n: usize, lattice: Lattice<f64>, f: impl Fn(f64, f64) -> f64) -> TorusMetric<f64> {
        TorusMetric::from_factor(PeriodicField::from_fn(n, n, lattice, f).unwrap()).unwrap()
    }

    fn flat_square(n: usize) -> TorusMetric<f64> {
        metric(n, Lattice::square(), |_, _| 1.0)
    }

    fn one_var(n: usize) -> TorusMetric<f64> {
        metric(n, Lattice::square(), |_, y| 1.0 + 0.3 * (TAU * y).sin())
    }

    #[test]
    fn flat_systole_examples() {
        assert_eq!(flat_systole(&Lattice::<f64>::square()), 1.0);
        assert_abs_diff_eq!(flat_systole(&Lattice::<f64>::eisenstein()), 1.074570, epsilon = 1e-6);
        assert_abs_diff_eq!(flat_systole(&Lattice::rectangular(0.5, 2.0).unwrap()), 0.5, epsilon = 1e-15);
    }

    fn pq(v: &[HomotopyClass<f64>]) -> Vec<(i64, i64)> {
        v.iter().map(|c| (c.p, c.q)).collect()
    }

    #[test]
    fn candidate_examples() {
        let sq = Lattice::<f64>::square();
        // |(p, q)| <= 1 / 0.7 admits the axes and both diagonals
        let mut got = pq(&candidate_classes(&sq, 0.7, 1.0).unwrap());
        got.sort();
        assert_eq!(got, vec![(0, 1), (1, -1), (1, 0), (1, 1)]);
        assert_eq!(pq(&candidate_classes(&sq, 1.0, 1.0).unwrap()), vec![(0, 1), (1, 0)]);
        let e = Lattice::<f64>::eisenstein();
        let l1 = flat_systole(&e);
        assert_eq!(candidate_classes(&e, 1.0, l1).unwrap().len(), 3);
        assert!(matches!(candidate_classes(&sq, 1.0, 0.5), Err(Error::InvalidBound { .. })));
    }

    #[test]
    fn anisotropy_of_square_stencil() {
        // unit ball of the stencil norm: hull of (1,0) and (2,1)/sqrt(5)
        let a = [1.0, 0.0];
        let b = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
        let dist = (a[0] * b[1] - a[1] * b[0]) / ((a[0] - b[0]).hypot(a[1] - b[1]));
        let g = flat_square(8);
        let graph = CoverGraph::new(&g);
        assert_abs_diff_eq!(stencil_anisotropy(&graph.step_vectors()), 1.0 / dist - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 / dist - 1.0, 0.027486, epsilon = 1e-6);
    }

    #[test]
    fn shortest_flat_square() {
        let g = flat_square(16);
        let (len, path) = shortest_in_class(&g, &HomotopyClass::new(1, 0, g.lattice()).unwrap()).unwrap();
        assert_abs_diff_eq!(len, 1.0, epsilon = 1e-12);
        assert!(path.iter().all(|p| (p[1] - path[0][1]).abs() < 1e-12), "horizontal");
        let (diag, path) = shortest_in_class(&g, &HomotopyClass::new(1, 1, g.lattice()).unwrap()).unwrap();
        assert_abs_diff_eq!(diag, 2f64.sqrt(), epsilon = 1e-12);
        let (first, last) = (path[0], path[path.len() - 1]);
        assert_abs_diff_eq!(last[0] - first[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(last[1] - first[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shortest_one_var_row() {
        let g = one_var(64);
        let (len, _) = shortest_in_class(&g, &HomotopyClass::new(1, 0, g.lattice()).unwrap()).unwrap();
        assert_abs_diff_eq!(len, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn systole_upper_examples() {
        let e = metric(32, Lattice::eisenstein(), |_, _| 1.0);
        let s = systole_upper(&e).unwrap();
        assert_abs_diff_eq!(s.upper, flat_systole(e.lattice()), epsilon = 1e-12);

        let s = systole_upper(&one_var(64)).unwrap();
        assert_abs_diff_eq!(s.upper, 0.7, epsilon = 1e-12);
        assert_eq!((s.witness_class.p, s.witness_class.q), (1, 0));

        let two = metric(16, Lattice::square(), |_, _| 2.0);
        assert_abs_diff_eq!(systole_upper(&two).unwrap().upper, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn witness_lifts_to_class_translation() {
        let g = metric(24, Lattice::from_tau(num_complex::Complex::new(0.2, 1.1)).unwrap(), |x, y| {
            1.0 + 0.3 * (TAU * (x + y)).sin() + 0.2 * (TAU * x).cos()
        });
        let s = systole_upper(&g).unwrap();
        let t = g.lattice().point(s.witness_class.p, s.witness_class.q);
        let (a, b) = (s.witness_path[0], *s.witness_path.last().unwrap());
        assert_abs_diff_eq!(b[0] - a[0], t[0], epsilon = 1e-12);
        assert_abs_diff_eq!(b[1] - a[1], t[1], epsilon = 1e-12);
        let lam = flat_systole(g.lattice());
        assert!(s.upper >= g.factor().min() * lam - 1e-12);
        assert!(s.upper <= g.factor().max() * lam * (1.0 + s.stencil_anisotropy) + 1e-12);
    }

    #[test]
    fn one_var_oracle() {
        assert_abs_diff_eq!(systole_one_var(&one_var(64)).unwrap(), 0.7, epsilon = 1e-14);
        let c = metric(8, Lattice::square(), |_, _| 1.7);
        assert_abs_diff_eq!(systole_one_var(&c).unwrap(), 1.7, epsilon = 1e-15);
        let gx = metric(64, Lattice::square(), |x, _| 1.0 + 0.2 * (TAU * x).sin());
        assert_abs_diff_eq!(systole_one_var(&gx).unwrap(), 0.8, epsilon = 1e-14);
        let est = systole_one_var_estimate(&gx).unwrap();
        assert_eq!((est.witness_class.p, est.witness_class.q), (0, 1));
        let both = metric(16, Lattice::square(), |x, y| 1.0 + 0.1 * (TAU * x).sin() * (TAU * y).cos());
        assert_eq!(systole_one_var(&both), Err(Error::NotOneVariable));
        let eis = metric(8, Lattice::eisenstein(), |_, _| 1.0);
        assert_eq!(systole_one_var(&eis), Err(Error::NotOneVariable));
    }

    #[test]
    fn averaged_examples() {
        let g = metric(32, Lattice::square(), |x, y| {
            1.0 + 0.2 * (TAU * x).sin() + 0.1 * (TAU * y).cos() + 0.05 * (TAU * x).sin() * (TAU * y).sin()
        });
        let avg = averaged_metric(&g).unwrap();
        for i in 0..32 {
            let y = i as f64 / 32.0;
            for j in 0..32 {
                assert_abs_diff_eq!(avg.factor().samples().get(i, j), 1.0 + 0.1 * (TAU * y).cos(), epsilon = 1e-14);
            }
        }
        let ov = one_var(16);
        assert!(averaged_metric(&ov).unwrap().factor().samples().max_abs_diff(ov.factor().samples()).unwrap() < 1e-15);
        let eis = metric(8, Lattice::eisenstein(), |_, _| 1.0);
        assert_eq!(averaged_metric(&eis).unwrap_err(), Error::NotUnitSquare);
    }
}
