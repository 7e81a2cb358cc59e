//! Density transport along backward characteristics.
//!
//! Particle paths solve `dy/dτ = u(y, τ)`; the density is constant along
//! them, so `ρ(x, t) = ρ(y(s; x, t), s)`. Paths are integrated with RK4 using
//! tensor-product cubic interpolation of the velocity in space and linear
//! interpolation between snapshots in time. The density itself is
//! interpolated with a cubic clipped to the surrounding cell's extrema, so the
//! update never creates new minima or maxima.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{h2_norm, Field, Grid, VectorField};

pub type Point = [f64; 3];

/// Velocity snapshots ordered in time.
#[derive(Debug)]
pub struct VelocityHistory {
    snapshots: Vec<(f64, VectorField)>,
    /// Time span of validity; wider than the snapshot times only when frozen.
    span: (f64, f64),
    h2: OnceLock<Vec<f64>>,
}

impl VelocityHistory {
    pub fn new(snapshots: Vec<(f64, VectorField)>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::Degenerate("empty velocity history".into()))?;
        let grid = *first.1.grid();
        if snapshots.iter().any(|(_, u)| *u.grid() != grid) {
            return Err(Error::GridMismatch("velocity snapshots on different grids".into()));
        }
        if snapshots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter("snapshot times must increase strictly".into()));
        }
        let span = (snapshots[0].0, snapshots[snapshots.len() - 1].0);
        Ok(Self { snapshots, span, h2: OnceLock::new() })
    }

    /// A single velocity field held constant over `[t0, t1]`.
    pub fn frozen(u: VectorField, t0: f64, t1: f64) -> Self {
        Self { snapshots: vec![(t0, u)], span: (t0.min(t1), t0.max(t1)), h2: OnceLock::new() }
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].1.grid()
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn snapshots(&self) -> &[(f64, VectorField)] {
        &self.snapshots
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.span.1.abs());
        t0.min(t1) >= self.span.0 - slack && t0.max(t1) <= self.span.1 + slack
    }

    /// Velocity at index coordinates `xi` (position / spacing) and time `t`.
    fn sample(&self, xi: Point, t: f64) -> Point {
        let st = Stencil::new(self.grid(), xi);
        if self.snapshots.len() == 1 {
            return st.apply_vector(&self.snapshots[0].1);
        }
        let j = self.snapshots.partition_point(|(s, _)| *s <= t).clamp(1, self.snapshots.len() - 1);
        let (t0, u0) = &self.snapshots[j - 1];
        let (t1, u1) = &self.snapshots[j];
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a = st.apply_vector(u0);
        let b = st.apply_vector(u1);
        [0, 1, 2].map(|c| (1.0 - w) * a[c] + w * b[c])
    }

    /// Velocity at a physical point.
    pub fn velocity_at(&self, x: Point, t: f64) -> Point {
        let h = self.grid().spacing();
        self.sample(x.map(|c| c / h), t)
    }

    /// `‖u‖_{L²(t0, t1; H²)}` by trapezoid quadrature over the snapshots.
    pub fn l2_h2_norm(&self, t0: f64, t1: f64) -> f64 {
        let norms = self.h2.get_or_init(|| self.snapshots.iter().map(|(_, u)| h2_norm(u)).collect());
        if self.snapshots.len() == 1 {
            return norms[0] * (t1 - t0).abs().sqrt();
        }
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        let value_at = |t: f64| -> f64 {
            let j = self.snapshots.partition_point(|(s, _)| *s <= t).clamp(1, self.snapshots.len() - 1);
            let (ta, tb) = (self.snapshots[j - 1].0, self.snapshots[j].0);
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            ((1.0 - w) * norms[j - 1].powi(2) + w * norms[j].powi(2)).max(0.0)
        };
        let mut knots = vec![lo];
        knots.extend(self.snapshots.iter().map(|(t, _)| *t).filter(|&t| t > lo && t < hi));
        knots.push(hi);
        let integral: f64 =
            knots.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (value_at(w[0]) + value_at(w[1]))).sum();
        integral.sqrt()
    }
}

fn lagrange4(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

/// Tensor-product 4-point stencil around a fractional node position.
struct Stencil {
    idx: [usize; 64],
    w: [f64; 64],
    len: usize,
    corners: [usize; 8],
    n_corners: usize,
}

impl Stencil {
    fn new(grid: &Grid, xi: Point) -> Self {
        let dim = grid.dim();
        let n = grid.n() as i64;
        let mut base = [0i64; 3];
        let mut w1 = [[0.0; 4]; 3];
        for a in 0..dim {
            let f = xi[a].floor();
            base[a] = f as i64;
            w1[a] = lagrange4(xi[a] - f);
        }
        let wrap = |a: usize, o: i64| (base[a] + o).rem_euclid(n) as usize;
        let mut st = Stencil { idx: [0; 64], w: [0.0; 64], len: 0, corners: [0; 8], n_corners: 0 };
        let kz = if dim == 3 { 4 } else { 1 };
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..kz {
                    let mi = [wrap(0, i as i64 - 1), wrap(1, j as i64 - 1), if dim == 3 { wrap(2, k as i64 - 1) } else { 0 }];
                    let w = w1[0][i] * w1[1][j] * if dim == 3 { w1[2][k] } else { 1.0 };
                    st.idx[st.len] = grid.linear_index(mi);
                    st.w[st.len] = w;
                    st.len += 1;
                }
            }
        }
        let cz = if dim == 3 { 2 } else { 1 };
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..cz {
                    let mi = [wrap(0, i), wrap(1, j), if dim == 3 { wrap(2, k) } else { 0 }];
                    st.corners[st.n_corners] = grid.linear_index(mi);
                    st.n_corners += 1;
                }
            }
        }
        st
    }

    fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for p in 0..self.len {
            acc += self.w[p] * values[self.idx[p]];
        }
        acc
    }

    fn apply_limited(&self, values: &[f64]) -> f64 {
        let raw = self.apply(values);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &c in &self.corners[..self.n_corners] {
            lo = lo.min(values[c]);
            hi = hi.max(values[c]);
        }
        raw.clamp(lo, hi)
    }

    fn apply_vector(&self, u: &VectorField) -> Point {
        let mut out = [0.0; 3];
        for (a, c) in u.components().iter().enumerate() {
            out[a] = self.apply(c.values());
        }
        out
    }
}

/// Cubic interpolation of a field at a physical point.
pub fn interpolate(f: &Field, x: Point) -> f64 {
    let h = f.grid().spacing();
    Stencil::new(f.grid(), x.map(|c| c / h)).apply(f.values())
}

/// Cubic interpolation clipped to the extrema of the enclosing cell.
pub fn interpolate_limited(f: &Field, x: Point) -> f64 {
    let h = f.grid().spacing();
    Stencil::new(f.grid(), x.map(|c| c / h)).apply_limited(f.values())
}

/// A sampled particle path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Point,
    pub start_time: f64,
    pub times: Vec<f64>,
    pub points: Vec<Point>,
}

impl Trajectory {
    pub fn end(&self) -> Point {
        *self.points.last().expect("trajectory has its start point")
    }
}

fn wrap_point(grid: &Grid, x: Point) -> Point {
    let l = grid.length();
    let mut y = x;
    for c in y.iter_mut().take(grid.dim()) {
        *c = c.rem_euclid(l);
    }
    y
}

/// One RK4 step of `dy/dτ = u` in index coordinates; `h` may be negative.
fn rk4_index_step(history: &VelocityHistory, xi: Point, tau: f64, h: f64, spacing: f64) -> Point {
    let s = h / spacing;
    let shift = |p: Point, k: Point, f: f64| [p[0] + f * k[0], p[1] + f * k[1], p[2] + f * k[2]];
    let k1 = history.sample(xi, tau);
    let k2 = history.sample(shift(xi, k1, 0.5 * s), tau + 0.5 * h);
    let k3 = history.sample(shift(xi, k2, 0.5 * s), tau + 0.5 * h);
    let k4 = history.sample(shift(xi, k3, s), tau + h);
    [0, 1, 2].map(|c| s / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
}

/// Integrate a particle path from `(x, from)` to time `to`, in either
/// direction, with steps no longer than `dt`.
pub fn trace_path(x: Point, from: f64, to: f64, history: &VelocityHistory, dt: f64) -> Result<Trajectory> {
    if !history.covers(from, to) {
        return Err(Error::TimeNotCovered { t0: from.min(to), t1: from.max(to) });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("integration step must be positive, got {dt}")));
    }
    let grid = *history.grid();
    let spacing = grid.spacing();
    let steps = ((to - from).abs() / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { (to - from) / steps as f64 };
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    times.push(from);
    points.push(x);
    let mut xi = x.map(|c| c / spacing);
    for s in 0..steps {
        let tau = from + s as f64 * h;
        let d = rk4_index_step(history, xi, tau, h, spacing);
        for c in 0..3 {
            xi[c] += d[c];
        }
        times.push(if s + 1 == steps { to } else { from + (s + 1) as f64 * h });
        points.push(wrap_point(&grid, xi.map(|c| c * spacing)));
    }
    Ok(Trajectory { start: x, start_time: from, times, points })
}

/// Backward characteristic through `(x, t1)` down to time `t0 ≤ t1`.
pub fn trace_characteristic(x: Point, t1: f64, t0: f64, history: &VelocityHistory, dt: f64) -> Result<Trajectory> {
    if t0 > t1 {
        return Err(Error::InvalidParameter(format!("backward trace needs t0 <= t1, got {t0} > {t1}")));
    }
    trace_path(x, t1, t0, history, dt)
}

/// Semi-Lagrangian update of `ρ` from `t_from` to `t_from + dt`: each node
/// takes the limited-cubic value at the foot of its backward characteristic.
pub fn advect_density(rho: &Field, history: &VelocityHistory, t_from: f64, dt: f64) -> Result<Field> {
    let grid = *rho.grid();
    if *history.grid() != grid {
        return Err(Error::GridMismatch("density and velocity grids differ".into()));
    }
    let t_to = t_from + dt;
    if !history.covers(t_from, t_to) {
        return Err(Error::TimeNotCovered { t0: t_from, t1: t_to });
    }
    let spacing = grid.spacing();
    let values = rho.values();
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let mi = grid.multi_index(idx);
            let node = [mi[0] as f64, mi[1] as f64, mi[2] as f64];
            let d = rk4_index_step(history, node, t_to, -dt, spacing);
            let foot = [node[0] + d[0], node[1] + d[1], node[2] + d[2]];
            Stencil::new(&grid, foot).apply_limited(values)
        })
        .collect();
    Field::from_values(grid, out)
}

/// Minimal-image separation vector `a − b` on the periodic box.
pub fn periodic_difference(grid: &Grid, a: Point, b: Point) -> Point {
    let l = grid.length();
    let mut z = [0.0; 3];
    for c in 0..grid.dim() {
        let d = a[c] - b[c];
        z[c] = d - l * (d / l).round();
    }
    z
}

fn norm(z: Point) -> f64 {
    z.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Growth of the separation of two backward characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    /// `|x1 − x2|`.
    pub initial: f64,
    /// `max_τ |z(τ)|^{1−α} − |x1 − x2|^{1−α}` over the traced window.
    pub excess: f64,
    /// `T^{1/2} ‖u‖_{L²(0,T;H²)}`.
    pub forcing: f64,
    /// `excess / forcing`; zero when both vanish.
    pub quotient: f64,
}

/// Trace the characteristics through `(x1, t)` and `(x2, t)` back to time 0
/// and compare their separation against the `L²H²` size of the velocity.
pub fn separation_check(
    x1: Point,
    x2: Point,
    t: f64,
    history: &VelocityHistory,
    dt: f64,
    alpha: f64,
) -> Result<SeparationReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("exponent must lie in [0, 1], got {alpha}")));
    }
    let grid = *history.grid();
    let initial = norm(periodic_difference(&grid, x1, x2));
    if initial == 0.0 {
        return Err(Error::Degenerate("separation check needs two distinct points".into()));
    }
    let p1 = trace_characteristic(x1, t, 0.0, history, dt)?;
    let p2 = trace_characteristic(x2, t, 0.0, history, dt)?;
    let e = 1.0 - alpha;
    let base = initial.powf(e);
    let excess = p1
        .points
        .iter()
        .zip(&p2.points)
        .map(|(a, b)| norm(periodic_difference(&grid, *a, *b)).powf(e) - base)
        .fold(0.0, f64::max);
    let forcing = t.sqrt() * history.l2_h2_norm(0.0, t);
    let quotient = if forcing > 0.0 { excess / forcing } else { 0.0 };
    Ok(SeparationReport { initial, excess, forcing, quotient })
}

/// Local space-time oscillation of a density history.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationField {
    pub times: Vec<f64>,
    /// `values[s][node]`: sup of `|ρ(q, t2) − ρ(p, t1)|` over the cylinder
    /// `|q − p| ≤ r0`, `|t2 − t1| ≤ r0` centred at node `p`, time `times[s]`.
    pub values: Vec<Vec<f64>>,
}

impl OscillationField {
    pub fn max(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, &v| m.max(v))
    }
}

/// Integer offsets inside the closed ball of radius `r` (in index units).
fn ball_offsets(dim: usize, r: f64) -> Vec<[i64; 3]> {
    let m = (r * (1.0 + 1e-12)).floor() as i64;
    let r2 = r * r * (1.0 + 1e-12);
    let zr = if dim == 3 { -m..=m } else { 0..=0 };
    let mut out = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            for k in zr.clone() {
                if ((i * i + j * j + k * k) as f64) <= r2 {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Space-time oscillation of `ρ` over cylinders of radius `r0`.
pub fn oscillation_probe(history: &[(f64, Field)], r0: f64) -> Result<OscillationField> {
    let first = history
        .first()
        .ok_or_else(|| Error::Degenerate("empty density history".into()))?;
    let grid = *first.1.grid();
    if history.iter().any(|(_, f)| *f.grid() != grid) {
        return Err(Error::GridMismatch("density snapshots on different grids".into()));
    }
    if !(r0 > 0.0 && r0 < 0.5 * grid.length()) {
        return Err(Error::InvalidParameter(format!("radius {r0} must lie in (0, L/2)")));
    }
    let offsets = ball_offsets(grid.dim(), r0 / grid.spacing());
    // Per-snapshot ball extrema.
    let extrema: Vec<(Vec<f64>, Vec<f64>)> = history
        .iter()
        .map(|(_, f)| {
            let v = f.values();
            (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    let mi = grid.multi_index(idx);
                    offsets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &o| {
                        let q = v[grid.wrapped_index(mi, o)];
                        (lo.min(q), hi.max(q))
                    })
                })
                .unzip()
        })
        .collect();
    let slack = r0 * 1e-12;
    let values = history
        .iter()
        .map(|(t1, f)| {
            let window: Vec<usize> =
                (0..history.len()).filter(|&s| (history[s].0 - t1).abs() <= r0 + slack).collect();
            f.values()
                .par_iter()
                .enumerate()
                .map(|(idx, &p)| {
                    window.iter().fold(0.0f64, |m, &s| {
                        let (lo, hi) = (&extrema[s].0, &extrema[s].1);
                        m.max(hi[idx] - p).max(p - lo[idx])
                    })
                })
                .collect()
        })
        .collect();
    Ok(OscillationField { times: history.iter().map(|(t, _)| *t).collect(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::leray_project;
    use std::f64::consts::PI;

    fn g2(n: usize) -> Grid {
        Grid::torus(2, n).unwrap()
    }

    fn smooth_velocity(g: Grid) -> VectorField {
        leray_project(&VectorField::from_fn(g, |x| {
            [x[1].sin() + 0.3 * (x[0] + x[1]).cos(), 0.5 * x[0].cos(), 0.0]
        }))
    }

    #[test]
    fn stationary_field_keeps_points() {
        let g = g2(16);
        let h = VelocityHistory::frozen(VectorField::zeros(g), 0.0, 1.0);
        let tr = trace_characteristic([1.0, 2.0, 0.0], 1.0, 0.0, &h, 0.1).unwrap();
        assert_eq!(tr.points[0], [1.0, 2.0, 0.0]);
        assert!(tr.points.iter().all(|p| p == &[1.0, 2.0, 0.0]));
    }

    #[test]
    fn uniform_flow_is_a_straight_line() {
        let g = g2(16);
        let c = 0.7;
        let h = VelocityHistory::frozen(VectorField::constant(g, [c, 0.0, 0.0]), 0.0, 2.0);
        let x = [0.3, 1.0, 0.0];
        let tr = trace_characteristic(x, 2.0, 0.5, &h, 0.01).unwrap();
        let expect = (x[0] - c * 1.5).rem_euclid(2.0 * PI);
        let end = tr.end();
        assert!((end[0] - expect).abs() < 1e-12, "{} vs {expect}", end[0]);
        assert!((end[1] - 1.0).abs() < 1e-14);
        assert!(tr.points.iter().all(|p| p[0] >= 0.0 && p[0] < 2.0 * PI));
    }

    #[test]
    fn forward_backward_roundtrip() {
        let g = g2(64);
        let h = VelocityHistory::frozen(smooth_velocity(g), 0.0, 1.0);
        for x in [[1.0, 2.0, 0.0], [5.5, 0.2, 0.0], [3.0, 3.0, 0.0]] {
            let fwd = trace_path(x, 0.0, 1.0, &h, 1e-3).unwrap();
            let back = trace_path(fwd.end(), 1.0, 0.0, &h, 1e-3).unwrap();
            let z = periodic_difference(&g, back.end(), x);
            assert!(norm(z) < 1e-6, "{:?}", z);
        }
    }

    #[test]
    fn uncovered_time_range_is_rejected() {
        let g = g2(16);
        let h = VelocityHistory::frozen(VectorField::zeros(g), 0.0, 1.0);
        assert!(matches!(trace_characteristic([0.0; 3], 2.0, 0.0, &h, 0.1), Err(Error::TimeNotCovered { .. })));
    }

    #[test]
    fn time_interpolation_between_snapshots() {
        let g = g2(16);
        let h = VelocityHistory::new(vec![
            (0.0, VectorField::constant(g, [0.0, 0.0, 0.0])),
            (1.0, VectorField::constant(g, [2.0, 0.0, 0.0])),
        ])
        .unwrap();
        let v = h.velocity_at([1.0, 1.0, 0.0], 0.25);
        assert!((v[0] - 0.5).abs() < 1e-14);
        // dy/dτ = 2τ ⇒ y(1) − y(0) = 1.
        let tr = trace_path([1.0, 1.0, 0.0], 0.0, 1.0, &h, 0.1).unwrap();
        assert!((tr.end()[0] - 2.0).abs() < 1e-12);
    }

    fn blob(g: Grid) -> Field {
        Field::from_fn(g, |x| 1.0 + (1.5 * ((x[0] - PI).cos() + (x[1] - PI).cos() - 2.0)).exp())
    }

    #[test]
    fn zero_velocity_leaves_density_bitwise_unchanged() {
        let g = g2(32);
        let rho = blob(g);
        let h = VelocityHistory::frozen(VectorField::zeros(g), 0.0, 0.1);
        let out = advect_density(&rho, &h, 0.0, 0.1).unwrap();
        assert_eq!(out.values(), rho.values());
    }

    #[test]
    fn one_cell_translation_shifts_samples() {
        let g = g2(32);
        let rho = blob(g);
        let c = 1.3;
        let dt = g.spacing() / c;
        let h = VelocityHistory::frozen(VectorField::constant(g, [c, 0.0, 0.0]), 0.0, dt);
        let out = advect_density(&rho, &h, 0.0, dt).unwrap();
        for idx in 0..g.len() {
            let src = g.wrapped_index(g.multi_index(idx), [-1, 0, 0]);
            assert!((out.values()[idx] - rho.values()[src]).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_respects_maximum_principle() {
        let g = g2(64);
        let rho = blob(g);
        // Cellular rotation from the stream function sin x sin y.
        let u = VectorField::from_fn(g, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin(), 0.0]);
        let dt = 0.05;
        let h = VelocityHistory::frozen(u, 0.0, 100.0);
        let (lo, hi) = (rho.min(), rho.max());
        let mut r = rho;
        for s in 0..200 {
            r = advect_density(&r, &h, s as f64 * dt, dt).unwrap();
            assert!(r.min() >= lo - 1e-12 && r.max() <= hi + 1e-12);
        }
    }

    #[test]
    fn separation_trivial_flows() {
        let g = g2(32);
        let zero = VelocityHistory::frozen(VectorField::zeros(g), 0.0, 1.0);
        let r = separation_check([1.0, 1.0, 0.0], [1.1, 1.2, 0.0], 1.0, &zero, 0.01, 0.5).unwrap();
        assert_eq!(r.excess, 0.0);
        assert_eq!(r.quotient, 0.0);

        let uniform = VelocityHistory::frozen(VectorField::constant(g, [0.4, -0.3, 0.0]), 0.0, 1.0);
        let r = separation_check([1.0, 1.0, 0.0], [1.1, 1.2, 0.0], 1.0, &uniform, 0.01, 0.5).unwrap();
        assert!(r.excess.abs() < 1e-12);

        assert!(matches!(
            separation_check([1.0, 1.0, 0.0], [1.0, 1.0, 0.0], 1.0, &zero, 0.01, 0.5),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn oscillation_of_constant_is_zero() {
        let g = g2(16);
        let hist = vec![(0.0, Field::constant(g, 1.3)), (0.1, Field::constant(g, 1.3))];
        assert_eq!(oscillation_probe(&hist, 0.5).unwrap().max(), 0.0);
    }

    #[test]
    fn oscillation_of_lipschitz_field() {
        let g = g2(64);
        // Lipschitz constant of 0.5 sin(x + y) is 0.5·√2.
        let rho = Field::from_fn(g, |x| 1.5 + 0.5 * (x[0] + x[1]).sin());
        let lip = 0.5 * 2f64.sqrt();
        let hist = vec![(0.0, rho.clone()), (1.0, rho)];
        for r0 in [0.1, 0.3, 0.6] {
            let osc = oscillation_probe(&hist, r0).unwrap().max();
            assert!(osc <= lip * r0 * (1.0 + 1e-9), "r0 {r0}: {osc}");
            assert!(osc > 0.5 * lip * r0 * 0.9);
        }
    }

    #[test]
    fn oscillation_is_monotone_in_radius() {
        let g = g2(32);
        let hist: Vec<(f64, Field)> = (0..5)
            .map(|s| {
                let t = 0.1 * s as f64;
                (t, Field::from_fn(g, |x| 1.5 + 0.4 * (x[0] - t).sin() * x[1].cos()))
            })
            .collect();
        let mut prev = 0.0;
        for r0 in [0.05, 0.2, 0.25, 0.4, 0.8, 1.5] {
            let osc = oscillation_probe(&hist, r0).unwrap().max();
            assert!(osc >= prev);
            prev = osc;
        }
        let half = oscillation_probe(&hist, 0.4).unwrap().max();
        let full = oscillation_probe(&hist, 0.8).unwrap().max();
        assert!(half >= 0.5 * full * 0.9);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]

        #[test]
        fn advection_never_widens_the_range(seed in 0u64..10_000, speed in 0.1f64..2.0) {
            use rand::{Rng, SeedableRng};
            let g = g2(16);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..g.len()).map(|_| rng.random_range(1.0..2.0)).collect();
            let rho = Field::from_values(g, values).unwrap();
            let u = smooth_velocity(g).map_components(|c| c.map(|v| speed * v));
            let history = VelocityHistory::frozen(u, 0.0, 0.05);
            let next = advect_density(&rho, &history, 0.0, 0.05).unwrap();
            proptest::prop_assert!(next.min() >= rho.min() && next.max() <= rho.max());
        }

        #[test]
        fn limited_interpolant_stays_in_cell_bounds(seed in 0u64..10_000, px in 0.0f64..6.2, py in 0.0f64..6.2) {
            use rand::{Rng, SeedableRng};
            let g = g2(8);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = Field::from_values(g, values).unwrap();
            let h = g.spacing();
            let (i, j) = ((px / h).floor() as i64, (py / h).floor() as i64);
            let corners: Vec<f64> = [(0, 0), (1, 0), (0, 1), (1, 1)]
                .iter()
                .map(|(a, b)| f.values()[g.wrapped_index([0, 0, 0], [i + a, j + b, 0])])
                .collect();
            let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let v = interpolate_limited(&f, [px, py, 0.0]);
            proptest::prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
    }
}
