//! Energy laws, higher-order functionals and the inequalities behind them,
//! measured on discrete states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{
    divergence, h_seminorm, laplacian, lp_norm, vector_h_seminorm, vector_lp_norm, wavenumber_sq, Field, Grid,
    Spectrum, VectorField,
};
use crate::model::{penalty_density, penalty_gradient, penalty_gradient_at, SimState};
use crate::transport::oscillation_probe;

/// Energy budget of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    /// `∫ ½ρ|u|²`
    pub e_kin: f64,
    /// `∫ ½|∇d|²`
    pub e_dir: f64,
    /// `∫ F(d)`
    pub e_pen: f64,
    /// `∫ |∇u|² + |Δd − f(d)|²`
    pub dissipation: f64,
    pub total: f64,
}

pub fn energy_report(state: &SimState, eta: f64) -> EnergyReport {
    let grid = *state.grid();
    let cell = grid.cell_volume();
    let speed2 = state.u.norm_sq();
    let e_kin = 0.5 * state.rho.values().iter().zip(speed2.values()).map(|(r, s)| r * s).sum::<f64>() * cell;
    let e_dir = 0.5 * vector_h_seminorm(&state.d, 1).expect("order 1").powi(2);
    let e_pen = penalty_density(&state.d, eta).integral();
    let f = penalty_gradient(&state.d, eta);
    let mut tension = 0.0;
    for (dc, fc) in state.d.components().iter().zip(f.components()) {
        let lap = laplacian(dc);
        tension += lap.values().iter().zip(fc.values()).map(|(l, f)| (l - f).powi(2)).sum::<f64>();
    }
    let dissipation = vector_h_seminorm(&state.u, 1).expect("order 1").powi(2) + tension * cell;
    EnergyReport { t: state.t, e_kin, e_dir, e_pen, dissipation, total: e_kin + e_dir + e_pen }
}

/// `(E_{n+1} − E_n)/Δt + D_{n+1}`, with `Δt` the time between the reports.
pub fn energy_law_residual(before: &EnergyReport, after: &EnergyReport, dt: f64) -> f64 {
    (after.total - before.total) / dt + after.dissipation
}

/// `Φ² = ‖∇u‖² + ‖Δd‖²` and `Φ̃² = Φ² + ‖u‖ + ‖∇d‖`, plus one if requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValues {
    pub phi2: f64,
    pub phi_tilde2: f64,
}

pub fn phi_functionals(state: &SimState, plus_one: bool) -> PhiValues {
    let phi2 = vector_h_seminorm(&state.u, 1).expect("order 1").powi(2)
        + vector_h_seminorm(&state.d, 2).expect("order 2").powi(2);
    let lower = vector_lp_norm(&state.u, 2.0).expect("L2") + vector_h_seminorm(&state.d, 1).expect("order 1");
    PhiValues { phi2, phi_tilde2: phi2 + lower + if plus_one { 1.0 } else { 0.0 } }
}

/// One point of a Φ time series with the dissipative norms the 2D
/// inequality needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiSample {
    pub t: f64,
    pub phi2: f64,
    /// `Φ̃²` without the `+1`.
    pub phi_tilde2: f64,
    /// `‖Δu‖²`
    pub lap_u2: f64,
    /// `‖∇Δd‖²`
    pub grad_lap_d2: f64,
}

pub fn phi_sample(state: &SimState) -> PhiSample {
    let phi = phi_functionals(state, false);
    let lap_u2 = vector_h_seminorm(&state.u, 2).expect("order 2").powi(2);
    let mut grad_lap_d2 = 0.0;
    for c in state.d.components() {
        grad_lap_d2 += h_seminorm(&laplacian(c), 1).expect("order 1").powi(2);
    }
    PhiSample { t: state.t, phi2: phi.phi2, phi_tilde2: phi.phi_tilde2, lap_u2, grad_lap_d2 }
}

/// Smallest constants making the differential inequalities hold along a
/// sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LadyzhenskayaFit {
    /// 2D: smallest `C` with `dΦ²/dt + ‖Δu‖² + ‖∇Δd‖² ≤ C(Φ⁴ + 1)`.
    /// 3D: smallest `C` with `dΦ̃²/dt ≤ C Φ̃⁸` (`Φ̃²` with the `+1`).
    pub c: f64,
    /// Smallest `K` with `dΦ̃²/dt ≤ K Φ̃²` (`Φ̃²` without the `+1`).
    pub growth: f64,
    /// Centered differences `dΦ²/dt` at interior samples.
    pub dphi2_dt: Vec<f64>,
}

fn centered(samples: &[PhiSample], value: impl Fn(&PhiSample) -> f64) -> Vec<f64> {
    samples
        .windows(3)
        .map(|w| (value(&w[2]) - value(&w[0])) / (w[2].t - w[0].t))
        .collect()
}

pub fn ladyzhenskaya_fit(samples: &[PhiSample], dim: usize) -> Result<LadyzhenskayaFit> {
    if samples.len() < 3 {
        return Err(Error::SeriesTooShort { needed: 3, got: samples.len() });
    }
    let dphi2 = centered(samples, |s| s.phi2);
    let dtilde = centered(samples, |s| s.phi_tilde2);
    let interior = &samples[1..samples.len() - 1];
    let c = match dim {
        2 => interior
            .iter()
            .zip(&dphi2)
            .map(|(s, d)| (d + s.lap_u2 + s.grad_lap_d2) / (s.phi2 * s.phi2 + 1.0))
            .fold(0.0, f64::max),
        3 => interior
            .iter()
            .zip(&dtilde)
            .map(|(s, d)| d / (s.phi_tilde2 + 1.0).powi(4))
            .fold(0.0, f64::max),
        _ => return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}"))),
    };
    let growth = interior
        .iter()
        .zip(&dtilde)
        .filter(|(s, _)| s.phi_tilde2 > 0.0)
        .map(|(s, d)| d / s.phi_tilde2)
        .fold(0.0, f64::max);
    Ok(LadyzhenskayaFit { c, growth, dphi2_dt: dphi2 })
}

/// Both sides of the Gagliardo–Nirenberg inequalities for one field.
///
/// `rhs2 = ‖f‖²(‖∇f‖² + ‖f‖²)`, `rhs3 = ‖f‖(‖∇f‖² + ‖f‖²)^{3/2}`; with
/// `zero_mean` the `‖f‖²` inside the brackets is dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnReport {
    /// `‖f‖⁴_{L⁴}`
    pub lhs: f64,
    pub rhs2: f64,
    pub rhs3: f64,
    pub ratio2: f64,
    pub ratio3: f64,
}

impl GnReport {
    /// Ratio of the form matching the grid dimension.
    pub fn ratio(&self, dim: usize) -> f64 {
        if dim == 2 {
            self.ratio2
        } else {
            self.ratio3
        }
    }
}

fn gn_from_norms(l4: f64, l2: f64, grad: f64, zero_mean: bool) -> GnReport {
    let lhs = l4.powi(4);
    let bracket = grad * grad + if zero_mean { 0.0 } else { l2 * l2 };
    let rhs2 = l2 * l2 * bracket;
    let rhs3 = l2 * bracket.powf(1.5);
    let ratio = |r: f64| if r > 0.0 { lhs / r } else { 0.0 };
    GnReport { lhs, rhs2, rhs3, ratio2: ratio(rhs2), ratio3: ratio(rhs3) }
}

pub fn gn_check(f: &Field, zero_mean: bool) -> GnReport {
    gn_from_norms(
        lp_norm(f, 4.0).expect("L4"),
        lp_norm(f, 2.0).expect("L2"),
        h_seminorm(f, 1).expect("order 1"),
        zero_mean,
    )
}

pub fn gn_check_vector(v: &VectorField, zero_mean: bool) -> GnReport {
    gn_from_norms(
        vector_lp_norm(v, 4.0).expect("L4"),
        vector_lp_norm(v, 2.0).expect("L2"),
        vector_h_seminorm(v, 1).expect("order 1"),
        zero_mean,
    )
}

/// Random real trigonometric polynomial with `|k_i| ≤ band`.
///
/// The coefficients depend only on `seed` and `band`, never on the grid, so
/// the same field can be sampled at several resolutions.
pub fn random_band_limited(grid: Grid, band: i64, seed: u64, zero_mean: bool) -> Result<Field> {
    if band < 1 || !grid.is_resolved([band, 0, 0]) {
        return Err(Error::InvalidParameter(format!("band {band} is not resolved on an n = {} grid", grid.n())));
    }
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay: f64 = rng.random_range(0.0..0.5);
    let mut spec = Spectrum::zeros(grid);
    let zr = if dim == 3 { -band..=band } else { 0..=0 };
    for kx in -band..=band {
        for ky in -band..=band {
            for kz in zr.clone() {
                let k = [kx, ky, kz];
                // One representative per ±k pair; the mean mode is real.
                let first = k.iter().copied().find(|&c| c != 0);
                if first.is_some_and(|c| c < 0) {
                    continue;
                }
                let amp = (-decay * (kx * kx + ky * ky + kz * kz) as f64).exp();
                let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * amp;
                if first.is_none() {
                    if !zero_mean {
                        spec.coeffs_mut()[0] = Complex64::new(c.re, 0.0);
                    }
                    continue;
                }
                let i = grid.spectral_index(k).expect("resolved");
                let j = grid.spectral_index([-kx, -ky, -kz]).expect("resolved");
                spec.coeffs_mut()[i] = c;
                spec.coeffs_mut()[j] = c.conj();
            }
        }
    }
    Ok(spec.to_physical())
}

/// Empirical supremum of the dimension-appropriate GN ratio over random
/// band-limited fields; trial `i` uses seed `seed + i`.
pub fn gn_monte_carlo(grid: Grid, band: i64, trials: usize, seed: u64, zero_mean: bool) -> Result<f64> {
    let dim = grid.dim();
    (0..trials as u64)
        .into_par_iter()
        .map(|i| random_band_limited(grid, band, seed.wrapping_add(i), zero_mean).map(|f| gn_check(&f, zero_mean).ratio(dim)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// `½∫ |ρ − ρ̄|² + ρ̄|u − ū|² + |∇d − ∇d̄|²` between a state and its twin
/// (the barred state).
pub fn twin_divergence(a: &SimState, b: &SimState) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch("twin states on different grids".into()));
    }
    let cell = a.grid().cell_volume();
    let rho_a = a.rho.values();
    let rho_b = b.rho.values();
    let mut sum: f64 = rho_a.iter().zip(rho_b).map(|(x, y)| (x - y).powi(2)).sum();
    for (ua, ub) in a.u.components().iter().zip(b.u.components()) {
        sum += ua.values().iter().zip(ub.values()).zip(rho_b).map(|((x, y), r)| r * (x - y).powi(2)).sum::<f64>();
    }
    let mut grad = 0.0;
    for (da, db) in a.d.components().iter().zip(b.d.components()) {
        grad += h_seminorm(&da.zip_map(db, |x, y| x - y), 1)?.powi(2);
    }
    Ok(0.5 * (sum * cell + grad))
}

/// Least-squares slope of `ln(value)` against `t`.
pub fn gronwall_slope(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: times.len().min(values.len()) });
    }
    if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Degenerate("difference functional must be positive to take logarithms".into()));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let ml = logs.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all sample times coincide".into()));
    }
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum();
    Ok(sxy / sxx)
}

/// Empirical Hölder exponent of a density history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HolderEstimate {
    /// The field does not oscillate; no exponent is defined.
    Flat,
    Exponent(f64),
}

/// Log-log regression of the maximal oscillation against radii `h·{1,2,4,8}`.
pub fn holder_modulus(history: &[(f64, Field)]) -> Result<HolderEstimate> {
    if history.len() < 2 {
        return Err(Error::SeriesTooShort { needed: 2, got: history.len() });
    }
    let h = history[0].1.grid().spacing();
    let mut pts = Vec::new();
    for m in [1.0, 2.0, 4.0, 8.0] {
        let r = m * h;
        let osc = oscillation_probe(history, r)?.max();
        pts.push((r.ln(), osc));
    }
    let scale = history.iter().map(|(_, f)| f.max_abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if pts.iter().any(|&(_, o)| o <= 1e-13 * scale) {
        return Ok(HolderEstimate::Flat);
    }
    let times: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let values: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok(HolderEstimate::Exponent(gronwall_slope(&times, &values)?))
}

/// Smooth partition of unity on the periodic unit interval or square,
/// sampled at `n` nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    pub dim: usize,
    pub n: usize,
    pub lambda: f64,
    /// Bump centres per axis.
    pub centers: Vec<f64>,
    /// Cell size `s = 1/N ≤ λ/2`; each bump is supported in `|x − c| < s`.
    pub cell: f64,
    /// `values[k][node]` for the 1D factors.
    pub values: Vec<Vec<f64>>,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

/// Measured properties of a partition of unity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionReport {
    /// `max |Σ ζ_k − 1|` over nodes.
    pub sum_error: f64,
    /// Largest number of functions nonzero at one node.
    pub multiplicity: usize,
    /// `min Σ ζ_k²` over nodes.
    pub mu: f64,
    /// Largest support diameter.
    pub diameter: f64,
    pub max_gradient: f64,
    pub max_hessian: f64,
    /// `max|∇ζ|·λ`
    pub c1: f64,
    /// `max|D²ζ|·λ²`
    pub c2: f64,
}

fn bump(t: f64) -> (f64, f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - t * t;
    let b = (1.0 - 1.0 / q).exp();
    let g = -2.0 * t / (q * q);
    let dg = -2.0 / (q * q) - 8.0 * t * t / (q * q * q);
    (b, b * g, b * (g * g + dg))
}

pub fn partition_of_unity(dim: usize, n: usize, lambda: f64) -> Result<PartitionOfUnity> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidParameter(format!("partition of unity is built in 1D or 2D, got {dim}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("scale must lie in (0, 1), got {lambda}")));
    }
    let count = (2.0 / lambda).ceil() as usize;
    let s = 1.0 / count as f64;
    if s * (n as f64) < 4.0 {
        return Err(Error::InvalidParameter(format!(
            "scale {lambda} leaves fewer than 4 nodes per cell on {n} nodes"
        )));
    }
    let centers: Vec<f64> = (0..count).map(|j| (j as f64 + 0.5) * s).collect();
    let nodes: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let raw: Vec<Vec<(f64, f64, f64)>> = centers
        .iter()
        .map(|&c| {
            nodes
                .iter()
                .map(|&x| {
                    let d = x - c - (x - c).round();
                    let (b, b1, b2) = bump(d / s);
                    (b, b1 / s, b2 / (s * s))
                })
                .collect()
        })
        .collect();
    let mut values = vec![vec![0.0; n]; count];
    let mut first = vec![vec![0.0; n]; count];
    let mut second = vec![vec![0.0; n]; count];
    for i in 0..n {
        let (sv, s1, s2) = raw.iter().fold((0.0, 0.0, 0.0), |a, r| (a.0 + r[i].0, a.1 + r[i].1, a.2 + r[i].2));
        for k in 0..count {
            let (b, b1, b2) = raw[k][i];
            values[k][i] = b / sv;
            first[k][i] = b1 / sv - b * s1 / (sv * sv);
            second[k][i] = b2 / sv - 2.0 * b1 * s1 / (sv * sv) - b * s2 / (sv * sv) + 2.0 * b * s1 * s1 / (sv * sv * sv);
        }
    }
    Ok(PartitionOfUnity { dim, n, lambda, centers, cell: s, values, first, second })
}

impl PartitionOfUnity {
    pub fn count(&self) -> usize {
        self.centers.len().pow(self.dim as u32)
    }

    pub fn report(&self) -> PartitionReport {
        let n = self.n;
        let m = self.centers.len();
        let (mut sum_error, mut multiplicity, mut mu) = (0.0f64, 0usize, f64::INFINITY);
        let (mut grad, mut hess) = (0.0f64, 0.0f64);
        let ys: Vec<usize> = if self.dim == 2 { (0..n).collect() } else { vec![usize::MAX] };
        for i in 0..n {
            for &j in &ys {
                let (mut sum, mut sq, mut mult) = (0.0, 0.0, 0usize);
                for a in 0..m {
                    let (va, da, sa) = (self.values[a][i], self.first[a][i], self.second[a][i]);
                    if j == usize::MAX {
                        sum += va;
                        sq += va * va;
                        mult += usize::from(va > 0.0);
                        grad = grad.max(da.abs());
                        hess = hess.max(sa.abs());
                        continue;
                    }
                    for b in 0..m {
                        let (vb, db, sb) = (self.values[b][j], self.first[b][j], self.second[b][j]);
                        let v = va * vb;
                        sum += v;
                        sq += v * v;
                        mult += usize::from(v > 0.0);
                        grad = grad.max((da * vb).hypot(va * db));
                        hess = hess.max((sa * vb).abs()).max((da * db).abs()).max((va * sb).abs());
                    }
                }
                sum_error = sum_error.max((sum - 1.0).abs());
                multiplicity = multiplicity.max(mult);
                mu = mu.min(sq);
            }
        }
        let diameter = 2.0 * self.cell * if self.dim == 2 { 2f64.sqrt() } else { 1.0 };
        PartitionReport {
            sum_error,
            multiplicity,
            mu,
            diameter,
            max_gradient: grad,
            max_hessian: hess,
            c1: grad * self.lambda,
            c2: hess * self.lambda * self.lambda,
        }
    }
}

/// Largest `|f(d) − f(d̄)| / |d − d̄|` over random pairs in the unit ball.
pub fn penalty_lipschitz_ratio(eta: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| loop {
        let p: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return p;
        }
    };
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = point(&mut rng);
        let b = point(&mut rng);
        let fa = penalty_gradient_at(a, eta);
        let fb = penalty_gradient_at(b, eta);
        let num: f64 = (0..3).map(|c| (fa[c] - fb[c]).powi(2)).sum::<f64>().sqrt();
        let den: f64 = (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt();
        if den > 0.0 {
            worst = worst.max(num / den);
        }
    }
    worst
}

/// One line of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub e_kin: f64,
    pub e_dir: f64,
    pub e_pen: f64,
    pub dissipation: f64,
    pub total: f64,
    pub phi2: f64,
    pub phi_tilde2: f64,
    pub energy_residual: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_div_u: f64,
    pub max_abs_d: f64,
    pub mass: f64,
}

impl SeriesRow {
    pub const HEADER: [&'static str; 14] = [
        "t",
        "e_kin",
        "e_dir",
        "e_pen",
        "dissipation",
        "total",
        "phi2",
        "phi_tilde2",
        "energy_residual",
        "min_rho",
        "max_rho",
        "max_div_u",
        "max_abs_d",
        "mass",
    ];

    /// Row for `state`; the residual is taken against `previous` and is zero
    /// for the first row.
    pub fn new(state: &SimState, eta: f64, previous: Option<&EnergyReport>) -> (Self, EnergyReport) {
        let e = energy_report(state, eta);
        let phi = phi_functionals(state, false);
        let energy_residual = match previous {
            Some(p) if e.t > p.t => energy_law_residual(p, &e, e.t - p.t),
            _ => 0.0,
        };
        let row = SeriesRow {
            t: state.t,
            e_kin: e.e_kin,
            e_dir: e.e_dir,
            e_pen: e.e_pen,
            dissipation: e.dissipation,
            total: e.total,
            phi2: phi.phi2,
            phi_tilde2: phi.phi_tilde2,
            energy_residual,
            min_rho: state.rho.min(),
            max_rho: state.rho.max(),
            max_div_u: divergence(&state.u).max_abs(),
            max_abs_d: state.d.max_magnitude(),
            mass: state.rho.integral(),
        };
        (row, e)
    }

    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.e_kin,
            self.e_dir,
            self.e_pen,
            self.dissipation,
            self.total,
            self.phi2,
            self.phi_tilde2,
            self.energy_residual,
            self.min_rho,
            self.max_rho,
            self.max_div_u,
            self.max_abs_d,
            self.mass,
        ]
    }
}

/// `‖u‖_{L²}` of a velocity field; the quantity compared across backends.
pub fn velocity_l2(u: &VectorField) -> f64 {
    vector_lp_norm(u, 2.0).expect("L2")
}

/// `|k|²`-weighted spectral energy, exposed for tests of the functionals.
pub fn spectral_dirichlet(f: &Field) -> f64 {
    let s = Spectrum::of(f);
    let grid = *f.grid();
    s.coeffs().iter().enumerate().map(|(i, c)| wavenumber_sq(&grid, i) * c.norm_sqr()).sum::<f64>() * grid.volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Params;
    use crate::stepper::run;
    use std::f64::consts::PI;

    fn g2(n: usize) -> Grid {
        Grid::torus(2, n).unwrap()
    }

    #[test]
    fn rest_state_has_zero_energy() {
        let s = SimState::rest(g2(16), 1.3);
        let e = energy_report(&s, 0.2);
        assert_eq!((e.e_kin, e.e_pen), (0.0, 0.0));
        assert!(e.e_dir.abs() < 1e-25 && e.dissipation.abs() < 1e-25);
        assert_eq!(energy_law_residual(&e, &e, 1e-3), e.dissipation);
        assert!(phi_functionals(&s, false).phi2 < 1e-25);
    }

    #[test]
    fn penalty_energy_of_zero_director() {
        let g = g2(16);
        let mut s = SimState::rest(g, 1.0);
        s.d = VectorField::zeros(g);
        let e = energy_report(&s, 1.0);
        assert!((e.e_pen - 4.0 * PI * PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn kinetic_energy_of_shear() {
        let g = g2(32);
        let mut s = SimState::rest(g, 2.0);
        s.u = VectorField::from_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let e = energy_report(&s, 0.2);
        assert!((e.e_kin - 2.0 * PI * PI).abs() < 1e-10);
        let phi = phi_functionals(&s, false);
        assert!((phi.phi2 - 2.0 * PI * PI).abs() < 1e-10);
        assert!(phi.phi_tilde2 >= phi.phi2);
        assert_eq!(phi_functionals(&s, true).phi_tilde2, phi.phi_tilde2 + 1.0);
    }

    #[test]
    fn dissipation_of_rotating_director() {
        // d = (cos x, sin x): Δd = −d and f(d) = 0, so |Δd − f|² = 1.
        let g = g2(32);
        let mut s = SimState::rest(g, 1.0);
        s.d = VectorField::from_fn(g, |x| [x[0].cos(), x[0].sin(), 0.0]);
        let e = energy_report(&s, 0.2);
        assert!((e.dissipation - 4.0 * PI * PI).abs() < 1e-9);
        assert!((e.e_dir - 2.0 * PI * PI).abs() < 1e-9);
    }

    fn phi_series(phi2: impl Fn(f64) -> f64) -> Vec<PhiSample> {
        (0..20)
            .map(|i| {
                let t = 0.05 * i as f64;
                PhiSample { t, phi2: phi2(t), phi_tilde2: phi2(t), lap_u2: phi2(t), grad_lap_d2: 0.0 }
            })
            .collect()
    }

    #[test]
    fn ladyzhenskaya_fit_trivial_series() {
        let flat = phi_series(|_| 0.0);
        let fit = ladyzhenskaya_fit(&flat, 2).unwrap();
        assert_eq!(fit.c, 0.0);
        assert!(fit.dphi2_dt.iter().all(|&d| d == 0.0));
        assert!(matches!(ladyzhenskaya_fit(&flat[..2], 2), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn ladyzhenskaya_fit_of_stokes_decay() {
        let g = g2(32);
        let p = Params { dt: 1e-2, t_end: 0.5, ..Params::default() };
        let mut s = SimState::rest(g, 1.0);
        s.u = VectorField::from_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let mut samples = Vec::new();
        run(s, &p, 5, |st, _| {
            samples.push(phi_sample(st));
            Ok(())
        })
        .unwrap();
        let fit = ladyzhenskaya_fit(&samples, 2).unwrap();
        assert!(fit.dphi2_dt.iter().all(|&d| d < 0.0));
        assert_eq!(fit.c, 0.0);
        assert_eq!(fit.growth, 0.0);
    }

    #[test]
    fn ladyzhenskaya_fit_growth_constant() {
        // Φ̃² = e^{3t} ⇒ K ≈ 3 up to the centered-difference error.
        let s = phi_series(|t| (3.0 * t).exp());
        let fit = ladyzhenskaya_fit(&s, 3).unwrap();
        assert!((fit.growth - 3.0).abs() < 0.02, "{}", fit.growth);
        assert!(fit.c > 0.0);
    }

    #[test]
    fn gn_zero_field() {
        let r = gn_check(&Field::zeros(g2(16)), true);
        assert_eq!((r.lhs, r.rhs2, r.ratio2, r.ratio3), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn gn_analytic_case() {
        let g = g2(32);
        let f = Field::from_fn(g, |x| x[0].sin() * x[1].sin());
        let r = gn_check(&f, true);
        assert!((r.lhs - 9.0 * PI * PI / 16.0).abs() < 1e-9);
        assert!((r.rhs2 - 2.0 * PI.powi(4)).abs() < 1e-8);
        assert!((r.ratio2 - 9.0 / (32.0 * PI * PI)).abs() < 1e-12);
        let full = gn_check(&f, false);
        assert!((full.rhs2 - 3.0 * PI.powi(4)).abs() < 1e-8);
    }

    #[test]
    fn random_fields_are_resolution_independent() {
        let a = random_band_limited(g2(32), 4, 7, true).unwrap();
        let b = random_band_limited(g2(64), 4, 7, true).unwrap();
        assert!(a.mean().abs() < 1e-14);
        // Node (i, j) at n = 32 is node (2i, 2j) at n = 64.
        for i in 0..32 {
            for j in 0..32 {
                let va = a.values()[a.grid().linear_index([i, j, 0])];
                let vb = b.values()[b.grid().linear_index([2 * i, 2 * j, 0])];
                assert!((va - vb).abs() < 1e-12);
            }
        }
        assert!(random_band_limited(g2(8), 4, 0, true).is_err());
    }

    #[test]
    fn twin_divergence_closed_form() {
        let g = g2(16);
        let a = SimState::rest(g, 1.0);
        assert_eq!(twin_divergence(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        let eps = 1e-3;
        b.u = VectorField::constant(g, [eps, 0.0, 0.0]);
        let v = twin_divergence(&b, &a).unwrap();
        assert!((v - 0.5 * eps * eps * 4.0 * PI * PI).abs() < 1e-15);
        let other = SimState::rest(g2(8), 1.0);
        assert!(twin_divergence(&a, &other).is_err());
    }

    #[test]
    fn gronwall_slope_of_exponential() {
        let t: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| 1e-12 * (2.5 * t).exp()).collect();
        assert!((gronwall_slope(&t, &v).unwrap() - 2.5).abs() < 1e-10);
        assert!(gronwall_slope(&t, &[0.0; 10]).is_err());
    }

    #[test]
    fn holder_of_lipschitz_and_constant_fields() {
        let g = g2(64);
        let flat = Field::constant(g, 1.5);
        assert_eq!(holder_modulus(&[(0.0, flat.clone()), (0.1, flat)]).unwrap(), HolderEstimate::Flat);
        let smooth = Field::from_fn(g, |x| 1.5 + 0.3 * x[0].sin() + 0.2 * x[1].cos());
        match holder_modulus(&[(0.0, smooth.clone()), (0.1, smooth)]).unwrap() {
            HolderEstimate::Exponent(a) => assert!((a - 1.0).abs() < 0.1, "{a}"),
            HolderEstimate::Flat => panic!("smooth field reported flat"),
        }
    }

    #[test]
    fn holder_of_square_root_cusp() {
        let g = g2(64);
        let x0 = g.node(g.linear_index([20, 0, 0]))[0];
        let rough = Field::from_fn(g, |x| 1.0 + 0.5 * ((x[0] - x0) / 2.0).sin().abs().sqrt());
        match holder_modulus(&[(0.0, rough.clone()), (0.1, rough)]).unwrap() {
            HolderEstimate::Exponent(a) => assert!((0.4..=0.6).contains(&a), "{a}"),
            HolderEstimate::Flat => panic!("rough field reported flat"),
        }
    }

    #[test]
    fn partition_sums_to_one() {
        for dim in [1, 2] {
            let p = partition_of_unity(dim, 128, 0.2).unwrap();
            let r = p.report();
            assert!(r.sum_error < 1e-12);
            assert!(r.multiplicity <= if dim == 1 { 4 } else { 16 });
            assert!(r.mu > 0.0);
            assert!(r.diameter <= 0.2 * if dim == 2 { 2f64.sqrt() } else { 1.0 } + 1e-15);
        }
    }

    #[test]
    fn partition_derivative_scaling() {
        let a = partition_of_unity(1, 512, 0.2).unwrap().report();
        let b = partition_of_unity(1, 512, 0.1).unwrap().report();
        let ratio = b.max_gradient / a.max_gradient;
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn partition_derivatives_match_finite_differences() {
        let n = 8192;
        let p = partition_of_unity(1, n, 0.25).unwrap();
        let h = 1.0 / n as f64;
        for k in 0..p.centers.len() {
            for i in 0..n {
                let (l, r) = ((i + n - 1) % n, (i + 1) % n);
                let d1 = (p.values[k][r] - p.values[k][l]) / (2.0 * h);
                let d2 = (p.values[k][r] - 2.0 * p.values[k][i] + p.values[k][l]) / (h * h);
                assert!((d1 - p.first[k][i]).abs() < 1e-3 * (1.0 + p.first[k][i].abs()));
                assert!((d2 - p.second[k][i]).abs() < 1e-2 * (1.0 + p.second[k][i].abs()), "{k} {i} {d2} {}", p.second[k][i]);
            }
        }
    }

    #[test]
    fn partition_rejects_coarse_grids() {
        assert!(partition_of_unity(1, 16, 0.1).is_err());
        assert!(partition_of_unity(3, 64, 0.5).is_err());
        assert!(partition_of_unity(1, 64, 1.5).is_err());
    }

    #[test]
    fn penalty_is_lipschitz_in_unit_ball() {
        let eta = 0.2;
        let r = penalty_lipschitz_ratio(eta, 20_000, 3);
        assert!(r <= 3.0 / (eta * eta));
        assert!(r > 0.5 / (eta * eta));
    }

    #[test]
    fn series_row_residual() {
        let g = g2(16);
        let s = SimState::rest(g, 1.5);
        let (first, e) = SeriesRow::new(&s, 0.2, None);
        assert_eq!(first.energy_residual, 0.0);
        assert_eq!(first.mass, 1.5 * 4.0 * PI * PI);
        let mut later = s.clone();
        later.t = 0.1;
        let (second, _) = SeriesRow::new(&later, 0.2, Some(&e));
        assert!(second.energy_residual.abs() < 1e-20);
        assert_eq!(SeriesRow::HEADER.len(), second.values().len());
    }

    #[test]
    fn spectral_dirichlet_matches_seminorm() {
        let g = g2(32);
        let f = Field::from_fn(g, |x| (2.0 * x[0]).sin() + x[1].cos());
        assert!((spectral_dirichlet(&f) - h_seminorm(&f, 1).unwrap().powi(2)).abs() < 1e-9);
    }
}
